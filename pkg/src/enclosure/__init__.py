"""Crack reconstruction on the junction line of a welded two-plate specimen.

The enclosure method probes the plate with a Kelvin-transformed complex
geometrical optics field placed above the top edge.  The exponential growth
rate of a boundary indicator gives the radius of the largest disc below the
probe that misses the cracks, and the phase of its log-derivative gives the
contact angle and hence the tip abscissa.

Subpackages and modules::

    geometry    plate, cracks, material, loads, tangency geometry
    probe       the probe fields and their tractions
    fem         P2 plane-strain solver producing synthetic boundary data
    oracle      crack-tip series jumps and closed-form model integrals
    indicator   the indicator function from boundary data or crack openings
    extraction  decay-rate fits, log-derivative limits, tip recovery, scans
    cli         command-line pipeline
"""

from .geometry import (BoundaryLoad, CrackConfig, Material, PlateGeometry, check_compatibility, make_load_g1,
                       make_load_g2, s_sigma)
from .indicator import IndicatorCurve, indicator_boundary, indicator_sigma, sweep_tau
from .extraction import extract, recover_tip, scan_theorem31

__version__ = "0.1.0"

__all__ = ["BoundaryLoad", "CrackConfig", "Material", "PlateGeometry", "check_compatibility", "make_load_g1",
           "make_load_g2", "s_sigma", "IndicatorCurve", "indicator_boundary", "indicator_sigma", "sweep_tau",
           "extract", "recover_tip", "scan_theorem31", "__version__"]
