"""Recover the two interior tips of the demo plate from semi-analytic crack openings.

The opening is a K = 1 Williams series at each tip, so the indicator is evaluated by
quadrature of the jump alone. Run: python3 demos/oracle_recovery.py
"""

from enclosure.extraction import extract
from enclosure.geometry import CrackConfig, Material, PlateGeometry, s_sigma
from enclosure.indicator import geometric_tau_grid, sweep_tau
from enclosure.oracle import SeriesCoefficients, windowed_jump

geom = PlateGeometry(4.0, 2.0, 1.0, 0.5)
cracks = CrackConfig([0.0, 1.5, 2.5, 4.0])
mat = Material(1.0, 1.0)
jump = windowed_jump([SeriesCoefficients(1, [0.3], [1.0], 0.45), SeriesCoefficients(2, [-0.5], [0.8], 0.45)],
                     cracks, mat)
taus = geometric_tau_grid(10.0, 1.2, 25)

for x1 in (1.7, 2.3):
    x = geom.probe(x1)
    true = s_sigma(x, cracks, geom)
    res = extract(sweep_tau(jump, x, taus, mat, geom.s_tilde, c=geom.c), geom)
    print(f"probe {x1}: s_hat {res.s_hat:.5f} (true {true.s_sigma:.5f}), parity {res.parity_hat}, "
          f"c_hat {res.c_hat:.5f} (true {cracks.tips[true.touching_tips[0]]}), confidence {res.confidence}")
