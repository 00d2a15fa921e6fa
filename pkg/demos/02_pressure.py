"""
Pressure, its gradient and convexity
====================================

Unequal contraction rates (interval lengths 1/2 and 1/4) make the
normalized pressure strictly convex.  The implicit-differentiation gradient
is compared with central differences, and the s-slope is compared with the
expected multiple average of the telescopic measure.
"""

import numpy as np

from multiergodic import pressure_gradient, pressure_hessian, pressure_point, solve_transfer, transition_kernel, validate_spec
from multiergodic.pressure import finite_difference_gradient
from multiergodic.telescopic import expected_phi

spec = validate_spec({"q": 2, "intervals": [[0, 0.5], [0.75, 1]], "phi": [[0, 0], [0, 1]]})

print(f"{'s':>5} {'r':>5} {'Pn':>10} {'dPn/ds':>10} {'dPn/dr':>10} {'min eig':>10}")
for s in (-2.0, 0.0, 2.0):
    for r in (-2.0, 0.0, 2.0):
        p = pressure_point(spec, s, r, hessian=True)
        eig = np.linalg.eigvalsh(p.hessian).min()
        print(f"{s:5.1f} {r:5.1f} {p.Pn:10.6f} {p.dPn_ds:10.6f} {p.dPn_dr:10.6f} {eig:10.2e}")

s, r = 0.8, -1.1
exact = np.array(pressure_gradient(spec, s, r))
fd = np.array(finite_difference_gradient(spec, s, r))
print("gradient:", exact, " central differences:", fd)

kernel = transition_kernel(spec, solve_transfer(spec, s, r))
print("depth series:", expected_phi(kernel, spec), " dPn/ds:", exact[0])
print("hessian at (s, r):\n", pressure_hessian(spec, s, r))
