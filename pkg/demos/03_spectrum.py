"""
The dimension spectrum
======================

Newton continuation on the critical system traces alpha -> dim(alpha).  The
peak sits at the s = 0 solution and equals the similarity dimension of the
attractor; the ends approach the support [A, B].
"""

import numpy as np

from multiergodic import alpha_star, bowen_dimension, estimate_support, spectrum_curve, validate_spec
from multiergodic.spectrum import minimize_constraint_curve

for label, raw in {
    "equal lengths": {"q": 2, "intervals": [[0, 0.5], [0.5, 1]], "phi": [[0, 0], [0, 1]]},
    "lengths 1/2, 1/4": {"q": 2, "intervals": [[0, 0.5], [0.75, 1]], "phi": [[0, 0], [0, 1]]},
}.items():
    spec = validate_spec(raw)
    a0, r0, d0 = alpha_star(spec)
    print(f"\n{label}: peak at alpha={a0:.6f}, dim={d0:.9f}, similarity dim={bowen_dimension(spec.lambdas):.9f}")

    support = estimate_support(spec)
    print(f"support ~ [{support.A:.4f}, {support.B:.4f}]")

    grid = np.linspace(0.05, 0.95, 19)
    for p in spectrum_curve(spec, grid):
        bar = "#" * int(round(40 * p.dim)) if p.converged else ""
        print(f"  alpha={p.alpha:.2f}  s={p.s:+8.4f}  dim={p.dim:.6f}  {bar}")

    # Upper-bound curve: its minimum over s reproduces the spectrum value.
    s_min, value = minimize_constraint_curve(spec, 0.3)
    print(f"  constraint-curve minimum at alpha=0.3: {value:.9f} (s={s_min:+.4f})")
