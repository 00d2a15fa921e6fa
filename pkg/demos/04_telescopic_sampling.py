"""
Sampling the telescopic product measure
=======================================

Positions 1..n split into chains {i, iq, iq^2, ...}.  Each chain is an
independent Markov path.  At a critical point the multiple averages
concentrate on alpha and the cylinder local dimensions on dim(alpha).
"""

import numpy as np

from multiergodic import (
    chain_layout,
    expected_phi,
    local_dimension_estimate,
    multiple_average,
    sample_words,
    solve_critical,
    solve_transfer,
    transition_kernel,
    validate_spec,
)

print("chains of 1..9 for q=3:", [c.tolist() for c in chain_layout(9, 3).chains])

spec = validate_spec({"q": 2, "intervals": [[0, 0.5], [0.75, 1]], "phi": [[0, 0], [0, 1]]})
alpha = 0.3
point = solve_critical(spec, alpha)
kernel = transition_kernel(spec, solve_transfer(spec, point.s, point.r))

layout = chain_layout(50_000, spec.q)
words = sample_words(kernel, layout, seed=42, count=50)
averages = np.array([multiple_average(w, spec) for w in words])
dims = np.array([local_dimension_estimate(spec, kernel, w) for w in words])

print(f"target alpha {alpha}, depth series {expected_phi(kernel, spec):.6f}")
print(f"sample mean {averages.mean():.6f} +/- {averages.std(ddof=1) / np.sqrt(len(words)):.6f}")
print(f"dim(alpha) {point.dim:.6f}, median local dimension {np.median(dims):.6f}")
