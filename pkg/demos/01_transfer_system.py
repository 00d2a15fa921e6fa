"""
Solving the transfer system
===========================

Two maps on [0, 1/2] and [1/2, 1], the observable phi(i, j) = i*j and q = 2.
At (s, r) = (0, -2) the positive solution is t = (1/2, 1/2) and the induced
Markov kernel is uniform.
"""

import numpy as np

from multiergodic import solve_transfer, transition_kernel, validate_spec

spec = validate_spec({"q": 2, "intervals": [[0, 0.5], [0.5, 1]], "phi": [[0, 0], [0, 1]]})
print("lambdas:", spec.lambdas)

sol = solve_transfer(spec, 0.0, -2.0)
print("t =", sol.t, "residual =", sol.residual)

kernel = transition_kernel(spec, sol)
print("initial law:", kernel.initial)
print("transitions:\n", kernel.transitions)

# Move away from the symmetric point: rows still sum to one.
for s, r in [(1.5, -1.0), (-2.0, 0.5), (3.0, 3.0)]:
    k = transition_kernel(spec, solve_transfer(spec, s, r))
    print(f"(s, r) = ({s:+.1f}, {r:+.1f})  row sums - 1 =", k.transitions.sum(axis=1) - 1)

# Any positive starting vector lands on the same solution.
rng = np.random.default_rng(0)
starts = [solve_transfer(spec, 0.7, -1.3, t0=np.exp(rng.uniform(-5, 5, 2))).t for _ in range(5)]
print("spread over 5 starts:", np.ptp(starts, axis=0))
