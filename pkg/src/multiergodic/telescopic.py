"""Telescopic product measures on q-adic chains.

Positions ``1..n`` split into chains ``{i, iq, iq^2, ...}`` with ``q`` not
dividing ``i``.  Each chain carries an independent copy of the Markov chain
given by a :class:`~multiergodic.transfer.MarkovKernel`, so a position at
depth ``j`` in its chain has marginal law ``initial @ P**j`` and the pair
``(w_k, w_qk)`` is one Markov step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .system import SystemSpec
from .transfer import MarkovKernel

__all__ = [
    "ChainLayout",
    "SampledWord",
    "chain_layout",
    "sample_word",
    "sample_words",
    "word_rng",
    "multiple_average",
    "expected_phi",
    "expected_lyapunov",
    "depth_series",
    "cylinder_measure",
    "local_dimension_estimate",
    "predicted_local_dimension",
    "paper_local_dimension",
]

SERIES_TOL = 1e-12


@dataclass(frozen=True)
class ChainLayout:
    n: int
    q: int
    chains: tuple  # of int arrays [i, iq, iq^2, ...] within [1, n]

    @property
    def starts(self) -> np.ndarray:
        return np.array([c[0] for c in self.chains], dtype=np.int64)

    @property
    def depth(self) -> np.ndarray:
        """``depth[k]`` for ``k = 0..n``: exponent of ``q`` in ``k`` (``depth[0]`` unused)."""
        return _depth_array(self.n, self.q)

    def levels(self) -> list[np.ndarray]:
        """Positions grouped by depth: ``levels()[j]`` holds ``k`` with ``q**j || k``."""
        return _levels(self.n, self.q)


@lru_cache(maxsize=32)
def _depth_array(n: int, q: int) -> np.ndarray:
    d = np.zeros(n + 1, dtype=np.int64)
    step = q
    while step <= n:
        d[step::step] += 1
        step *= q
    d.setflags(write=False)
    return d


@lru_cache(maxsize=32)
def _levels(n: int, q: int) -> list:
    d = _depth_array(n, q)
    k = np.arange(1, n + 1)
    return [k[d[1:] == j] for j in range(int(d.max()) + 1 if n else 0)]


def chain_layout(n: int, q: int) -> ChainLayout:
    """Partition of ``{1..n}`` into q-adic chains, ordered by starting point."""
    if n < 0 or q < 2:
        raise ValueError("need n >= 0 and q >= 2")
    chains = []
    for i in range(1, n + 1):
        if i % q:
            c = [i]
            while c[-1] * q <= n:
                c.append(c[-1] * q)
            chains.append(np.array(c, dtype=np.int64))
    return ChainLayout(n=n, q=q, chains=tuple(chains))


@dataclass(frozen=True)
class SampledWord:
    symbols: np.ndarray  # symbols[k-1] = w_k
    seed: object
    kernel: MarkovKernel

    @property
    def n(self) -> int:
        return self.symbols.size


def word_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator for word ``index`` of a batch seeded by ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def _fill(kernel: MarkovKernel, n: int, q: int, uniforms: np.ndarray) -> np.ndarray:
    w = np.zeros(n + 1, dtype=np.int8 if kernel.m < 128 else np.int32)
    if n == 0:
        return w[1:]
    cum_init = np.cumsum(kernel.initial)
    cum_init[-1] = 1.0
    cum_p = np.cumsum(kernel.transitions, axis=1)
    cum_p[:, -1] = 1.0
    lv = _levels(n, q)
    k0 = lv[0]
    w[k0] = np.searchsorted(cum_init, uniforms[k0 - 1], side="right")
    for k in lv[1:]:
        parent = w[k // q]
        w[k] = (uniforms[k - 1][:, None] >= cum_p[parent]).sum(axis=1)
    return w[1:]


def sample_word(kernel: MarkovKernel, layout: ChainLayout, seed, index: int = 0) -> SampledWord:
    """Draw ``w_1..w_n`` from the telescopic product measure.

    Chain starts follow the initial law and each later entry follows the
    transition row of its predecessor ``w_{k/q}``.  The word is a
    deterministic function of ``(seed, index, layout, kernel)``.
    """
    rng = word_rng(seed, index)
    u = rng.random(layout.n)
    w = _fill(kernel, layout.n, layout.q, u)
    w.setflags(write=False)
    return SampledWord(symbols=w, seed=(seed, index), kernel=kernel)


def sample_words(kernel: MarkovKernel, layout: ChainLayout, seed, count: int) -> list[SampledWord]:
    """Batch of ``count`` words; word ``i`` uses stream ``(seed, i)``."""
    return [sample_word(kernel, layout, seed, i) for i in range(count)]


def _symbols(word) -> np.ndarray:
    if isinstance(word, SampledWord):
        return word.symbols
    if isinstance(word, str):
        return np.array([int(c) for c in word], dtype=np.int64)
    return np.asarray(word)


def multiple_average(word, spec: SystemSpec) -> float:
    """``(1/N) sum_{k<=N} phi(w_k, w_qk)`` with ``N = floor(n/q)``."""
    w = _symbols(word)
    q = spec.q
    N = w.size // q
    if N == 0:
        raise ValueError(f"word of length {w.size} has no pairs for q={q}")
    k = np.arange(1, N + 1)
    return float(spec.phi[w[k - 1], w[q * k - 1]].mean())


def depth_series(
    kernel: MarkovKernel, q: int, f: np.ndarray, bound: float, tol: float = SERIES_TOL, max_depth: int | None = None
) -> float:
    """``(1 - 1/q) sum_j q**-j <initial @ P**j, f>``.

    Summed explicitly up to the first depth ``J`` with tail bound
    ``bound * q**-J * q/(q-1) < tol`` (or up to ``max_depth``).  The
    remaining geometric tail is closed with the depth ``J+1`` marginal,
    which is exact when ``<initial @ P**j, f>`` is constant in ``j``.
    """
    J = 0
    if max_depth is not None:
        J = max_depth
    else:
        while bound * q ** (-J) * q / (q - 1) >= tol:
            J += 1
    mu = np.array(kernel.initial, dtype=float)
    total = 0.0
    for j in range(J + 1):
        total += q ** (-j) * float(mu @ f)
        mu = mu @ kernel.transitions
    return (1 - 1 / q) * total + q ** (-(J + 1)) * float(mu @ f)


def expected_phi(kernel: MarkovKernel, spec: SystemSpec, tol: float = SERIES_TOL, max_depth: int | None = None) -> float:
    """Almost-sure limit of the multiple average under the product measure."""
    b = (kernel.transitions * spec.phi).sum(axis=1)
    return depth_series(kernel, spec.q, b, float(np.abs(spec.phi).max()), tol, max_depth)


def expected_lyapunov(
    kernel: MarkovKernel, spec: SystemSpec, tol: float = SERIES_TOL, max_depth: int | None = None
) -> float:
    """Almost-sure limit of ``(1/n) sum_k lambda_{w_k}``."""
    return depth_series(kernel, spec.q, spec.lambdas, float(spec.lambdas.max()), tol, max_depth)


def cylinder_measure(kernel: MarkovKernel, layout: ChainLayout, word) -> float:
    """Natural log of the product-measure mass of the cylinder ``[w_1..w_n]``."""
    w = _symbols(word)
    n = layout.n
    if w.size != n:
        raise ValueError(f"word length {w.size} does not match layout n={n}")
    if n == 0:
        return 0.0
    q = layout.q
    k = np.arange(1, n + 1)
    starts = k[k % q != 0]
    steps = k[k % q == 0]
    total = math.fsum(np.log(kernel.initial)[w[starts - 1]])
    total += math.fsum(np.log(kernel.transitions)[w[steps // q - 1], w[steps - 1]])
    return total


def local_dimension_estimate(spec: SystemSpec, kernel: MarkovKernel, word) -> float:
    """``log P(C_n(w)) / log |pi(C_n(w))|`` for the cylinder of ``word``."""
    w = _symbols(word)
    if w.size == 0:
        raise ValueError("empty word")
    layout = chain_layout_cached(w.size, spec.q)
    log_len = -math.fsum(spec.lambdas[w])
    return cylinder_measure(kernel, layout, w) / log_len


@lru_cache(maxsize=8)
def chain_layout_cached(n: int, q: int) -> ChainLayout:
    return chain_layout(n, q)


def predicted_local_dimension(spec: SystemSpec, kernel: MarkovKernel, Pn: float, tol: float = SERIES_TOL) -> float:
    """Almost-sure local dimension of the product measure at ``(s, r)``.

    ``-r/q + (Pn - s*Phi) / (q*Lambda)`` with ``Phi``, ``Lambda`` the
    expected multiple average and Lyapunov exponent.  At a critical point
    ``Pn = alpha*s`` and ``Phi = alpha`` so the correction vanishes.
    """
    s, r = kernel.s, kernel.r
    Phi = expected_phi(kernel, spec, tol)
    Lam = expected_lyapunov(kernel, spec, tol)
    return -r / spec.q + (Pn - s * Phi) / (spec.q * Lam)


def paper_local_dimension(spec: SystemSpec, kernel: MarkovKernel, P: float, dP_ds: float, tol: float = SERIES_TOL) -> float:
    """``r/(q log m) + (P - s*dP/ds) / Lambda`` with the unnormalized pressure.

    Reported next to :func:`predicted_local_dimension` for comparison; the
    two disagree in general.
    """
    Lam = expected_lyapunov(kernel, spec, tol)
    return kernel.r / (spec.q * math.log(spec.m)) + (P - kernel.s * dP_ds) / Lam
