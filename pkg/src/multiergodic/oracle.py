"""Finite-depth covering counts for level sets, by enumeration or chain DP.

A word ``w`` of length ``n`` is admissible at ``(alpha, eps)`` when its
multiple average over the ``floor(n/q)`` complete pairs is within ``eps`` of
``alpha``.  The Moran estimate is the root ``d`` of
``sum_admissible exp(-d * sum_k lambda_{w_k}) = 1``.

Words are tallied by ``(phi-sum bin, lambda-sum bin)``.  The DP mode builds
one table per chain length and multiplies them together; chains are
independent because every pair ``(k, qk)`` lies inside one chain.  Counts are
exact integers in both modes, so on a lattice binning the modes agree
exactly.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
import numpy as np
from scipy.optimize import brentq

from .system import SystemSpec
from .telescopic import chain_layout, cylinder_measure
from .transfer import solve_transfer, transition_kernel

__all__ = [
    "OracleMemoryError",
    "CountTable",
    "Binning",
    "binning",
    "count_table",
    "level_set_count",
    "moran_dimension",
    "exhaustive_check",
]

EXHAUSTIVE_LIMIT = 1 << 22
CHECK_LIMIT = 10**6
MEMORY_LIMIT_BYTES = 1 << 30


class OracleMemoryError(MemoryError):
    def __init__(self, required_bytes: int):
        self.required_bytes = required_bytes
        super().__init__(
            f"count table needs about {required_bytes / 2**20:.1f} MiB "
            f"(limit {MEMORY_LIMIT_BYTES / 2**20:.0f} MiB); aborting"
        )


@dataclass(frozen=True)
class Binning:
    """Bins ``round((value - offset) / width)`` for per-term values."""

    width: float
    low: float  # minimum per-term value
    exact: bool  # per-term values sit on the lattice low + width * Z

    def index(self, values) -> np.ndarray:
        return np.rint((np.asarray(values, dtype=float) - self.low) / self.width).astype(np.int64)


def _lattice(values: np.ndarray, n_terms: int) -> Binning:
    v = np.unique(np.asarray(values, dtype=float).ravel())
    low = float(v[0])
    diffs = v[1:] - low
    if diffs.size == 0:
        return Binning(width=1.0, low=low, exact=True)
    base = float(diffs[0])
    denoms = []
    for d in diffs:
        ratio = Fraction(float(d / base)).limit_denominator(64)
        if abs(float(ratio) - d / base) > 1e-9:
            break
        denoms.append(ratio.denominator)
    else:
        return Binning(width=base / math.lcm(*denoms), low=low, exact=True)
    width = (float(v[-1]) - low) / (8 * max(n_terms, 1))
    return Binning(width=width, low=low, exact=False)


def binning(spec: SystemSpec, n: int) -> tuple[Binning, Binning]:
    """Binnings for phi-sums over ``floor(n/q)`` pairs and lambda-sums over ``n`` terms.

    Values that are rational multiples (denominator <= 64) of their smallest
    gap get an exact lattice; otherwise the width is ``range / (8n)``.
    """
    return _lattice(spec.phi, n // spec.q), _lattice(spec.lambdas, n)


@dataclass(frozen=True)
class CountTable:
    n: int
    n_pairs: int
    phi_bins: Binning
    lam_bins: Binning
    counts: dict  # (phi bin, lambda bin) -> int
    mode: str

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def phi_sum(self, i: int) -> float:
        return self.n_pairs * self.phi_bins.low + i * self.phi_bins.width

    def lam_sum(self, j: int) -> float:
        return self.n * self.lam_bins.low + j * self.lam_bins.width


def _enumerate(m: int, n: int) -> np.ndarray:
    if m**n > EXHAUSTIVE_LIMIT:
        raise ValueError(f"{m}^{n} words exceed the exhaustive limit {EXHAUSTIVE_LIMIT}")
    idx = np.arange(m**n, dtype=np.int64)
    # column k-1 holds w_k, most significant first
    powers = m ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] // powers[None, :]) % m).astype(np.int8)


def _exhaustive_table(spec: SystemSpec, n: int) -> CountTable:
    q = spec.q
    N = n // q
    pb, lb = binning(spec, n)
    words = _enumerate(spec.m, n)
    k = np.arange(1, N + 1)
    phi_sum = spec.phi[words[:, k - 1], words[:, q * k - 1]].sum(axis=1) if N else np.zeros(len(words))
    lam_sum = spec.lambdas[words].sum(axis=1)
    pi = np.rint((phi_sum - N * pb.low) / pb.width).astype(np.int64)
    li = np.rint((lam_sum - n * lb.low) / lb.width).astype(np.int64)
    counts = Counter(zip(pi.tolist(), li.tolist()))
    return CountTable(n=n, n_pairs=N, phi_bins=pb, lam_bins=lb, counts=dict(counts), mode="exhaustive")


def _chain_tables(spec: SystemSpec, max_len: int, pb: Binning, lb: Binning) -> dict[int, Counter]:
    """For each chain length ``L``: Counter over (phi bin, lambda bin) of its ``m**L`` fillings."""
    dphi = pb.index(spec.phi)
    dlam = lb.index(spec.lambdas)
    # state: last symbol -> Counter
    state = [Counter({(0, int(dlam[a])): 1}) for a in range(spec.m)]
    out = {}
    for L in range(1, max_len + 1):
        total = Counter()
        for c in state:
            total.update(c)
        out[L] = total
        if L == max_len:
            break
        new = [Counter() for _ in range(spec.m)]
        for a, c in enumerate(state):
            for b in range(spec.m):
                di, dj = int(dphi[a, b]), int(dlam[b])
                tgt = new[b]
                for (i, j), cnt in c.items():
                    tgt[(i + di, j + dj)] += cnt
        state = new
    return out


def _dp_table(spec: SystemSpec, n: int) -> CountTable:
    q = spec.q
    N = n // q
    pb, lb = binning(spec, n)
    layout = chain_layout(n, q)
    lengths = Counter(len(c) for c in layout.chains)
    if not lengths:
        return CountTable(n, N, pb, lb, {(0, 0): 1}, "dp")
    tables = _chain_tables(spec, max(lengths), pb, lb)

    # Kronecker substitution: (i, j) -> slot i * width_j + j, each slot holding
    # a nonnegative count below m**n.
    i_max = int(np.rint(N * (spec.phi.max() - pb.low) / pb.width))
    j_max = int(np.rint(n * (spec.lambdas.max() - lb.low) / lb.width))
    width_j = j_max + 1
    slots = (i_max + 1) * width_j
    slot_bytes = (math.ceil(n * math.log2(spec.m)) + 2 + 7) // 8
    required = slots * slot_bytes * 3
    if required > MEMORY_LIMIT_BYTES:
        raise OracleMemoryError(required)
    shift = 8 * slot_bytes

    product = gmpy2.mpz(1)
    for L, count in sorted(lengths.items()):
        packed = gmpy2.mpz(0)
        for (i, j), c in tables[L].items():
            packed += gmpy2.mpz(c) << (shift * (i * width_j + j))
        product *= packed**count

    raw = int(product).to_bytes(slots * slot_bytes, "little")
    counts = {}
    for slot in range(slots):
        chunk = raw[slot * slot_bytes:(slot + 1) * slot_bytes]
        if any(chunk):
            counts[divmod(slot, width_j)] = int.from_bytes(chunk, "little")
    return CountTable(n=n, n_pairs=N, phi_bins=pb, lam_bins=lb, counts=counts, mode="dp")


_TABLE_CACHE: dict = {}


def count_table(spec: SystemSpec, n: int, mode: str = "dp") -> CountTable:
    """Exact count table of all ``m**n`` words (cached per spec, ``n`` and mode)."""
    if mode not in ("dp", "exhaustive"):
        raise ValueError(f"unknown mode {mode!r}")
    if n < spec.q:
        raise ValueError(f"depth n={n} has no complete pair for q={spec.q}")
    key = (repr(spec.to_dict()), n, mode)
    if key not in _TABLE_CACHE:
        build = _dp_table if mode == "dp" else _exhaustive_table
        _TABLE_CACHE[key] = build(spec, n)
    return _TABLE_CACHE[key]


def _admissible(table: CountTable, alpha: float, eps: float) -> list[tuple[int, float]]:
    out = []
    for (i, j), c in table.counts.items():
        avg = table.phi_sum(i) / table.n_pairs
        if abs(avg - alpha) <= eps + 1e-12:
            out.append((c, table.lam_sum(j)))
    return out


def moran_dimension(weights: list[tuple[int, float]]) -> float:
    """Root of ``sum_c count * exp(-d * lam_sum) = 1`` over ``(count, lam_sum)`` pairs.

    The sum is strictly decreasing in ``d``; the root is bracketed by
    ``[0, log(total)/min lam_sum]`` and found by bisection to 1e-12.
    """
    if not weights:
        return math.nan
    logc = np.array([math.log(c) for c, _ in weights])
    lam = np.array([x for _, x in weights])

    def f(d):
        z = logc - d * lam
        mx = z.max()
        return mx + math.log(np.exp(z - mx).sum())

    if f(0.0) <= 0.0:
        return 0.0
    hi = f(0.0) / lam.min() + 1e-9
    return float(brentq(f, 0.0, hi, xtol=1e-12, rtol=1e-15, maxiter=500))


def level_set_count(spec: SystemSpec, n: int, alpha: float, eps: float, mode: str = "dp") -> tuple[int, float]:
    """Number of admissible length-``n`` words and their Moran dimension estimate."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    table = count_table(spec, n, mode)
    w = _admissible(table, alpha, eps)
    return sum(c for c, _ in w), moran_dimension(w)


def _finite_depth_means(spec: SystemSpec, kernel, N: int) -> tuple[float, float]:
    """Mean of ``E phi(w_k, w_qk)`` and ``E lambda_{w_k}`` over ``k = 1..N``."""
    if N == 0:
        return 0.0, 0.0
    q = spec.q
    b = (kernel.transitions * spec.phi).sum(axis=1)
    mu = np.array(kernel.initial, dtype=float)
    phi_total = lam_total = 0.0
    j = 0
    while q**j <= N:
        count = N // q**j - N // q ** (j + 1)
        phi_total += count * float(mu @ b)
        lam_total += count * float(mu @ spec.lambdas)
        mu = mu @ kernel.transitions
        j += 1
    return phi_total / N, lam_total / N


@dataclass(frozen=True)
class CheckRecord:
    n: int
    mass: float
    expected_log_measure: float
    model: float
    constant: float


def exhaustive_check(spec: SystemSpec, s: float, r: float, n: int) -> CheckRecord:
    """Exact mass and mean log-measure of all length-``n`` cylinders at ``(s, r)``.

    ``model = -n[(1 - 1/q) P - (s Phi_n + r Lambda_n)/q]`` where ``Phi_n`` and
    ``Lambda_n`` are the depth series restricted to the depths present in
    ``[1, floor(n/q)]``, weighted by their exact frequencies there;
    ``constant = |expected - model| / sqrt(n)``.
    """
    if spec.m**n > CHECK_LIMIT:
        raise ValueError(f"{spec.m}^{n} cylinders exceed the limit {CHECK_LIMIT}")
    sol = solve_transfer(spec, s, r)
    kernel = transition_kernel(spec, sol)
    P = sol.log_total
    if n == 0:
        return CheckRecord(0, 1.0, 0.0, 0.0, 0.0)
    layout = chain_layout(n, spec.q)
    words = _enumerate(spec.m, n)
    logs = np.array([cylinder_measure(kernel, layout, w) for w in words])
    probs = np.exp(logs)
    mass = math.fsum(probs)
    expected = math.fsum(probs * logs)
    q = spec.q
    Phi, Lam = _finite_depth_means(spec, kernel, n // q)
    model = -n * ((1 - 1 / q) * P - (s * Phi + r * Lam) / q)
    return CheckRecord(n, mass, expected, model, abs(expected - model) / math.sqrt(n))
