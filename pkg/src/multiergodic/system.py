"""Linear cookie-cutter systems: validation, coding map and reference dimension."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "SpecError",
    "SystemSpec",
    "validate_spec",
    "derive_lambdas",
    "synthesize_intervals",
    "code_point",
    "log_cylinder_length",
    "bowen_dimension",
]

LAMBDA_CONSISTENCY = 1e-12


class SpecError(ValueError):
    """Raised when a system description violates one or more constraints.

    ``errors`` holds every violated constraint, not just the first one.
    """

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class SystemSpec:
    m: int
    q: int
    intervals: np.ndarray  # (m, 2), rows [u_i, v_i]
    lambdas: np.ndarray  # (m,), natural log of the branch slopes
    phi: np.ndarray  # (m, m), phi[i, j] = value on I_i x I_j
    ell: int = field(default=2)

    @property
    def phi_range(self) -> tuple[float, float]:
        return float(self.phi.min()), float(self.phi.max())

    @property
    def phi_is_constant(self) -> bool:
        return bool(np.all(self.phi == self.phi.flat[0]))

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "q": self.q,
            "ell": self.ell,
            "intervals": self.intervals.tolist(),
            "lambdas": self.lambdas.tolist(),
            "phi": self.phi.tolist(),
        }


def derive_lambdas(intervals) -> np.ndarray:
    """Lyapunov exponents ``-log|I_i|`` of the linear branches."""
    iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
    lengths = iv[:, 1] - iv[:, 0]
    if np.any(lengths <= 0):
        raise SpecError(["zero-length interval"])
    return -np.log(lengths)


def synthesize_intervals(lambdas) -> np.ndarray:
    """Lay out intervals of length ``exp(-lambda_i)`` left to right.

    The leftover length is split into equal gaps between consecutive
    intervals, so the first interval starts at 0 and the last ends at 1.
    """
    lam = np.asarray(lambdas, dtype=float)
    lengths = np.exp(-lam)
    m = len(lam)
    gap = (1.0 - lengths.sum()) / (m - 1) if m > 1 else 0.0
    out = np.empty((m, 2))
    left = 0.0
    for i, length in enumerate(lengths):
        out[i] = (left, left + length)
        left += length + gap
    if m > 1:
        out[-1, 1] = 1.0
        out[-1, 0] = 1.0 - lengths[-1]
    return out


def validate_spec(raw: Mapping[str, Any] | SystemSpec) -> SystemSpec:
    """Normalize a raw system description into a :class:`SystemSpec`.

    ``raw`` needs ``phi`` and either ``intervals`` or ``lambdas``; ``m`` is
    inferred from ``phi`` when absent and ``q`` defaults to 2.  All problems
    are collected and raised together as a :class:`SpecError`.
    """
    if isinstance(raw, SystemSpec):
        raw = raw.to_dict()
    errors: list[str] = []

    ell = raw.get("ell", 2)
    if ell != 2:
        errors.append(f"unsupported arity: ell={ell} (only ell=2 is implemented)")

    q = raw.get("q", 2)
    if not isinstance(q, (int, np.integer)) or isinstance(q, bool):
        if isinstance(q, float) and q.is_integer():
            q = int(q)
        else:
            errors.append(f"q must be an integer, got {q!r}")
            q = 2
    if q < 2:
        errors.append(f"q must be >= 2, got {q}")

    if "phi" not in raw:
        raise SpecError(errors + ["missing phi table"])
    try:
        phi = np.asarray(raw["phi"], dtype=float)
    except (TypeError, ValueError):
        raise SpecError(errors + ["phi must be a numeric m x m table"])
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise SpecError(errors + [f"phi must be square, got shape {phi.shape}"])
    if not np.all(np.isfinite(phi)):
        errors.append("non-finite phi entries")

    m = int(raw.get("m", phi.shape[0]))
    if m < 2:
        errors.append(f"m must be >= 2, got {m}")
    if phi.shape[0] != m:
        errors.append(f"phi is {phi.shape[0]}x{phi.shape[1]} but m={m}")

    intervals = raw.get("intervals")
    lambdas = raw.get("lambdas")
    if intervals is None and lambdas is None:
        raise SpecError(errors + ["need intervals or lambdas"])

    if intervals is None:
        lam = np.asarray(lambdas, dtype=float)
        if lam.shape != (m,):
            raise SpecError(errors + [f"expected {m} lambdas, got shape {lam.shape}"])
        if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
            errors.append("nonpositive lambda")
        elif np.exp(-lam).sum() > 1 + 1e-15:
            errors.append("total length > 1")
        if errors:
            raise SpecError(errors)
        iv = synthesize_intervals(lam)
    else:
        iv = np.asarray(intervals, dtype=float)
        if iv.shape != (m, 2):
            raise SpecError(errors + [f"expected {m} intervals [u, v], got shape {iv.shape}"])
        lengths = iv[:, 1] - iv[:, 0]
        if np.any(iv < 0) or np.any(iv > 1):
            errors.append("intervals must lie in [0, 1]")
        if np.any(lengths <= 0):
            errors.append("nonpositive lambda: interval of length >= 1 or <= 0")
        elif np.any(lengths >= 1):
            errors.append("nonpositive lambda: interval of length >= 1 or <= 0")
        for i in range(m - 1):
            if iv[i + 1, 0] < iv[i, 0]:
                errors.append(f"intervals not ordered left-to-right at index {i + 1}")
            elif iv[i + 1, 0] < iv[i, 1]:
                errors.append(f"overlapping interiors: I_{i} and I_{i + 1}")
        if lengths.sum() > 1 + 1e-15:
            errors.append("total length > 1")
        if errors:
            raise SpecError(errors)
        lam = derive_lambdas(iv)
        if lambdas is not None:
            given = np.asarray(lambdas, dtype=float)
            if given.shape != lam.shape or np.max(np.abs(given - lam)) > LAMBDA_CONSISTENCY:
                raise SpecError(["lambdas inconsistent with intervals"])

    if errors:
        raise SpecError(errors)
    iv.setflags(write=False)
    lam.setflags(write=False)
    phi.setflags(write=False)
    return SystemSpec(m=m, q=int(q), intervals=iv, lambdas=lam, phi=phi, ell=2)


def _check_word(spec: SystemSpec, word) -> np.ndarray:
    w = np.asarray([int(c) for c in word] if isinstance(word, str) else word, dtype=np.int64)
    if w.size and (w.min() < 0 or w.max() >= spec.m):
        raise ValueError(f"symbol out of range 0..{spec.m - 1}")
    return w


def code_point(spec: SystemSpec, prefix) -> tuple[tuple[float, float], float]:
    """Interval ``f_{w_1} o ... o f_{w_n}([0, 1])`` and its length.

    Every infinite word extending ``prefix`` is coded into this interval.
    ``prefix`` may be a digit string such as ``"10"`` or a sequence of ints.
    """
    w = _check_word(spec, prefix)
    left, scale = 0.0, 1.0
    for sym in w:
        u, v = spec.intervals[sym]
        left += scale * u
        scale *= v - u
    return (left, left + scale), scale


def log_cylinder_length(spec: SystemSpec, word) -> float:
    """``log |pi(C_n(w))| = -sum_k lambda_{w_k}``, safe for long words."""
    w = _check_word(spec, word)
    return -float(spec.lambdas[w].sum())


def bowen_dimension(lambdas) -> float:
    """Root ``d`` of ``sum_i exp(-d * lambda_i) = 1``."""
    lam = np.asarray(lambdas, dtype=float)
    if lam.size < 2 or np.any(lam <= 0):
        raise ValueError("need at least two positive exponents")

    def f(d):
        return math.fsum(np.exp(-d * lam)) - 1.0

    # the root equals log(m)/min(lambda) when all exponents coincide; pad the bracket
    hi = math.log(lam.size) / lam.min() * (1 + 1e-9)
    d = brentq(f, 0.0, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps)
    # brentq stops on the bracket width; a couple of Newton steps pin the residual
    for _ in range(3):
        fd = f(d)
        if abs(fd) < 1e-15:
            break
        d += fd / math.fsum(lam * np.exp(-d * lam))
    return float(d)
