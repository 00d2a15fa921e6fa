"""Positive solutions of the nonlinear transfer system and their Markov kernels.

The system is ``t_i**q = sum_j exp(s*phi[i, j] + r*lambda_i) * t_j``.  Everything
is done in log coordinates ``u = log t`` so that large ``|s|`` and ``|r|`` do not
overflow; there the equation reads ``q*u_i = logsumexp_j(A_ij + u_j)`` with
``A_ij = s*phi[i, j] + r*lambda_i``.
"""
from __future__ import annotations

import contextvars
import logging
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .system import SystemSpec

__all__ = [
    "TransferError",
    "TransferSolution",
    "MarkovKernel",
    "log_weights",
    "solve_transfer",
    "residual",
    "transition_kernel",
    "solver_settings",
]

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-13
DEFAULT_MAX_ITER = 10_000
_EPS = np.finfo(float).eps

_settings = contextvars.ContextVar("transfer_solver_settings", default=(DEFAULT_TOL, DEFAULT_MAX_ITER))


@contextmanager
def solver_settings(tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Scope the default tolerance and iteration cap of :func:`solve_transfer`."""
    if not tol > 0 or max_iter < 1:
        raise ValueError("need tol > 0 and max_iter >= 1")
    token = _settings.set((float(tol), int(max_iter)))
    try:
        yield
    finally:
        _settings.reset(token)


class TransferError(RuntimeError):
    """The fixed-point and Newton stages both failed to reach the tolerance."""


@dataclass(frozen=True)
class TransferSolution:
    """Solution at ``(s, r)``.  ``log_t`` is authoritative; ``t`` may overflow
    to ``inf`` for extreme parameters."""

    s: float
    r: float
    t: np.ndarray
    residual: float
    iterations: int
    log_t: np.ndarray

    @property
    def log_total(self) -> float:
        """``log sum_j t_j`` computed from ``log_t``; finite even when ``t`` overflows."""
        mx = self.log_t.max()
        return float(mx + np.log(np.exp(self.log_t - mx).sum()))


@dataclass(frozen=True)
class MarkovKernel:
    initial: np.ndarray
    transitions: np.ndarray
    s: float = float("nan")
    r: float = float("nan")

    @property
    def m(self) -> int:
        return self.initial.size

    @property
    def log_initial(self) -> np.ndarray:
        return np.log(self.initial)

    @property
    def log_transitions(self) -> np.ndarray:
        return np.log(self.transitions)


def log_weights(spec: SystemSpec, s: float, r: float) -> np.ndarray:
    """``A_ij = s*phi[i, j] + r*lambda_i``."""
    with np.errstate(over="ignore", invalid="ignore"):
        return s * spec.phi + r * spec.lambdas[:, None]


def _lse_rows(x: np.ndarray) -> np.ndarray:
    mx = x.max(axis=1)
    return mx + np.log(np.exp(x - mx[:, None]).sum(axis=1))


def _defect(A: np.ndarray, u: np.ndarray, q: int) -> np.ndarray:
    """``log(S_i / t_i**q)`` where ``S_i`` is the right-hand side."""
    return _lse_rows(A + u[None, :]) - q * u


def _scaled_residual(F: np.ndarray, u: np.ndarray, q: int) -> float:
    # |t^q - S| / max(1, t^q) == |expm1(F)| * min(1, t^q)
    with np.errstate(over="ignore", invalid="ignore"):
        v = np.abs(np.expm1(F)) * np.exp(np.minimum(q * u, 0.0))
    return float(np.max(np.where(np.isnan(v), np.inf, v)))


def residual(spec: SystemSpec, t, s: float, r: float) -> float:
    """Defect ``max_i |t_i**q - S_i| / max(1, t_i**q)`` of a candidate vector.

    The scaling leaves O(1) values untouched and turns the absolute defect
    into a relative one when ``t_i**q`` is large, where float64 cannot
    resolve absolute differences of 1e-13.
    """
    t = np.asarray(t, dtype=float)
    if t.shape != (spec.m,):
        raise ValueError(f"expected {spec.m} components, got shape {t.shape}")
    if np.any(~(t > 0)):
        raise ValueError("transfer vector must be strictly positive")
    u = np.log(t)
    F = _defect(log_weights(spec, s, r), u, spec.q)
    return _scaled_residual(F, u, spec.q)


def solve_transfer(
    spec: SystemSpec,
    s: float,
    r: float,
    tol: float | None = None,
    *,
    max_iter: int | None = None,
    t0=None,
) -> TransferSolution:
    """Unique positive solution of the transfer system at ``(s, r)``.

    Runs the order-preserving iteration ``u <- logsumexp(A + u) / q``, which
    contracts the sup-norm of ``u`` differences by ``1/q``, then finishes
    with Newton steps on ``q*u - logsumexp(A + u)``, whose Jacobian is
    ``q*I - P`` (``P`` the row-stochastic transition matrix, so the
    Jacobian is invertible for ``q >= 2``).

    ``tol`` and ``max_iter`` default to the values set by
    :func:`solver_settings` (1e-13 and 10**4).

    Raises
    ------
    TransferError
        If the residual is still above ``tol`` after ``max_iter`` iterations.
    """
    default_tol, default_iter = _settings.get()
    tol = default_tol if tol is None else tol
    max_iter = default_iter if max_iter is None else max_iter
    if tol <= 0:
        raise ValueError("tol must be positive")
    q = spec.q
    A = log_weights(spec, s, r)
    if not np.all(np.isfinite(A)):
        raise TransferError(f"non-finite weights at s={s}, r={r}")

    if t0 is None:
        u = np.zeros(spec.m)
    else:
        t0 = np.asarray(t0, dtype=float)
        if np.any(~(t0 > 0)):
            raise ValueError("initial vector must be strictly positive")
        u = np.log(t0)

    step_tol = max(tol * 1e-2, 64 * _EPS * (1.0 + np.abs(u).max()))
    iterations = 0
    prev_step = np.inf
    while iterations < max_iter:
        new = _lse_rows(A + u[None, :]) / q
        step = np.abs(new - u).max()
        u = new
        iterations += 1
        if step < step_tol or (step >= prev_step and step < 1e-8):
            break
        prev_step = step
        step_tol = max(tol * 1e-2, 64 * _EPS * (1.0 + np.abs(u).max()))

    eye_q = q * np.eye(spec.m)
    F = _defect(A, u, q)
    res = _scaled_residual(F, u, q)
    for _ in range(8):
        # the log defect is the relative error; res alone is blind when t is tiny
        if np.abs(F).max() <= 4 * _EPS * (1.0 + np.abs(u).max()):
            break
        W = np.exp(A + u[None, :] - _lse_rows(A + u[None, :])[:, None])
        # d/du of (lse - q u) is W - qI
        delta = np.linalg.solve(eye_q - W, F)
        u_new = u + delta
        F_new = _defect(A, u_new, q)
        res_new = _scaled_residual(F_new, u_new, q)
        iterations += 1
        if res_new > res and np.abs(F_new).max() >= np.abs(F).max():
            break
        u, F, res = u_new, F_new, res_new

    t_lin = None
    if np.abs(A).max() < 300 and np.abs(u).max() < 300 / q:
        # One Newton step on t**q - M t in linear coordinates: resolves t to its
        # own ulp rather than the ulp of log t, so distinct starts agree.
        M = np.exp(A)
        t = np.exp(u)
        G = t**q - M @ t
        J = q * np.diag(t ** (q - 1)) - M
        t_new = t - np.linalg.solve(J, G)
        if np.all(t_new > 0):
            u_new = np.log(t_new)
            F_new = _defect(A, u_new, q)
            res_new = _scaled_residual(F_new, u_new, q)
            f_cap = max(np.abs(F).max(), 4 * _EPS * (1.0 + np.abs(u).max()))
            if res_new <= tol and np.abs(F_new).max() <= f_cap:
                u, F, res = u_new, F_new, res_new
                t_lin = t_new
                iterations += 1

    if not res <= tol:
        log.debug("transfer solve failed at s=%g r=%g: residual %g", s, r, res)
        raise TransferError(
            f"transfer system did not converge at s={s}, r={r}: "
            f"residual {res:.3e} > tol {tol:.1e} after {iterations} iterations"
        )
    u.setflags(write=False)
    if t_lin is None:
        with np.errstate(over="ignore"):
            t = np.exp(u)
    else:
        t = t_lin
    t.setflags(write=False)
    return TransferSolution(s=float(s), r=float(r), t=t, residual=res, iterations=iterations, log_t=u)


def transition_kernel(spec: SystemSpec, solution: TransferSolution) -> MarkovKernel:
    """Initial law ``t_i / sum t`` and transitions ``e^{A_ij} t_j / t_i**q``.

    The denominator is ``t_i**q``; with it the row sums equal
    ``S_i / t_i**q``, i.e. 1 up to the solver residual, for every ``q``.
    No renormalization is applied.
    """
    u = solution.log_t
    A = log_weights(spec, solution.s, solution.r)
    logp = A + u[None, :] - spec.q * u[:, None]
    P = np.exp(logp)
    init = np.exp(u - _lse_rows(u[None, :])[0])
    init.setflags(write=False)
    P.setflags(write=False)
    return MarkovKernel(initial=init, transitions=P, s=solution.s, r=solution.r)
