"""Critical system ``Pn(s, r) = alpha*s``, ``dPn/ds(s, r) = alpha`` and the spectrum.

The dimension reported at level ``alpha`` is ``-r(alpha)/q``.  The value
``r(alpha)/(q log m)`` is carried along as ``paper_dim`` for comparison only.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .pressure import gradient_from_solution, pressure_gradient
from .system import SystemSpec, bowen_dimension
from .transfer import TransferError, solve_transfer

__all__ = [
    "SpectrumPoint",
    "SupportEstimate",
    "alpha_star",
    "solve_critical",
    "spectrum_curve",
    "estimate_support",
    "solve_pressure_level",
    "constraint_curve",
    "minimize_constraint_curve",
]

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
DIVERGENCE_NORM = 1e3
JACOBIAN_STEP = 1e-6
SUPPORT_TOL = 1e-4


@dataclass(frozen=True)
class SpectrumPoint:
    alpha: float
    s: float
    r: float
    dim: float
    paper_dim: float
    converged: bool
    newton_residual: float
    iterations: int = 0

    @classmethod
    def failed(cls, alpha: float, residual: float = math.inf, iterations: int = 0) -> "SpectrumPoint":
        nan = math.nan
        return cls(alpha, nan, nan, nan, nan, False, residual, iterations)


@dataclass(frozen=True)
class SupportEstimate:
    A: float
    B: float
    rA: float
    rB: float
    alpha_star: float
    achieved_alphas: list = field(default_factory=list)
    approximate: bool = True


def _point(spec: SystemSpec, alpha, s, r, converged, res, its) -> SpectrumPoint:
    r = float(r)
    return SpectrumPoint(
        alpha=float(alpha),
        s=float(s),
        r=float(r),
        dim=-r / spec.q,
        paper_dim=r / (spec.q * math.log(spec.m)),
        converged=bool(converged),
        newton_residual=float(res),
        iterations=its,
    )


def _pn_and_grad(spec: SystemSpec, s: float, r: float):
    sol = solve_transfer(spec, s, r)
    Pn = (spec.q - 1) * sol.log_total
    gs, gr = gradient_from_solution(spec, sol)
    return Pn, gs, gr


def solve_pressure_level(spec: SystemSpec, s: float, level: float) -> float:
    """The unique ``r`` with ``Pn(s, r) = level``.

    ``Pn`` is strictly increasing in ``r`` with slope between ``min lambda``
    and ``max lambda``, so a bracket follows from one evaluation.
    """
    def f(r):
        Pn, _, _ = _pn_and_grad(spec, s, r)
        return Pn - level

    f0 = f(0.0)
    lo_slope = float(spec.lambdas.min())
    width = abs(f0) / lo_slope + 1.0
    a, b = (-width, 0.0) if f0 > 0 else (0.0, width)
    r = brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    for _ in range(3):
        Pn, _, gr = _pn_and_grad(spec, s, r)
        if abs(Pn - level) < 1e-15 * (1 + abs(level)):
            break
        r -= (Pn - level) / gr
    return float(r)


def alpha_star(spec: SystemSpec) -> tuple[float, float, float]:
    """Peak of the spectrum: the ``s = 0`` solution of the critical system.

    Returns ``(alpha_star, r0, dim0)`` with ``Pn(0, r0) = 0`` and
    ``alpha_star = dPn/ds(0, r0)``.
    """
    r0 = solve_pressure_level(spec, 0.0, 0.0)
    if spec.phi_is_constant:
        return float(spec.phi[0, 0]), r0, -r0 / spec.q
    gs, _ = pressure_gradient(spec, 0.0, r0)
    return float(gs), r0, -r0 / spec.q


def _residual_vec(Pn, gs, alpha, s):
    return np.array([Pn - alpha * s, gs - alpha])


def _jacobian(spec: SystemSpec, s, r, gs, gr, alpha, h=JACOBIAN_STEP):
    gs_s, _ = pressure_gradient(spec, s + h, r)
    gs_r, _ = pressure_gradient(spec, s, r + h)
    return np.array([[gs - alpha, gr], [(gs_s - gs) / h, (gs_r - gs) / h]])


def _newton(spec: SystemSpec, alpha: float, s: float, r: float, max_iter: int = 60):
    """Damped 2D Newton.  Returns ``(s, r, converged, residual, iterations)``."""
    try:
        Pn, gs, gr = _pn_and_grad(spec, s, r)
    except TransferError:
        return s, r, False, math.inf, 0
    G = _residual_vec(Pn, gs, alpha, s)
    res = float(np.abs(G).max())
    for it in range(1, max_iter + 1):
        if res < NEWTON_TOL:
            return s, r, True, res, it - 1
        try:
            J = _jacobian(spec, s, r, gs, gr, alpha)
            step = np.linalg.solve(J, -G)
        except (np.linalg.LinAlgError, TransferError):
            return s, r, False, res, it
        if not np.all(np.isfinite(step)):
            return s, r, False, res, it
        lam = 1.0
        while lam > 1e-6:
            s_new, r_new = s + lam * step[0], r + lam * step[1]
            if math.hypot(s_new, r_new) > DIVERGENCE_NORM:
                lam *= 0.5
                continue
            try:
                Pn_n, gs_n, gr_n = _pn_and_grad(spec, s_new, r_new)
            except TransferError:
                lam *= 0.5
                continue
            G_n = _residual_vec(Pn_n, gs_n, alpha, s_new)
            res_n = float(np.abs(G_n).max())
            if res_n < res or res_n < NEWTON_TOL:
                break
            lam *= 0.5
        else:
            return s, r, False, res, it
        s, r, Pn, gs, gr, G, res = s_new, r_new, Pn_n, gs_n, gr_n, G_n, res_n
    return s, r, res < NEWTON_TOL, res, max_iter


def _constant_phi_point(spec: SystemSpec, alpha: float) -> SpectrumPoint:
    c = spec.phi_range[0]
    a_star, r0, _ = alpha_star(spec)
    if abs(alpha - c) <= 1e-12:
        return _point(spec, alpha, 0.0, r0, True, abs(a_star - alpha), 0)
    return SpectrumPoint.failed(alpha)


def solve_critical(spec: SystemSpec, alpha: float, s0: float | None = None, r0: float | None = None) -> SpectrumPoint:
    """Solve the critical system at ``alpha`` by damped Newton.

    The first Jacobian row is exact; the second is a forward difference of
    the exact ``dPn/ds``.  Without a seed the peak solution ``(0, r0)`` is
    used.  Levels outside the support come back with ``converged=False``.
    """
    if spec.phi_is_constant:
        return _constant_phi_point(spec, alpha)
    lo, hi = spec.phi_range
    if not lo < alpha < hi:
        return SpectrumPoint.failed(alpha)
    if s0 is None or r0 is None:
        _, r_peak, _ = alpha_star(spec)
        s0, r0 = 0.0, r_peak
    s, r, ok, res, its = _newton(spec, alpha, s0, r0)
    if not ok:
        return SpectrumPoint.failed(alpha, res, its)
    return _point(spec, alpha, s, r, True, res, its)


def _tangent(spec: SystemSpec, p: SpectrumPoint) -> np.ndarray:
    """``d(s, r)/d alpha`` along the solution branch."""
    Pn, gs, gr = _pn_and_grad(spec, p.s, p.r)
    J = _jacobian(spec, p.s, p.r, gs, gr, p.alpha)
    return np.linalg.solve(J, np.array([p.s, 1.0]))


def _walk(spec: SystemSpec, start: SpectrumPoint, target: float, min_step: float) -> SpectrumPoint:
    """Continue a converged point to ``target``, halving steps on failure.

    Returns the point at ``target`` or, on failure, the last converged point
    reached (whose ``alpha`` differs from ``target``).
    """
    cur = start
    h = target - cur.alpha
    while cur.alpha != target:
        remaining = target - cur.alpha
        if abs(h) > abs(remaining):
            h = remaining
        nxt = cur.alpha + h if abs(remaining - h) > 1e-15 else target
        try:
            ds, dr = _tangent(spec, cur) * (nxt - cur.alpha)
        except (np.linalg.LinAlgError, TransferError):
            ds = dr = 0.0
        p = solve_critical(spec, nxt, cur.s + ds, cur.r + dr)
        if not p.converged:
            p = solve_critical(spec, nxt, cur.s, cur.r)
        if p.converged:
            cur = p
            h *= 2.0
        else:
            h *= 0.5
            if abs(h) < min_step:
                return cur
    return cur


def _peak_point(spec: SystemSpec) -> SpectrumPoint:
    a, r0, _ = alpha_star(spec)
    return _point(spec, a, 0.0, r0, True, 0.0, 0)


def spectrum_curve(spec: SystemSpec, alpha_grid, min_step: float = SUPPORT_TOL) -> list[SpectrumPoint]:
    """Spectrum on a sorted grid by continuation outward from the peak.

    Once continuation fails in one direction every further level on that
    side is reported unconverged.
    """
    grid = np.asarray(alpha_grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("alpha grid must be sorted")
    out: list[SpectrumPoint | None] = [None] * len(grid)
    if spec.phi_is_constant:
        return [_constant_phi_point(spec, a) for a in grid]

    peak = _peak_point(spec)
    right = [i for i, a in enumerate(grid) if a >= peak.alpha]
    left = [i for i, a in enumerate(grid) if a < peak.alpha][::-1]
    for order in (right, left):
        cur, dead = peak, False
        for i in order:
            a = float(grid[i])
            if dead:
                out[i] = SpectrumPoint.failed(a)
                continue
            if a == peak.alpha:
                out[i] = peak
                continue
            p = _walk(spec, cur, a, min_step)
            if p.alpha == a:
                out[i] = p
                cur = p
            else:
                out[i] = SpectrumPoint.failed(a)
                dead = True
    return out


def estimate_support(spec: SystemSpec, tol: float = SUPPORT_TOL) -> SupportEstimate:
    """Endpoints ``A <= B`` of the spectrum by continuation to divergence.

    Each side walks from the peak with doubling steps, halving on Newton
    failure, until the step is below ``tol``.  The endpoint is the last
    converged level pushed out by that final bracket and clamped to the
    range of ``phi``.
    """
    lo, hi = spec.phi_range
    a_star, r0, _ = alpha_star(spec)
    if spec.phi_is_constant:
        return SupportEstimate(A=lo, B=hi, rA=r0, rB=r0, alpha_star=a_star, achieved_alphas=[a_star, a_star])

    peak = _peak_point(spec)
    ends = []
    for direction, bound in ((-1.0, lo), (1.0, hi)):
        cur = peak
        h = (hi - lo) / 20.0
        while h >= tol:
            nxt = cur.alpha + direction * h
            if not lo < nxt < hi:
                h *= 0.5
                continue
            try:
                ds, dr = _tangent(spec, cur) * (nxt - cur.alpha)
            except (np.linalg.LinAlgError, TransferError):
                ds = dr = 0.0
            p = solve_critical(spec, nxt, cur.s + ds, cur.r + dr)
            if p.converged:
                cur = p
                h *= 2.0
            else:
                h *= 0.5
        edge = cur.alpha + direction * h
        edge = min(max(edge, lo), hi)
        ends.append((edge, cur))
    (A, pa), (B, pb) = ends
    A, B = min(A, a_star), max(B, a_star)
    log.debug("support estimate [%g, %g] from levels %g, %g", A, B, pa.alpha, pb.alpha)
    return SupportEstimate(A=A, B=B, rA=pa.r, rB=pb.r, alpha_star=a_star, achieved_alphas=[pa.alpha, pb.alpha])


def constraint_curve(spec: SystemSpec, alpha: float, s_values) -> np.ndarray:
    """``r(s)`` solving ``Pn(s, r) = alpha*s`` pointwise.

    Every ``(s, r(s))`` gives the upper bound ``-r(s)/q`` on the dimension at
    ``alpha``; its minimum over ``s`` is attained at the critical solution.
    """
    return np.array([solve_pressure_level(spec, float(s), alpha * float(s)) for s in np.atleast_1d(s_values)])


def minimize_constraint_curve(spec: SystemSpec, alpha: float, bracket=(-20.0, 20.0)) -> tuple[float, float]:
    """Minimize ``-r(s)/q`` along the constraint curve.

    Independent of the Newton solver: uses only the pressure level sets.
    Returns ``(s_min, min value)``.
    """
    def f(s):
        return -solve_pressure_level(spec, s, alpha * s) / spec.q

    res = minimize_scalar(f, bounds=bracket, method="bounded", options={"xatol": 1e-10})
    return float(res.x), float(res.fun)


def peak_dimension_matches_bowen(spec: SystemSpec) -> float:
    """Absolute gap between the peak dimension and the similarity dimension."""
    return abs(alpha_star(spec)[2] - bowen_dimension(spec.lambdas))
