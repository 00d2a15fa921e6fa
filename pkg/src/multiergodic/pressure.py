"""Pressure ``log sum_j t_j(s, r)``, its (q-1)-normalized variant and derivatives."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .system import SystemSpec
from .transfer import TransferSolution, solve_transfer, transition_kernel

__all__ = [
    "PressurePoint",
    "pressure",
    "pressure_gradient",
    "pressure_hessian",
    "pressure_point",
    "finite_difference_gradient",
    "gradient_from_solution",
]

HESSIAN_STEP = 1e-4


@dataclass(frozen=True)
class PressurePoint:
    s: float
    r: float
    P: float
    Pn: float
    dPn_ds: float | None = None
    dPn_dr: float | None = None
    hessian: np.ndarray | None = None


def pressure(spec: SystemSpec, s: float, r: float, tol: float | None = None) -> PressurePoint:
    """``P = log sum t_j`` and ``Pn = (q-1) P`` at ``(s, r)``."""
    P = solve_transfer(spec, s, r, tol).log_total
    return PressurePoint(s=float(s), r=float(r), P=P, Pn=(spec.q - 1) * P)


def gradient_from_solution(spec: SystemSpec, sol: TransferSolution) -> tuple[float, float]:
    """Exact ``(dPn/ds, dPn/dr)`` by implicit differentiation.

    Differentiating ``q u_i = logsumexp_j(A_ij + u_j)`` gives
    ``(q I - P) du = b`` with ``b_s = sum_j P_ij phi_ij`` and ``b_r = lambda``;
    then ``dP = <initial law, du>``.
    """
    kernel = transition_kernel(spec, sol)
    P = kernel.transitions
    rhs = np.column_stack([(P * spec.phi).sum(axis=1), spec.lambdas])
    du = np.linalg.solve(spec.q * np.eye(spec.m) - P, rhs)
    grad = (spec.q - 1) * (kernel.initial @ du)
    if not np.all(np.isfinite(grad)):
        raise np.linalg.LinAlgError(f"singular derivative system at s={sol.s}, r={sol.r}")
    return float(grad[0]), float(grad[1])


def pressure_gradient(spec: SystemSpec, s: float, r: float, tol: float | None = None) -> tuple[float, float]:
    return gradient_from_solution(spec, solve_transfer(spec, s, r, tol))


def finite_difference_gradient(spec: SystemSpec, s: float, r: float, step: float = 1e-5) -> tuple[float, float]:
    """Central differences of ``Pn``; an independent check on the implicit gradient."""
    def Pn(a, b):
        return pressure(spec, a, b).Pn

    gs = (Pn(s + step, r) - Pn(s - step, r)) / (2 * step)
    gr = (Pn(s, r + step) - Pn(s, r - step)) / (2 * step)
    return gs, gr


def pressure_hessian(spec: SystemSpec, s: float, r: float, step: float = HESSIAN_STEP) -> np.ndarray:
    """Central differences of the exact gradient.

    Rows are the derivatives of ``(dPn/ds, dPn/dr)``; the matrix is not
    symmetrized, so its asymmetry measures the differencing error.
    """
    gs_p = pressure_gradient(spec, s + step, r)
    gs_m = pressure_gradient(spec, s - step, r)
    gr_p = pressure_gradient(spec, s, r + step)
    gr_m = pressure_gradient(spec, s, r - step)
    d_ds = (np.array(gs_p) - np.array(gs_m)) / (2 * step)
    d_dr = (np.array(gr_p) - np.array(gr_m)) / (2 * step)
    # H[a, b] = d^2 Pn / (da db), a, b in (s, r)
    return np.array([[d_ds[0], d_dr[0]], [d_ds[1], d_dr[1]]])


def pressure_point(spec: SystemSpec, s: float, r: float, *, hessian: bool = False) -> PressurePoint:
    """Pressure, normalized pressure, exact gradient and optionally the Hessian."""
    sol = solve_transfer(spec, s, r)
    P = sol.log_total
    gs, gr = gradient_from_solution(spec, sol)
    H = pressure_hessian(spec, s, r) if hessian else None
    return PressurePoint(s=float(s), r=float(r), P=P, Pn=(spec.q - 1) * P, dPn_ds=gs, dPn_dr=gr, hessian=H)
