"""Sparse convex QP solver: ADMM with over-relaxation (operator splitting).

Solves  min 0.5 x'Px + q'x  s.t.  l <= Ax <= u,  with equalities encoded
as l_j = u_j. The splitting, over-relaxation, vectorized step size with
boosted equality rows, and periodic step-size adaptation follow the
standard operator-splitting QP scheme; the KKT system is factorized once
(sparse LU) and only refactorized when the step size changes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "QuadraticProgram",
    "SolverSettings",
    "QpSolution",
    "SolveStatus",
    "solve_qp",
    "kkt_residuals",
    "NonPsdError",
    "DimensionMismatchError",
]


class NonPsdError(ValueError):
    """Cost matrix failed the symmetry / curvature checks."""


class DimensionMismatchError(ValueError):
    """QP pieces have inconsistent shapes."""


class SolveStatus(enum.Enum):
    SOLVED = "solved"
    MAX_ITER = "max_iter"
    PRIMAL_INFEASIBLE = "primal_infeasible"


_CURVATURE_SAMPLES = 16


@dataclass(frozen=True)
class QuadraticProgram:
    """Problem data; matrices are converted to CSC on construction."""

    p_mat: sp.csc_matrix
    q: np.ndarray
    a_mat: sp.csc_matrix
    l: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        p_mat = sp.csc_matrix(self.p_mat)
        a_mat = sp.csc_matrix(self.a_mat)
        q = np.asarray(self.q, dtype=float).ravel()
        l = np.asarray(self.l, dtype=float).ravel()
        u = np.asarray(self.u, dtype=float).ravel()

        n = p_mat.shape[0]
        if p_mat.shape != (n, n):
            raise DimensionMismatchError(f"P must be square, got {p_mat.shape}")
        if q.shape != (n,):
            raise DimensionMismatchError(f"q has shape {q.shape}, expected ({n},)")
        m = a_mat.shape[0]
        if a_mat.shape[1] != n:
            raise DimensionMismatchError(f"A has {a_mat.shape[1]} columns, expected {n}")
        if l.shape != (m,) or u.shape != (m,):
            raise DimensionMismatchError(f"bounds have shapes {l.shape}/{u.shape}, expected ({m},)")
        if np.any(l > u):
            bad = int(np.argmax(l > u))
            raise ValueError(f"constraint {bad}: l={l[bad]} > u={u[bad]}")

        scale = max(1.0, abs(p_mat).max() if p_mat.nnz else 0.0)
        asym = abs(p_mat - p_mat.T).max() if p_mat.nnz else 0.0
        if asym > 1e-8 * scale:
            raise NonPsdError(f"P is not symmetric (max asymmetry {asym:.3e})")
        rng = np.random.default_rng(0)
        for _ in range(_CURVATURE_SAMPLES):
            v = rng.standard_normal(n)
            if v @ (p_mat @ v) < -1e-8 * scale * (v @ v):
                raise NonPsdError("P has a direction of negative curvature")

        object.__setattr__(self, "p_mat", p_mat)
        object.__setattr__(self, "a_mat", a_mat)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "u", u)

    @property
    def n(self) -> int:
        return self.p_mat.shape[0]

    @property
    def m(self) -> int:
        return self.a_mat.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ (self.p_mat @ x) + self.q @ x)


@dataclass(frozen=True)
class SolverSettings:
    eps_abs: float = 1e-4
    eps_rel: float = 1e-4
    max_iter: int = 400_000
    rho: float = 0.1
    sigma: float = 1e-6
    alpha_relax: float = 1.6
    check_interval: int = 25
    adapt_interval: int = 100
    adaptive_rho: bool = True
    eps_infeas: float = 1e-6

    def __post_init__(self):
        if self.eps_abs <= 0.0 or self.eps_rel <= 0.0:
            raise ValueError("tolerances must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class QpSolution:
    x: np.ndarray
    z_dual: np.ndarray
    status: SolveStatus
    objective: float
    r_prim: float
    r_dual: float
    iterations: int


def _norm_inf(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def _build_rho(qp: QuadraticProgram, rho_bar: float) -> np.ndarray:
    rho = np.full(qp.m, rho_bar)
    eq = np.isfinite(qp.l) & np.isfinite(qp.u) & (qp.u - qp.l < 1e-10)
    rho[eq] = rho_bar * 1e3
    return rho


def _factor_kkt(qp: QuadraticProgram, rho: np.ndarray, sigma: float):
    n, m = qp.n, qp.m
    top_left = qp.p_mat + sigma * sp.identity(n, format="csc")
    if m == 0:
        return spla.splu(top_left.tocsc())
    kkt = sp.bmat(
        [[top_left, qp.a_mat.T], [qp.a_mat, -sp.diags(1.0 / rho)]], format="csc"
    )
    return spla.splu(kkt)


def _check_primal_infeasible(qp: QuadraticProgram, dy: np.ndarray, eps: float) -> bool:
    norm_dy = _norm_inf(dy)
    if norm_dy <= 1e-14:
        return False
    dy = dy / norm_dy
    if _norm_inf(qp.a_mat.T @ dy) > eps:
        return False
    # support-function test; rows with an infinite bound must not push on it
    pos, neg = np.maximum(dy, 0.0), np.minimum(dy, 0.0)
    if np.any(pos[~np.isfinite(qp.u)] > eps) or np.any(-neg[~np.isfinite(qp.l)] > eps):
        return False
    u_term = float(np.sum(qp.u[np.isfinite(qp.u)] * pos[np.isfinite(qp.u)]))
    l_term = float(np.sum(qp.l[np.isfinite(qp.l)] * neg[np.isfinite(qp.l)]))
    return u_term + l_term < -eps


def solve_qp(
    qp: QuadraticProgram,
    settings: SolverSettings | None = None,
    warm_start: tuple[np.ndarray, np.ndarray] | None = None,
    factor_cache: dict | None = None,
) -> QpSolution:
    """ADMM iteration until both residuals meet eps_abs/eps_rel.

    Warm starting from a previous (x, z_dual) pair only changes the
    iteration count, not the tolerance-level solution. On iteration
    exhaustion the best (last) iterate is returned with MAX_ITER status.

    `factor_cache` maps step size -> KKT factorization; a caller solving
    a sequence of QPs that share P, A and the equality-row pattern (e.g.
    receding-horizon control) may pass one dict to skip refactorization.
    """
    s = settings if settings is not None else SolverSettings()
    n, m = qp.n, qp.m

    def factor_for(rb: float):
        if factor_cache is None:
            return _factor_kkt(qp, _build_rho(qp, rb), s.sigma)
        if rb not in factor_cache:
            factor_cache[rb] = _factor_kkt(qp, _build_rho(qp, rb), s.sigma)
        return factor_cache[rb]

    rho_bar = s.rho
    if factor_cache is not None:
        rho_bar = factor_cache.get("_last_rho", s.rho)
    rho = _build_rho(qp, rho_bar)
    solver = factor_for(rho_bar)

    if warm_start is not None:
        x = np.asarray(warm_start[0], dtype=float).copy()
        y = np.asarray(warm_start[1], dtype=float).copy()
        if x.shape != (n,) or y.shape != (m,):
            raise DimensionMismatchError("warm start shapes do not match the QP")
        z = np.clip(qp.a_mat @ x, qp.l, qp.u) if m else np.zeros(0)
    else:
        x = np.zeros(n)
        z = np.zeros(m)
        y = np.zeros(m)

    r_prim = r_dual = math.inf
    iterations = 0
    for it in range(1, s.max_iter + 1):
        iterations = it
        if m:
            rhs = np.concatenate([s.sigma * x - qp.q, z - y / rho])
            sol = solver.solve(rhs)
            x_tilde, nu = sol[:n], sol[n:]
            z_tilde = z + (nu - y) / rho
            x_next = s.alpha_relax * x_tilde + (1.0 - s.alpha_relax) * x
            z_relaxed = s.alpha_relax * z_tilde + (1.0 - s.alpha_relax) * z
            z_next = np.clip(z_relaxed + y / rho, qp.l, qp.u)
            y_next = y + rho * (z_relaxed - z_next)
        else:
            x_next = solver.solve(s.sigma * x - qp.q)
            z_next, y_next = z, y

        dy = y_next - y
        x, z, y = x_next, z_next, y_next

        if it % s.check_interval == 0 or it == s.max_iter:
            ax = qp.a_mat @ x if m else np.zeros(0)
            px = qp.p_mat @ x
            aty = qp.a_mat.T @ y if m else np.zeros(n)
            r_prim = _norm_inf(ax - z)
            r_dual = _norm_inf(px + qp.q + aty)
            eps_prim = s.eps_abs + s.eps_rel * max(_norm_inf(ax), _norm_inf(z))
            eps_dual = s.eps_abs + s.eps_rel * max(_norm_inf(px), _norm_inf(aty), _norm_inf(qp.q))
            if r_prim <= eps_prim and r_dual <= eps_dual:
                return QpSolution(x, y, SolveStatus.SOLVED, qp.objective(x), r_prim, r_dual, it)
            if m and _check_primal_infeasible(qp, dy, s.eps_infeas):
                return QpSolution(
                    x, y, SolveStatus.PRIMAL_INFEASIBLE, qp.objective(x), r_prim, r_dual, it
                )

        if s.adaptive_rho and m and it % s.adapt_interval == 0:
            ax = qp.a_mat @ x
            px = qp.p_mat @ x
            aty = qp.a_mat.T @ y
            prim_scale = max(_norm_inf(ax), _norm_inf(z), 1e-12)
            dual_scale = max(_norm_inf(px), _norm_inf(aty), _norm_inf(qp.q), 1e-12)
            ratio = math.sqrt((_norm_inf(ax - z) / prim_scale) / max(_norm_inf(px + qp.q + aty) / dual_scale, 1e-12))
            ratio = min(max(ratio, 1e-3), 1e3)
            if ratio > 5.0 or ratio < 0.2:
                # snap to a geometric grid so factorizations can be reused
                raw = min(max(rho_bar * ratio, 1e-6), 1e6)
                rho_bar = float(5.0 ** round(math.log(raw, 5.0)))
                if factor_cache is not None:
                    factor_cache["_last_rho"] = rho_bar
                rho = _build_rho(qp, rho_bar)
                solver = factor_for(rho_bar)

    return QpSolution(x, y, SolveStatus.MAX_ITER, qp.objective(x), r_prim, r_dual, iterations)


def kkt_residuals(qp: QuadraticProgram, solution: QpSolution) -> tuple[float, float]:
    """Unscaled primal/dual residual infinity norms of a candidate solution."""
    x = np.asarray(solution.x, dtype=float)
    z = np.asarray(solution.z_dual, dtype=float)
    if x.shape != (qp.n,):
        raise DimensionMismatchError(f"x has shape {x.shape}, expected ({qp.n},)")
    if z.shape != (qp.m,):
        raise DimensionMismatchError(f"dual has shape {z.shape}, expected ({qp.m},)")
    ax = qp.a_mat @ x if qp.m else np.zeros(0)
    r_prim = _norm_inf(np.clip(ax, qp.l, qp.u) - ax)
    r_dual = _norm_inf(qp.p_mat @ x + qp.q + (qp.a_mat.T @ z if qp.m else 0.0))
    return r_prim, r_dual
