# -*- coding: utf-8 -*-
"""
Dense LP and convex QP solvers.

- solve_lp: two-phase primal simplex on a dense tableau, Bland's rule for
  both the entering and the leaving variable (no cycling).
- solve_qp: ADMM operator splitting on
      minimize 1/2 x'Qx + q'x   subject to  lower <= Ax <= upper
  with Ruiz equilibration, fixed rho and over-relaxation.

Problems here have at most a few hundred variables, so everything is dense.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from dynprice.errors import InputError

logger = logging.getLogger(__name__)

# ====== Defaults ======
LP_TOL = 1e-9
LP_MAX_ITER = 50_000

QP_TOL_ABS = 1e-8
QP_TOL_REL = 1e-6
QP_MAX_ITER = 100_000
QP_RHO = 1.0
QP_SIGMA = 1e-6
QP_ALPHA = 1.6
QP_EQ_RHO_FACTOR = 1e3
QP_CHECK_EVERY = 25
QP_SCALING_ITERS = 10
QP_INFEAS_TOL = 1e-6


class SolveStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITERATIONS = "max-iterations"


@dataclass(frozen=True)
class SolveReport:
    status: SolveStatus
    x: np.ndarray
    objective: float
    primal_residual: float
    dual_residual: float
    iterations: int
    primal_tolerance: float = 0.0   # thresholds the residuals were tested against (QP only)
    dual_tolerance: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


def _as_vector(values, size: int, fill: float, name: str) -> np.ndarray:
    if values is None:
        return np.full(size, fill, dtype=float)
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        return np.full(size, float(arr))
    if arr.shape != (size,):
        raise InputError(f"{name} has shape {arr.shape}, expected ({size},)")
    return arr.copy()


def _as_matrix(A, n: int) -> np.ndarray:
    if A is None:
        return np.zeros((0, n))
    M = np.atleast_2d(np.asarray(A, dtype=float))
    if M.size == 0:
        return np.zeros((0, n))
    if M.shape[1] != n:
        raise InputError(f"constraint matrix has {M.shape[1]} columns, expected {n}")
    return M.copy()


@dataclass(frozen=True)
class LinearProgram:
    """minimize c'x  subject to  row_lower <= Ax <= row_upper,  lower <= x <= upper.

    Variable bounds default to [0, +inf).
    """

    c: np.ndarray
    A: np.ndarray | None = None
    row_lower: np.ndarray | None = None
    row_upper: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        n = c.size
        A = _as_matrix(self.A, n)
        m = A.shape[0]
        rl = _as_vector(self.row_lower, m, -np.inf, "row_lower")
        ru = _as_vector(self.row_upper, m, np.inf, "row_upper")
        lb = _as_vector(self.lower, n, 0.0, "lower")
        ub = _as_vector(self.upper, n, np.inf, "upper")
        if np.any(rl > ru) or np.any(lb > ub):
            raise InputError("lower bound exceeds upper bound")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "row_lower", rl)
        object.__setattr__(self, "row_upper", ru)
        object.__setattr__(self, "lower", lb)
        object.__setattr__(self, "upper", ub)

    @property
    def n(self) -> int:
        return self.c.size

    def objective(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=float))

    def violation(self, x) -> float:
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if self.A.shape[0]:
            ax = self.A @ x
            worst = max(worst, float(np.max(np.maximum(self.row_lower - ax, 0.0), initial=0.0)))
            worst = max(worst, float(np.max(np.maximum(ax - self.row_upper, 0.0), initial=0.0)))
        worst = max(worst, float(np.max(np.maximum(self.lower - x, 0.0), initial=0.0)))
        worst = max(worst, float(np.max(np.maximum(x - self.upper, 0.0), initial=0.0)))
        return worst


@dataclass(frozen=True)
class QuadraticProgram:
    """minimize 1/2 x'Qx + q'x  subject to  lower <= Ax <= upper."""

    Q: np.ndarray
    q: np.ndarray
    A: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        q = np.asarray(self.q, dtype=float).ravel()
        n = q.size
        if Q.shape != (n, n):
            raise InputError(f"Q has shape {Q.shape}, expected ({n}, {n})")
        scale = max(1.0, float(np.max(np.abs(Q), initial=0.0)))
        if not np.allclose(Q, Q.T, rtol=0.0, atol=1e-12 * scale):
            raise InputError("Q is not symmetric")
        A = _as_matrix(self.A, n)
        m = A.shape[0]
        lo = _as_vector(self.lower, m, -np.inf, "lower")
        up = _as_vector(self.upper, m, np.inf, "upper")
        if np.any(lo > up):
            raise InputError("lower bound exceeds upper bound")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def n(self) -> int:
        return self.q.size

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q @ x + self.q @ x)


# =====================================================================
# ====== LP: two-phase simplex ========================================
# =====================================================================

@dataclass
class _StandardForm:
    """min c'y, Aeq y = b, y >= 0, with x = shift + M y."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    shift: np.ndarray
    M: np.ndarray
    n_struct: int


def _to_standard_form(lp: LinearProgram) -> _StandardForm:
    n = lp.n
    columns = []  # (original var, sign)
    shift = np.zeros(n)
    bound_rows = []  # (column index, rhs) for y <= rhs
    for j in range(n):
        lb, ub = lp.lower[j], lp.upper[j]
        if np.isfinite(lb):
            shift[j] = lb
            columns.append((j, 1.0))
            if np.isfinite(ub):
                bound_rows.append((len(columns) - 1, ub - lb))
        elif np.isfinite(ub):
            shift[j] = ub
            columns.append((j, -1.0))
        else:
            columns.append((j, 1.0))
            columns.append((j, -1.0))
    ny = len(columns)
    M = np.zeros((n, ny))
    for k, (j, sign) in enumerate(columns):
        M[j, k] = sign

    AM = lp.A @ M if lp.A.shape[0] else np.zeros((0, ny))
    a_shift = lp.A @ shift if lp.A.shape[0] else np.zeros(0)

    rows = []  # (coeffs, sense, rhs) with sense in {"=", "<=", ">="}
    for i in range(lp.A.shape[0]):
        lo = lp.row_lower[i] - a_shift[i]
        up = lp.row_upper[i] - a_shift[i]
        if np.isfinite(lo) and np.isfinite(up) and up - lo <= 1e-12 * max(1.0, abs(up)):
            rows.append((AM[i], "=", up))
            continue
        if np.isfinite(up):
            rows.append((AM[i], "<=", up))
        if np.isfinite(lo):
            rows.append((AM[i], ">=", lo))
    for k, rhs in bound_rows:
        e = np.zeros(ny)
        e[k] = 1.0
        rows.append((e, "<=", rhs))

    n_slack = sum(1 for _, sense, _ in rows if sense != "=")
    m = len(rows)
    A = np.zeros((m, ny + n_slack))
    b = np.zeros(m)
    s = ny
    for i, (coeffs, sense, rhs) in enumerate(rows):
        A[i, :ny] = coeffs
        if sense == "<=":
            A[i, s] = 1.0
            s += 1
        elif sense == ">=":
            A[i, s] = -1.0
            s += 1
        b[i] = rhs
        if b[i] < 0:
            A[i] *= -1.0
            b[i] *= -1.0

    c = np.zeros(ny + n_slack)
    c[:ny] = M.T @ lp.c
    return _StandardForm(c=c, A=A, b=b, shift=shift, M=M, n_struct=ny)


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    factor = T[:, col].copy()
    factor[row] = 0.0
    T -= np.outer(factor, T[row])


def _simplex(T: np.ndarray, basis: list[int], n_cols: int, tol: float, max_iter: int):
    """Bland's rule on a tableau whose last row holds reduced costs and -objective."""
    m = T.shape[0] - 1
    for it in range(max_iter):
        reduced = T[-1, :n_cols]
        candidates = np.flatnonzero(reduced < -tol)
        if candidates.size == 0:
            return SolveStatus.OPTIMAL, it
        col = int(candidates[0])
        column = T[:m, col]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            return SolveStatus.UNBOUNDED, it
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
    return SolveStatus.MAX_ITERATIONS, max_iter


def solve_lp(problem: LinearProgram, tol: float = LP_TOL, max_iter: int = LP_MAX_ITER) -> SolveReport:
    sf = _to_standard_form(problem)
    m, N = sf.A.shape
    feas_tol = tol * max(1.0, float(np.max(np.abs(sf.b), initial=0.0)))

    # Phase 1: artificial on every row, minimise their sum.
    T = np.zeros((m + 1, N + m + 1))
    T[:m, :N] = sf.A
    T[:m, N:N + m] = np.eye(m)
    T[:m, -1] = sf.b
    T[-1, :N] = -sf.A.sum(axis=0)
    T[-1, -1] = -sf.b.sum()
    basis = list(range(N, N + m))

    status, it1 = _simplex(T, basis, N + m, tol, max_iter)
    if status is SolveStatus.MAX_ITERATIONS:
        logger.warning("simplex phase 1 hit the iteration cap (%d)", max_iter)
        return SolveReport(status, np.full(problem.n, np.nan), np.nan, np.inf, np.inf, it1)
    if -T[-1, -1] > feas_tol:
        return SolveReport(SolveStatus.INFEASIBLE, np.full(problem.n, np.nan), np.nan,
                           float(-T[-1, -1]), 0.0, it1)

    # Drive artificials out of the basis; rows that cannot be pivoted are redundant.
    keep = []
    for i in range(m):
        if basis[i] >= N:
            cols = np.flatnonzero(np.abs(T[i, :N]) > tol)
            if cols.size == 0:
                continue
            _pivot(T, i, int(cols[0]))
            basis[i] = int(cols[0])
        keep.append(i)
    T2 = np.zeros((len(keep) + 1, N + 1))
    T2[:-1, :N] = T[keep, :N]
    T2[:-1, -1] = T[keep, -1]
    basis = [basis[i] for i in keep]

    # Phase 2: reduced costs of the real objective.
    cb = sf.c[basis]
    T2[-1, :N] = sf.c - cb @ T2[:-1, :N]
    T2[-1, -1] = -cb @ T2[:-1, -1]
    status, it2 = _simplex(T2, basis, N, tol, max_iter - it1)
    iterations = it1 + it2

    y = np.zeros(N)
    for r, j in enumerate(basis):
        y[j] = T2[r, -1]
    x = sf.shift + sf.M @ y[:sf.n_struct]
    if status is not SolveStatus.OPTIMAL:
        if status is SolveStatus.MAX_ITERATIONS:
            logger.warning("simplex phase 2 hit the iteration cap (%d)", max_iter)
        return SolveReport(status, x, problem.objective(x), problem.violation(x), np.inf, iterations)

    reduced = T2[-1, :N]
    dual_residual = float(max(0.0, -np.min(reduced, initial=0.0)))
    return SolveReport(SolveStatus.OPTIMAL, x, problem.objective(x), problem.violation(x),
                       dual_residual, iterations)


# =====================================================================
# ====== QP: ADMM operator splitting ==================================
# =====================================================================

def _check_psd(Q: np.ndarray) -> None:
    if Q.size == 0:
        return
    _, d, _ = scipy.linalg.ldl(Q, lower=True)
    eig = np.linalg.eigvalsh(d)
    scale = max(1.0, float(np.max(np.abs(Q))))
    if eig.min() < -1e-10 * scale:
        raise InputError(f"Q is not positive semidefinite (inertia shows eigenvalue {eig.min():.3e})")


def _inf_norm(v: np.ndarray) -> float:
    return float(np.max(np.abs(v), initial=0.0))


def _ruiz(Q, q, A, iters):
    """Modified Ruiz equilibration of the KKT matrix, plus cost scaling."""
    n, m = q.size, A.shape[0]
    P, qs, As = Q.copy(), q.copy(), A.copy()
    D, E, cost = np.ones(n), np.ones(m), 1.0

    def _inv_sqrt(norms):
        norms = np.where(norms < 1e-4, 1.0, np.minimum(norms, 1e4))
        return 1.0 / np.sqrt(norms)

    for _ in range(iters):
        col = np.abs(P).max(axis=0) if n else np.zeros(0)
        if m:
            col = np.maximum(col, np.abs(As).max(axis=0))
        d = _inv_sqrt(col)
        e = _inv_sqrt(np.abs(As).max(axis=1)) if m else np.ones(0)
        P = d[:, None] * P * d[None, :]
        qs = d * qs
        As = e[:, None] * As * d[None, :]
        D *= d
        E *= e
        gamma_base = max(float(np.mean(np.abs(P).max(axis=0))), _inf_norm(qs))
        gamma = 1.0 / np.clip(gamma_base, 1e-4, 1e4) if gamma_base > 0 else 1.0
        P *= gamma
        qs *= gamma
        cost *= gamma
    return P, qs, As, D, E, cost


def solve_qp(
    problem: QuadraticProgram,
    tol: float = QP_TOL_ABS,
    max_iter: int = QP_MAX_ITER,
    tol_rel: float = QP_TOL_REL,
    rho: float = QP_RHO,
    sigma: float = QP_SIGMA,
    alpha: float = QP_ALPHA,
) -> SolveReport:
    """ADMM on the scaled problem, convergence tested on unscaled residuals.

    `tol` is the absolute part of the stopping rule and `tol_rel` the relative
    part: the primal residual must reach tol + tol_rel * max(|Ax|, |z|) and the
    dual residual tol + tol_rel * max(|Qx|, |A'y|, |q|), all infinity norms.
    The thresholds in force at the last check are returned in the report.
    """
    _check_psd(problem.Q)
    Q, q, A = problem.Q, problem.q, problem.A
    lo, up = problem.lower, problem.upper
    n, m = q.size, A.shape[0]

    P, qs, As, D, E, cost = _ruiz(Q, q, A, QP_SCALING_ITERS)
    ls, us = E * lo, E * up

    rho_vec = np.full(m, rho)
    equality = np.isfinite(lo) & np.isfinite(up) & (up - lo < 1e-10)
    rho_vec[equality] *= QP_EQ_RHO_FACTOR

    K = P + sigma * np.eye(n)
    if m:
        K += As.T @ (rho_vec[:, None] * As)
    factor = scipy.linalg.cho_factor(K)

    x = np.zeros(n)
    z = np.zeros(m)
    y = np.zeros(m)
    status = SolveStatus.MAX_ITERATIONS
    r_prim = r_dual = np.inf
    eps_prim = eps_dual = tol
    it = 0

    for it in range(1, max_iter + 1):
        rhs = sigma * x - qs
        if m:
            rhs += As.T @ (rho_vec * z - y)
        x_tilde = scipy.linalg.cho_solve(factor, rhs)
        z_tilde = As @ x_tilde
        x = alpha * x_tilde + (1.0 - alpha) * x
        z_relax = alpha * z_tilde + (1.0 - alpha) * z
        z_new = np.clip(z_relax + y / rho_vec, ls, us)
        y_new = y + rho_vec * (z_relax - z_new)
        dy = y_new - y
        z, y = z_new, y_new

        if it % QP_CHECK_EVERY and it != max_iter:
            continue

        xu = D * x
        zu = z / E if m else z
        yu = E * y / cost if m else y
        Ax = A @ xu if m else np.zeros(0)
        Qx = Q @ xu
        Aty = A.T @ yu if m else np.zeros(n)
        r_prim = _inf_norm(Ax - zu)
        r_dual = _inf_norm(Qx + q + Aty)
        eps_prim = tol + tol_rel * max(_inf_norm(Ax), _inf_norm(zu))
        eps_dual = tol + tol_rel * max(_inf_norm(Qx), _inf_norm(Aty), _inf_norm(q))
        if r_prim <= eps_prim and r_dual <= eps_dual:
            status = SolveStatus.OPTIMAL
            break

        if m:
            dyu = E * dy / cost
            norm = _inf_norm(dyu)
            if norm > 0 and _inf_norm(A.T @ dyu) <= QP_INFEAS_TOL * norm:
                pos, neg = dyu > 0, dyu < 0
                if np.all(np.isfinite(up[pos])) and np.all(np.isfinite(lo[neg])):
                    support = float(up[pos] @ dyu[pos] + lo[neg] @ dyu[neg])
                    if support < -QP_INFEAS_TOL * norm:
                        status = SolveStatus.INFEASIBLE
                        break

    xu = D * x
    if status is SolveStatus.MAX_ITERATIONS:
        logger.warning("ADMM stopped at the iteration cap (%d): primal %.2e, dual %.2e",
                       max_iter, r_prim, r_dual)
    else:
        logger.debug("ADMM %s after %d iterations", status.value, it)
    return SolveReport(status, xu, problem.objective(xu), r_prim, r_dual, it, eps_prim, eps_dual)
