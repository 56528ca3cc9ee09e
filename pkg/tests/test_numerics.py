import itertools

import numpy as np
import pytest

from dynprice.errors import InputError
from dynprice.numerics import LinearProgram, QuadraticProgram, SolveStatus, solve_lp, solve_qp


# =============================================================================
# ORACLES
# =============================================================================

def _vertex_optimum(c, A, b, lower, upper):
    """min c'x over {Ax <= b, lower <= x <= upper} by enumerating every vertex."""
    n = c.size
    G = np.vstack([A, -np.eye(n), np.eye(n)])
    h = np.concatenate([b, -lower, upper])
    best = np.inf
    for active in itertools.combinations(range(G.shape[0]), n):
        M = G[list(active)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, h[list(active)])
        if np.all(G @ x <= h + 1e-9):
            best = min(best, float(c @ x))
    return best


def _projected_gradient(Q, q, lo, up, iters=20000):
    step = 1.0 / np.linalg.eigvalsh(Q).max()
    x = np.clip(np.zeros(q.size), lo, up)
    for _ in range(iters):
        x = np.clip(x - step * (Q @ x + q), lo, up)
    return x


# =============================================================================
# LP
# =============================================================================

class TestSolveLp:
    def test_bound_active(self):
        report = solve_lp(LinearProgram(c=[1.0], A=[[1.0]], row_lower=[3.0], row_upper=[10.0],
                                         lower=[-np.inf], upper=[np.inf]))
        assert report.optimal
        assert report.x[0] == pytest.approx(3.0)
        assert report.objective == pytest.approx(3.0)

    def test_unit_triangle(self):
        report = solve_lp(LinearProgram(c=[-1.0, -1.0], A=[[1.0, 1.0]], row_upper=[1.0],
                                         lower=[0.0, 0.0], upper=[1.0, 1.0]))
        assert report.optimal
        assert report.objective == pytest.approx(-1.0)
        assert report.x.sum() == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_vertex_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        c = rng.normal(size=5)
        A = rng.normal(size=(3, 5))
        b = rng.uniform(0.5, 2.0, size=3)
        lower, upper = np.zeros(5), np.ones(5)
        report = solve_lp(LinearProgram(c=c, A=A, row_upper=b, lower=lower, upper=upper))
        assert report.optimal
        assert report.objective == pytest.approx(_vertex_optimum(c, A, b, lower, upper), abs=1e-8)
        assert report.primal_residual <= 1e-9

    @pytest.mark.parametrize("seed", range(5))
    def test_zero_duality_gap(self, seed):
        # primal: min c'x, Ax <= b, x >= 0; dual: max b'y, A'y <= c, y <= 0
        rng = np.random.default_rng(100 + seed)
        A = rng.uniform(0.1, 1.0, size=(4, 6))
        b = rng.uniform(1.0, 3.0, size=4)
        c = rng.normal(size=6)
        primal = solve_lp(LinearProgram(c=c, A=A, row_upper=b))
        dual = solve_lp(LinearProgram(c=-b, A=A.T, row_upper=c, lower=np.full(4, -np.inf), upper=np.zeros(4)))
        assert primal.optimal and dual.optimal
        assert primal.objective == pytest.approx(-dual.objective, abs=1e-8)

    def test_equality_rows_and_free_variables(self):
        # x1 + x2 = 4, x1 - x2 = 2 pins x = (3, 1) whatever the cost
        report = solve_lp(LinearProgram(c=[1.0, -5.0], A=[[1.0, 1.0], [1.0, -1.0]], row_lower=[4.0, 2.0],
                                         row_upper=[4.0, 2.0], lower=[-np.inf, -np.inf], upper=[np.inf, np.inf]))
        assert report.optimal
        np.testing.assert_allclose(report.x, [3.0, 1.0], atol=1e-9)

    def test_redundant_equality_rows(self):
        report = solve_lp(LinearProgram(c=[1.0, 2.0], A=[[1.0, 1.0], [2.0, 2.0]], row_lower=[1.0, 2.0],
                                         row_upper=[1.0, 2.0]))
        assert report.optimal
        assert report.objective == pytest.approx(1.0)

    def test_infeasible(self):
        report = solve_lp(LinearProgram(c=[1.0], A=[[1.0], [1.0]], row_lower=[3.0, -np.inf],
                                         row_upper=[np.inf, 1.0]))
        assert report.status is SolveStatus.INFEASIBLE

    def test_unbounded(self):
        report = solve_lp(LinearProgram(c=[-1.0]))
        assert report.status is SolveStatus.UNBOUNDED

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            LinearProgram(c=[1.0, 1.0], A=[[1.0, 1.0, 1.0]])
        with pytest.raises(InputError):
            LinearProgram(c=[1.0], lower=[2.0], upper=[1.0])


# =============================================================================
# QP
# =============================================================================

class TestSolveQp:
    def test_unconstrained_stationary_point(self):
        report = solve_qp(QuadraticProgram(Q=[[2.0]], q=[-4.0]))
        assert report.optimal
        assert report.x[0] == pytest.approx(2.0, abs=1e-6)

    def test_symmetric_halfspace(self):
        report = solve_qp(QuadraticProgram(Q=2.0 * np.eye(2), q=np.zeros(2), A=[[1.0, 1.0]],
                                           lower=[2.0], upper=[np.inf]))
        assert report.optimal
        np.testing.assert_allclose(report.x, [1.0, 1.0], atol=1e-5)
        assert report.objective == pytest.approx(2.0, abs=1e-5)

    def test_equality_constraint(self):
        report = solve_qp(QuadraticProgram(Q=np.eye(3), q=np.zeros(3), A=[[1.0, 1.0, 1.0]],
                                           lower=[3.0], upper=[3.0]))
        assert report.optimal
        np.testing.assert_allclose(report.x, [1.0, 1.0, 1.0], atol=1e-5)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_projected_gradient(self, seed):
        rng = np.random.default_rng(seed)
        M = rng.normal(size=(10, 10))
        Q = M @ M.T + 0.1 * np.eye(10)
        q = rng.normal(size=10) * 5.0
        lo, up = -np.ones(10), np.ones(10)
        problem = QuadraticProgram(Q=Q, q=q, A=np.eye(10), lower=lo, upper=up)
        report = solve_qp(problem, tol=1e-9, tol_rel=1e-9)
        oracle = _projected_gradient(Q, q, lo, up)
        assert report.optimal
        assert report.objective == pytest.approx(problem.objective(oracle), abs=1e-6)

    def test_reports_stopping_thresholds(self):
        problem = QuadraticProgram(Q=2.0 * np.eye(2), q=[-2.0, -6.0], A=[[1.0, 1.0]], lower=[-np.inf], upper=[2.0])
        report = solve_qp(problem, tol=1e-7, tol_rel=1e-4)
        assert report.optimal
        assert report.primal_tolerance >= 1e-7 and report.dual_tolerance > 1e-7
        assert report.primal_residual <= report.primal_tolerance
        assert report.dual_residual <= report.dual_tolerance

    def test_absolute_tolerance_alone(self):
        problem = QuadraticProgram(Q=2.0 * np.eye(2), q=[-2.0, -6.0], A=[[1.0, 1.0]], lower=[-np.inf], upper=[2.0])
        report = solve_qp(problem, tol=1e-8, tol_rel=0.0)
        assert report.optimal
        assert report.primal_tolerance == report.dual_tolerance == 1e-8
        assert max(report.primal_residual, report.dual_residual) <= 1e-8
        np.testing.assert_allclose(report.x, [0.0, 2.0], atol=1e-6)

    def test_infeasible_certificate(self):
        report = solve_qp(QuadraticProgram(Q=[[1.0]], q=[0.0], A=[[1.0], [1.0]],
                                           lower=[2.0, -np.inf], upper=[np.inf, 1.0]))
        assert report.status is SolveStatus.INFEASIBLE

    def test_iteration_cap(self, caplog):
        report = solve_qp(QuadraticProgram(Q=2.0 * np.eye(2), q=np.zeros(2), A=[[1.0, 1.0]],
                                           lower=[2.0], upper=[np.inf]), max_iter=3)
        assert report.status is SolveStatus.MAX_ITERATIONS
        assert "iteration cap" in caplog.text

    def test_not_psd(self):
        with pytest.raises(InputError, match="positive semidefinite"):
            solve_qp(QuadraticProgram(Q=[[1.0, 0.0], [0.0, -1.0]], q=[0.0, 0.0]))

    def test_not_symmetric(self):
        with pytest.raises(InputError, match="symmetric"):
            QuadraticProgram(Q=[[1.0, 1.0], [0.0, 1.0]], q=[0.0, 0.0])


# =============================================================================
# RANDOM SUITES
# =============================================================================

@pytest.mark.slow
class TestRandomSuites:
    def test_lp_vertex_enumeration(self):
        rng = np.random.default_rng(2000)
        for _ in range(200):
            n = int(rng.integers(2, 7))
            m = int(rng.integers(1, 4))
            c = rng.normal(size=n)
            A = rng.normal(size=(m, n))
            b = rng.uniform(0.5, 2.0, size=m)
            lower, upper = np.zeros(n), rng.uniform(0.5, 2.0, size=n)
            report = solve_lp(LinearProgram(c=c, A=A, row_upper=b, lower=lower, upper=upper))
            assert report.optimal
            assert report.objective == pytest.approx(_vertex_optimum(c, A, b, lower, upper), abs=1e-6)

    def test_lp_duality_gap(self):
        rng = np.random.default_rng(3000)
        for _ in range(200):
            m, n = int(rng.integers(1, 6)), int(rng.integers(1, 7))
            A = rng.uniform(0.1, 1.0, size=(m, n))
            b = rng.uniform(1.0, 3.0, size=m)
            c = rng.normal(size=n)
            primal = solve_lp(LinearProgram(c=c, A=A, row_upper=b))
            dual = solve_lp(LinearProgram(c=-b, A=A.T, row_upper=c, lower=np.full(m, -np.inf), upper=np.zeros(m)))
            assert primal.optimal and dual.optimal
            assert abs(primal.objective + dual.objective) <= 1e-6

    def test_qp_projected_gradient(self):
        rng = np.random.default_rng(4000)
        for _ in range(200):
            n = int(rng.integers(2, 9))
            M = rng.normal(size=(n, n))
            Q = M @ M.T + 0.1 * np.eye(n)
            q = rng.normal(size=n) * 5.0
            lo, up = -np.ones(n), np.ones(n)
            problem = QuadraticProgram(Q=Q, q=q, A=np.eye(n), lower=lo, upper=up)
            report = solve_qp(problem, tol=1e-9, tol_rel=1e-9)
            assert report.optimal
            assert max(report.primal_residual, report.dual_residual) <= 1e-6
            oracle = _projected_gradient(Q, q, lo, up)
            assert report.objective == pytest.approx(problem.objective(oracle), abs=1e-6)


class TestObjectiveScaling:
    @pytest.mark.parametrize("factor", [1e-3, 7.5, 1e4])
    def test_lp_argmin_unchanged(self, factor):
        rng = np.random.default_rng(17)
        c = rng.normal(size=4)
        A = rng.normal(size=(2, 4))
        b = rng.uniform(0.5, 2.0, size=2)
        base = solve_lp(LinearProgram(c=c, A=A, row_upper=b, lower=np.zeros(4), upper=np.ones(4)))
        scaled = solve_lp(LinearProgram(c=factor * c, A=A, row_upper=b, lower=np.zeros(4), upper=np.ones(4)))
        assert base.optimal and scaled.optimal
        np.testing.assert_allclose(scaled.x, base.x, atol=1e-9)
        assert scaled.objective == pytest.approx(factor * base.objective)

    @pytest.mark.parametrize("factor", [1e-3, 7.5, 1e4])
    def test_qp_argmin_unchanged(self, factor):
        rng = np.random.default_rng(18)
        M = rng.normal(size=(5, 5))
        Q = M @ M.T + 0.5 * np.eye(5)
        q = rng.normal(size=5) * 3.0
        A, lo, up = np.eye(5), -np.ones(5), np.ones(5)
        base = solve_qp(QuadraticProgram(Q=Q, q=q, A=A, lower=lo, upper=up), tol=1e-9, tol_rel=1e-9)
        scaled = solve_qp(QuadraticProgram(Q=factor * Q, q=factor * q, A=A, lower=lo, upper=up),
                          tol=1e-9, tol_rel=1e-9)
        assert base.optimal and scaled.optimal
        np.testing.assert_allclose(scaled.x, base.x, atol=1e-6)
