import numpy as np
import pytest

from ibvsim import DimensionMismatch, QpProblem, QpStatus, solve_qp
from helpers import dual_projected_gradient, projected_gradient_box, random_qp


def kkt_certificate(qp, sol, tol=1e-6):
    """Stationarity, primal/dual feasibility, complementary slackness."""
    lam = sol.duals
    stat = np.abs(qp.H @ sol.x + qp.f + qp.G.T @ lam).max(initial=0.0)
    assert stat <= tol, f"stationarity {stat:.2e}"
    if qp.w.size:
        pfeas = (qp.G @ sol.x - qp.w).max(initial=0.0)
        assert pfeas <= 1e-8, f"primal feasibility {pfeas:.2e}"
        assert lam.min(initial=0.0) >= -tol, "dual feasibility"
        comp = np.abs(lam * (qp.G @ sol.x - qp.w)).max(initial=0.0)
        assert comp <= tol, f"complementary slackness {comp:.2e}"


class TestBasicProblems:
    def test_clipped_scalar(self):
        qp = QpProblem(H=[[1.0]], f=[-2.0], G=[[1.0], [-1.0]], w=[1.0, 1.0])
        sol = solve_qp(qp)
        assert sol.status is QpStatus.OPTIMAL
        assert sol.x[0] == pytest.approx(1.0, abs=1e-9)

    def test_symmetric_halfspace(self):
        qp = QpProblem(H=np.eye(2), f=np.zeros(2), G=[[-1.0, -1.0]], w=[-1.0])
        sol = solve_qp(qp)
        assert sol.status is QpStatus.OPTIMAL
        assert np.allclose(sol.x, [0.5, 0.5], atol=1e-9)

    def test_unconstrained_direct(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((5, 5))
        H = a.T @ a + np.eye(5)
        f = rng.standard_normal(5)
        sol = solve_qp(QpProblem(H=H, f=f))
        assert sol.status is QpStatus.OPTIMAL
        assert np.allclose(sol.x, -np.linalg.solve(H, f), atol=1e-10)
        assert sol.iterations == 0

    def test_equality_constraint(self):
        qp = QpProblem(
            H=2.0 * np.eye(2), f=np.zeros(2), A_eq=[[1.0, -1.0]], b_eq=[1.0]
        )
        sol = solve_qp(qp)
        assert sol.status is QpStatus.OPTIMAL
        assert np.allclose(sol.x, [0.5, -0.5], atol=1e-9)

    def test_mixed_equality_inequality(self):
        # min ||x||^2 s.t. x0 + x1 = 1, x0 <= 0.2  ->  x = (0.2, 0.8)
        qp = QpProblem(
            H=2.0 * np.eye(2),
            f=np.zeros(2),
            G=[[1.0, 0.0]],
            w=[0.2],
            A_eq=[[1.0, 1.0]],
            b_eq=[1.0],
        )
        sol = solve_qp(qp)
        assert sol.status is QpStatus.OPTIMAL
        assert np.allclose(sol.x, [0.2, 0.8], atol=1e-8)

    def test_infeasible_detected(self):
        qp = QpProblem(H=[[1.0]], f=[0.0], G=[[1.0], [-1.0]], w=[-1.0, -1.0])
        sol = solve_qp(qp, max_iter=10000)
        assert sol.status is QpStatus.INFEASIBLE

    def test_max_iterations_returns_best_iterate(self):
        rng = np.random.default_rng(5)
        H, f, G, w = random_qp(rng)
        sol = solve_qp(QpProblem(H=H, f=f, G=G, w=w), tol=1e-12, max_iter=25)
        assert sol.status in (QpStatus.MAX_ITERATIONS, QpStatus.OPTIMAL)
        assert np.all(np.isfinite(sol.x))
        assert np.isfinite(sol.kkt_residual)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            QpProblem(H=np.eye(3), f=np.zeros(2))
        with pytest.raises(DimensionMismatch):
            QpProblem(H=np.eye(2), f=np.zeros(2), G=[[1.0, 0.0]], w=[1.0, 2.0])


class TestRandomSuite:
    def test_against_dual_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(30):
            H, f, G, w = random_qp(rng)
            qp = QpProblem(H=H, f=f, G=G, w=w)
            sol = solve_qp(qp, tol=1e-8)
            assert sol.status is QpStatus.OPTIMAL
            x_ref, _ = dual_projected_gradient(H, f, G, w)
            obj_ref = 0.5 * x_ref @ H @ x_ref + f @ x_ref
            assert sol.objective == pytest.approx(obj_ref, abs=1e-6)
            kkt_certificate(qp, sol)

    def test_box_only_against_primal_oracle(self):
        rng = np.random.default_rng(43)
        for _ in range(20):
            n = int(rng.integers(2, 15))
            a = rng.standard_normal((n, n))
            H = a.T @ a + np.eye(n)
            f = rng.standard_normal(n)
            lo = -rng.uniform(0.1, 1.5, n)
            hi = rng.uniform(0.1, 1.5, n)
            qp = QpProblem(
                H=H, f=f, G=np.vstack([np.eye(n), -np.eye(n)]),
                w=np.concatenate([hi, -lo]),
            )
            sol = solve_qp(qp)
            assert sol.status is QpStatus.OPTIMAL
            x_ref = projected_gradient_box(H, f, lo, hi)
            assert np.allclose(sol.x, x_ref, atol=1e-7)

    def test_determinism(self):
        rng = np.random.default_rng(44)
        H, f, G, w = random_qp(rng)
        qp = QpProblem(H=H, f=f, G=G, w=w)
        s1 = solve_qp(qp)
        s2 = solve_qp(qp)
        assert np.array_equal(s1.x, s2.x)
        assert s1.objective == s2.objective
        assert s1.iterations == s2.iterations


class TestValidate:
    def test_psd_check(self):
        good = QpProblem(H=np.eye(2), f=np.zeros(2))
        assert good.validate() == []
        bad = QpProblem(H=np.array([[1.0, 0.0], [0.0, -1.0]]), f=np.zeros(2))
        assert any("eigenvalue" in v for v in bad.validate())
        asym = QpProblem(H=np.array([[1.0, 0.5], [0.0, 1.0]]), f=np.zeros(2))
        assert any("symmetric" in v for v in asym.validate())
