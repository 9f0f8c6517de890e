import numpy as np
import pytest

from ibvsim import KalmanConfig, SingularInnovation, init_state, predict, step, update


def identity_cfg(**kwargs):
    defaults = dict(
        q_noise=np.zeros((4, 4)),
        r_noise=np.eye(4),
        p0=np.eye(4),
        x0=np.zeros(4),
    )
    defaults.update(kwargs)
    return KalmanConfig(**defaults)


class TestPredict:
    def test_identity_transition_holds_estimate(self):
        cfg = KalmanConfig(x0=np.array([1.0, -2.0, 0.5, 0.1]))
        state = init_state(cfg)
        new = predict(state, cfg)
        assert np.array_equal(new.x_hat, state.x_hat)
        assert np.allclose(new.p_cov, state.p_cov + cfg.q_noise)
        assert new.steps_since_update == 1

    def test_zero_process_noise_fixed_point(self):
        cfg = identity_cfg()
        state = init_state(cfg)
        for _ in range(5):
            state = predict(state, cfg)
        assert np.array_equal(state.x_hat, np.zeros(4))
        assert np.array_equal(state.p_cov, np.eye(4))

    def test_dropout_accumulation_exact(self):
        # Binary-friendly covariances make the closed form bitwise exact.
        q = 2.0**-10 * np.eye(4)
        cfg = KalmanConfig(q_noise=q, p0=np.eye(4), x0=np.zeros(4))
        state = init_state(cfg)
        D = 25
        for _ in range(D):
            state = predict(state, cfg)
        assert np.array_equal(state.p_cov, np.eye(4) + D * q)
        assert state.steps_since_update == D


class TestUpdate:
    def test_half_gain_case(self):
        cfg = identity_cfg()
        prior = predict(init_state(cfg), cfg)
        z = np.array([2.0, 0.0, -2.0, 4.0])
        post = update(prior, z, cfg)
        assert np.allclose(post.x_hat, 0.5 * (prior.x_hat + z))
        assert np.allclose(post.p_cov, 0.5 * np.eye(4))
        assert post.steps_since_update == 0

    def test_huge_measurement_noise_ignores_measurement(self):
        cfg = identity_cfg(r_noise=1e9 * np.eye(4), x0=np.array([1.0, 2.0, 3.0, 4.0]))
        prior = predict(init_state(cfg), cfg)
        post = update(prior, np.array([100.0, -50.0, 0.0, 7.0]), cfg)
        assert np.allclose(post.x_hat, prior.x_hat, rtol=1e-6)

    def test_zero_innovation_keeps_estimate_contracts_covariance(self):
        cfg = identity_cfg(x0=np.array([0.5, -0.5, 1.0, 0.0]))
        prior = predict(init_state(cfg), cfg)
        post = update(prior, prior.x_hat.copy(), cfg)
        assert np.array_equal(post.x_hat, prior.x_hat)
        assert np.trace(post.p_cov) < np.trace(prior.p_cov)

    def test_singular_innovation(self):
        cfg = identity_cfg(c_mat=np.zeros((4, 4)), r_noise=np.zeros((4, 4)))
        prior = predict(init_state(cfg), cfg)
        with pytest.raises(SingularInnovation):
            update(prior, np.zeros(4), cfg)

    def test_joseph_form_equivalence(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            cfg = KalmanConfig(
                q_noise=np.diag(rng.uniform(1e-5, 1e-2, 4)),
                r_noise=np.diag(rng.uniform(1e-3, 1e-1, 4)),
                p0=np.diag(rng.uniform(0.01, 1.0, 4)),
                x0=rng.standard_normal(4),
            )
            prior = predict(init_state(cfg), cfg)
            P_prior = prior.p_cov
            C = cfg.c_mat
            S = C @ P_prior @ C.T + cfg.r_noise
            K = P_prior @ C.T @ np.linalg.inv(S)
            joseph = (
                (np.eye(4) - K @ C) @ P_prior @ (np.eye(4) - K @ C).T
                + K @ cfg.r_noise @ K.T
            )
            post = update(prior, rng.standard_normal(4), cfg)
            assert np.abs(post.p_cov - joseph).max() <= 1e-8


class TestStep:
    def test_dropout_holds_estimate_and_grows_covariance(self):
        cfg = KalmanConfig(x0=np.array([0.3, 0.1, 1.0, 0.0]))
        state = init_state(cfg)
        state, _ = step(state, state.x_hat.copy(), cfg)
        traces = []
        outputs = []
        for _ in range(10):
            state, x_out = step(state, None, cfg)
            outputs.append(x_out)
            traces.append(np.trace(state.p_cov))
        outputs = np.array(outputs)
        assert np.all(outputs == outputs[0])
        diffs = np.diff(traces)
        assert np.allclose(diffs, diffs[0])
        assert state.steps_since_update == 10

    def test_alternating_bookkeeping(self):
        cfg = KalmanConfig(x0=np.zeros(4))
        state = init_state(cfg)
        expected = []
        for k in range(6):
            z = np.zeros(4) if k % 2 == 0 else None
            state, _ = step(state, z, cfg)
            expected.append(0 if k % 2 == 0 else 1)
            assert state.steps_since_update == expected[-1]

    def test_noise_reduction_on_constant_signal(self):
        rng = np.random.default_rng(1)
        x_true = np.array([0.2, -0.1, 1.0, 0.05])
        sigma = 0.05
        cfg = KalmanConfig(
            q_noise=1e-6 * np.eye(4),
            r_noise=sigma**2 * np.eye(4),
            p0=0.1 * np.eye(4),
        )
        state = init_state(cfg)
        errors = []
        for k in range(500):
            z = x_true + sigma * rng.standard_normal(4)
            state, x_out = step(state, z, cfg)
            if k >= 400:
                errors.append(np.linalg.norm(x_out - x_true))
        assert np.mean(errors) < sigma

    def test_lazy_init_from_first_measurement(self):
        cfg = KalmanConfig()  # x0 None
        state = init_state(cfg)
        assert not state.initialized
        state, x_out = step(state, None, cfg)
        assert not state.initialized
        z = np.array([0.4, -0.2, 1.1, 0.02])
        state, x_out = step(state, z, cfg)
        assert state.initialized
        assert np.array_equal(x_out, z)

    def test_stale_flag(self):
        cfg = KalmanConfig(x0=np.zeros(4), max_dropout=5)
        state = init_state(cfg)
        state, _ = step(state, np.zeros(4), cfg)
        for _ in range(5):
            state, _ = step(state, None, cfg)
            assert not state.stale(cfg)
        state, _ = step(state, None, cfg)
        assert state.stale(cfg)

    def test_continuity_no_nans(self):
        cfg = KalmanConfig()
        state = init_state(cfg)
        rng = np.random.default_rng(2)
        for k in range(200):
            z = rng.standard_normal(4) if rng.uniform() < 0.5 else None
            state, x_out = step(state, z, cfg)
            assert np.all(np.isfinite(x_out))


class TestCovarianceInvariants:
    def test_psd_over_random_cycles(self):
        rng = np.random.default_rng(3)
        total = 0
        while total < 10_000:
            a = rng.standard_normal((4, 4))
            cfg = KalmanConfig(
                q_noise=np.diag(rng.uniform(0.0, 1e-2, 4)),
                r_noise=a @ a.T + 1e-3 * np.eye(4),
                p0=np.diag(rng.uniform(1e-3, 1.0, 4)),
                x0=rng.standard_normal(4),
            )
            state = init_state(cfg)
            for _ in range(200):
                z = rng.standard_normal(4) if rng.uniform() < 0.7 else None
                state, _ = step(state, z, cfg)
                assert np.array_equal(state.p_cov, state.p_cov.T)
                assert np.linalg.eigvalsh(state.p_cov).min() >= -1e-10
                total += 1

    def test_steady_state_variance_reduction(self):
        cfg = KalmanConfig(
            q_noise=1e-4 * np.eye(4),
            r_noise=np.diag([0.02, 0.02, 0.02, 0.05]) ** 2,
            p0=np.eye(4),
            x0=np.zeros(4),
        )
        state = init_state(cfg)
        for _ in range(2000):
            state, _ = step(state, np.zeros(4), cfg)
        assert np.trace(state.p_cov) <= np.trace(cfg.r_noise)


class TestConfigValidation:
    def test_defaults_valid(self):
        assert KalmanConfig().validate() == []

    def test_violations_named(self):
        cfg = KalmanConfig(r_noise=np.zeros((4, 4)), max_dropout=0)
        problems = " ".join(cfg.validate())
        assert "r_noise" in problems
        assert "max_dropout" in problems
