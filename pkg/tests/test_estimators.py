import numpy as np
import pytest

from banditstop import (
    BatchData,
    EpsGreedy,
    EstimatorUnavailable,
    KnownSigma,
    PolicyState,
    ResidualSigma,
    Schedule,
    TrueModel,
    action_probabilities,
    constant_clip,
    fit_batch_ols,
    ivw_combine,
    limit_arm_second_moment,
    make_rng,
    realize_rewards,
    sample_batch_contexts,
    select_actions,
    state_from_sufficient_stats,
    sufficient_statistics,
    uniform_cube_spec,
    update_state,
    variance_known_sigma,
    variance_residual,
)
from banditstop.estimators import ArmFit, BatchOlsFit


def make_fit(batch_index, gram1, beta1, gram0=None, beta0=None, count=5):
    """Scalar-friendly constructor for synthetic batch fits."""

    def arm(gram, beta):
        g = np.atleast_2d(np.asarray(gram, dtype=float))
        b = None if beta is None else np.atleast_1d(np.asarray(beta, dtype=float))
        return ArmFit(beta=b, gram=g, count=count, rss=0.0 if b is not None else None)

    gram0 = gram1 if gram0 is None else gram0
    beta0 = beta1 if beta0 is None else beta0
    return BatchOlsFit(batch_index=batch_index, arm0=arm(gram0, beta0), arm1=arm(gram1, beta1))


class TestFitBatchOls:
    def test_scalar_mean(self):
        fit = fit_batch_ols(
            np.array([[1.0], [1.0]]), np.array([1, 1]), np.array([2.0, 4.0]), batch_index=1
        )
        assert fit.arm1.beta[0] == pytest.approx(3.0, abs=1e-12)
        assert fit.arm1.gram[0, 0] == 2.0
        assert fit.arm1.rss == pytest.approx(2.0, abs=1e-12)
        assert fit.arm0.beta is None and fit.arm0.count == 0

    def test_zero_noise_recovers_truth(self):
        rng = make_rng(0)
        model = TrueModel(beta0=[0.5, -1.0, 2.0], beta1=[1.0, 0.0, -0.5], sigma0=0.0, sigma1=0.0)
        x = sample_batch_contexts(uniform_cube_spec(3), 40, rng)
        a = (rng.random(40) < 0.5).astype(int)
        y = realize_rewards(model, x, a, rng)
        fit = fit_batch_ols(x, a, y)
        np.testing.assert_allclose(fit.arm0.beta, model.beta0, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(fit.arm1.beta, model.beta1, rtol=1e-9, atol=1e-9)

    def test_moment_identity(self):
        # gram @ beta reproduces the raw moment vector.
        rng = make_rng(1)
        x = rng.uniform(-1, 1, size=(25, 3))
        a = (rng.random(25) < 0.6).astype(int)
        y = rng.normal(size=25)
        fit = fit_batch_ols(x, a, y)
        for arm in (0, 1):
            mask = a == arm
            moment = x[mask].T @ y[mask]
            got = fit.arm(arm).gram @ fit.arm(arm).beta
            np.testing.assert_allclose(got, moment, rtol=1e-9, atol=1e-12)

    def test_singular_arm_reports_gram(self):
        x = np.array([[1.0, 0.0], [1.0, 0.0], [0.5, 0.5]])
        a = np.array([1, 1, 0])  # arm 1 design is rank 1, arm 0 has 1 point
        fit = fit_batch_ols(x, a, np.array([1.0, 2.0, 3.0]))
        assert fit.arm1.beta is None and fit.arm0.beta is None
        np.testing.assert_allclose(fit.arm1.gram, np.array([[2.0, 0.0], [0.0, 0.0]]))
        assert fit.arm1.count == 2


class TestIvwCombine:
    def test_single_batch_fixed_point(self):
        fit = fit_batch_ols(
            np.array([[1.0], [2.0]]), np.array([1, 1]), np.array([1.0, 3.0]), batch_index=1
        )
        fit.arm0 = ArmFit(
            beta=np.array([0.5]), gram=np.array([[4.0]]), count=2, rss=0.0
        )
        est = ivw_combine([fit], KnownSigma(1.0), batch_size=2)
        np.testing.assert_array_equal(est.beta1, fit.arm1.beta)
        np.testing.assert_array_equal(est.beta0, fit.arm0.beta)

    def test_equal_gram_two_batch_mean(self):
        rng = make_rng(2)
        gram = np.array([[2.0, 0.3], [0.3, 1.0]])
        b1, b2 = rng.normal(size=2), rng.normal(size=2)
        fits = [
            make_fit(1, gram, b1, gram, rng.normal(size=2)),
            make_fit(2, gram, b2, gram, rng.normal(size=2)),
        ]
        est = ivw_combine(fits, KnownSigma(1.0), batch_size=3)
        np.testing.assert_allclose(est.beta1, (b1 + b2) / 2.0, rtol=1e-12, atol=1e-12)

    def test_scalar_weighted_average(self):
        fits = [make_fit(1, 1.0, 2.0), make_fit(2, 3.0, 4.0)]
        est = ivw_combine(fits, KnownSigma(1.0), batch_size=1)
        assert est.beta1[0] == 3.5  # (1*2 + 3*4) / 4

    def test_identical_estimates_fixed_point(self):
        rng = make_rng(3)
        b = rng.normal(size=3)
        fits = []
        for j in range(4):
            m = rng.uniform(-1, 1, size=(6, 3))
            fits.append(make_fit(j + 1, m.T @ m + 0.5 * np.eye(3), b))
        est = ivw_combine(fits, KnownSigma(1.0), batch_size=6)
        np.testing.assert_allclose(est.beta1, b, rtol=1e-12, atol=1e-13)

    def test_singular_batches_excluded(self):
        fits = [
            make_fit(1, 1.0, 2.0),
            make_fit(2, np.array([[0.0]]), None),  # contributes nothing
            make_fit(3, 3.0, 4.0),
        ]
        est = ivw_combine(fits, KnownSigma(1.0), batch_size=1)
        assert est.beta1[0] == 3.5
        # variance uses the same contributing total Gram (1 + 3)
        assert est.var1[0, 0] == pytest.approx(1.0 / 4.0, rel=1e-12)

    def test_all_singular_unavailable(self):
        fits = [make_fit(1, np.array([[0.0]]), None)]
        with pytest.raises(EstimatorUnavailable):
            ivw_combine(fits, KnownSigma(1.0), batch_size=1)

    def test_affine_equivariance(self):
        rng = make_rng(4)
        scale = 2.5
        x = rng.uniform(-1, 1, size=(30, 2))
        a = (rng.random(30) < 0.5).astype(int)
        y = rng.normal(size=30)
        batches = [BatchData(contexts=x, actions=a, rewards=y)]
        batches_s = [BatchData(contexts=x, actions=a, rewards=scale * y)]
        fit = fit_batch_ols(x, a, y)
        fit_s = fit_batch_ols(x, a, scale * y)
        np.testing.assert_allclose(fit_s.arm1.beta, scale * fit.arm1.beta, rtol=1e-9)
        est = ivw_combine([fit], ResidualSigma(), batch_size=30, batch_data=batches)
        est_s = ivw_combine([fit_s], ResidualSigma(), batch_size=30, batch_data=batches_s)
        np.testing.assert_allclose(est_s.beta1, scale * est.beta1, rtol=1e-9)
        np.testing.assert_allclose(est_s.var1, scale**2 * est.var1, rtol=1e-9)


class TestVarianceEstimators:
    def test_known_sigma_scalar(self):
        fits = [make_fit(1, 5.0, 1.0)]
        v0, v1 = variance_known_sigma(fits, sigma=np.sqrt(2.0), batch_size=10)
        assert v1[0, 0] == pytest.approx(4.0, rel=1e-12)  # 10 * (1/5) * 2

    def test_known_sigma_identity_grams(self):
        t, n, d = 4, 6, 3
        fits = [make_fit(j + 1, np.eye(d), np.zeros(d)) for j in range(t)]
        v0, v1 = variance_known_sigma(fits, sigma=1.5, batch_size=n)
        np.testing.assert_allclose(v1, (n / t) * 1.5**2 * np.eye(d), rtol=1e-12)

    def test_residual_zero_noise(self):
        rng = make_rng(5)
        model = TrueModel(beta0=[1.0, 0.0], beta1=[0.0, 1.0], sigma0=0.0, sigma1=0.0)
        x = sample_batch_contexts(uniform_cube_spec(2), 30, rng)
        a = (rng.random(30) < 0.5).astype(int)
        y = realize_rewards(model, x, a, rng)
        fit = fit_batch_ols(x, a, y)
        est = ivw_combine(
            [fit], ResidualSigma(), batch_size=30, batch_data=[BatchData(x, a, y)]
        )
        np.testing.assert_allclose(est.var1, 0.0, atol=1e-18)
        np.testing.assert_allclose(est.var0, 0.0, atol=1e-18)

    def _run_batches(self, model, t, n, seed):
        rng = make_rng(seed)
        spec = uniform_cube_spec(model.dim)
        fits, data = [], []
        for j in range(t):
            x = sample_batch_contexts(spec, n, rng)
            a = (rng.random(n) < 0.5).astype(int)
            y = realize_rewards(model, x, a, rng)
            fits.append(fit_batch_ols(x, a, y, batch_index=j + 1))
            data.append(BatchData(x, a, y))
        return fits, data

    def test_residual_matches_known_sigma(self):
        model = TrueModel(beta0=[0.5, -0.3], beta1=[0.2, 0.8], sigma0=1.0, sigma1=1.0)
        fits, data = self._run_batches(model, t=50, n=200, seed=6)
        known0, known1 = variance_known_sigma(fits, 1.0, 200)
        est = ivw_combine(fits, ResidualSigma(), batch_size=200, batch_data=data)
        for resid, known in ((est.var0, known0), (est.var1, known1)):
            rel = np.linalg.norm(resid - known, 2) / np.linalg.norm(known, 2)
            assert rel < 0.10

    def test_residual_heteroskedastic_factors(self):
        from banditstop import residual_noise_factors

        model = TrueModel(beta0=[0.5], beta1=[-0.2], sigma0=1.0, sigma1=2.0)
        fits, data = self._run_batches(model, t=20, n=500, seed=7)
        est = ivw_combine(fits, ResidualSigma(), batch_size=500, batch_data=data)
        f0, f1 = residual_noise_factors(data, est.beta0, est.beta1)
        assert abs(f0 - 1.0) < 0.10
        assert abs(f1 - 4.0) < 0.40

    def test_residual_needs_enough_points(self):
        x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        a = np.array([1, 1, 1])
        y = np.array([1.0, 2.0, 3.0])
        with pytest.raises(EstimatorUnavailable):
            variance_residual(
                [fit_batch_ols(x, a, y)],
                [BatchData(x, a, y)],
                np.zeros(2),
                np.zeros(2),
                batch_size=3,
            )


class TestSufficientStats:
    def test_single_batch_projection(self):
        rng = make_rng(8)
        x = rng.uniform(-1, 1, size=(20, 2))
        a = (rng.random(20) < 0.5).astype(int)
        y = rng.normal(size=20)
        fit = fit_batch_ols(x, a, y, batch_index=1)
        stats = sufficient_statistics([fit])
        beta1, gram1, beta0, gram0 = stats.entries[0]
        np.testing.assert_array_equal(beta1, fit.arm1.beta)
        np.testing.assert_array_equal(gram1, fit.arm1.gram)
        np.testing.assert_array_equal(beta0, fit.arm0.beta)
        np.testing.assert_array_equal(gram0, fit.arm0.gram)

    def test_moment_reconstruction(self):
        rng = make_rng(9)
        fits = []
        moments = []
        for j in range(5):
            x = rng.uniform(-1, 1, size=(30, 3))
            a = (rng.random(30) < 0.5).astype(int)
            y = rng.normal(size=30)
            fits.append(fit_batch_ols(x, a, y, batch_index=j + 1))
            moments.append((x[a == 1].T @ y[a == 1], x[a == 0].T @ y[a == 0]))
        stats = sufficient_statistics(fits)
        for (beta1, gram1, beta0, gram0), (m1, m0) in zip(stats.entries, moments):
            np.testing.assert_allclose(gram1 @ beta1, m1, rtol=1e-9, atol=1e-12)
            np.testing.assert_allclose(gram0 @ beta0, m0, rtol=1e-9, atol=1e-12)

    def test_eps_greedy_replay_from_stats(self):
        # Next-batch assignment probabilities recomputed from the statistics
        # alone agree with the logged ones bit-for-bit.
        rng = make_rng(10)
        spec = uniform_cube_spec(2)
        model = TrueModel(beta0=[0.1, -0.2], beta1=[0.6, 0.3], sigma0=1.0, sigma1=1.0)
        kind = EpsGreedy(Schedule(0.2))
        sched = constant_clip(0.1)
        state = PolicyState.empty(2)
        fits = []
        logged = []
        contexts_per_batch = []
        for t in range(1, 6):
            x = sample_batch_contexts(spec, 60, rng)
            sel = select_actions(kind, state, x, sched, rng)
            y = realize_rewards(model, x, sel.actions, rng)
            fits.append(fit_batch_ols(x, sel.actions, y, batch_index=t))
            logged.append(sel.prob_pre_clip)
            contexts_per_batch.append(x)
            state = update_state(state, x, sel.actions, y)
        stats = sufficient_statistics(fits)
        for t in range(1, 6):
            replayed_state = state_from_sufficient_stats(
                type(stats)(entries=stats.entries[: t - 1]), dim=2
            )
            probs = action_probabilities(kind, replayed_state, contexts_per_batch[t - 1])
            np.testing.assert_array_equal(probs, logged[t - 1])


class TestLimitSecondMoment:
    def test_symmetric_uniform_halves_raw_moment(self):
        # Negation-symmetric contexts: the weighted moment equals E[x x']/2
        # regardless of the clip floor.
        spec = uniform_cube_spec(2)
        model = TrueModel(beta0=[0.0, 0.0], beta1=[1.0, 0.4])
        m = limit_arm_second_moment(spec, model, 0.1, 1, 400_000, make_rng(11))
        np.testing.assert_allclose(m, np.eye(2) / 6.0, atol=0.004)

    def test_scaled_variance_tracks_limit_inverse(self):
        # Long clipped run on the default context family: t times the scaled
        # variance matrix approaches the inverse of the limiting weighted
        # second moment times the noise variance (10% spectral tolerance at
        # t=200, n=500).
        from banditstop import (
            EpsGreedy,
            PolicyState,
            Schedule,
            constant_clip,
            select_actions,
            update_state,
        )

        spec = uniform_cube_spec(2)
        model = TrueModel(beta0=[0.2, -0.1], beta1=[0.45, 0.25], sigma0=1.0, sigma1=1.0)
        kind = EpsGreedy(Schedule(0.2))
        sched = constant_clip(0.1)
        rng = make_rng(12)
        t, n = 200, 500
        state = PolicyState.empty(2)
        fits = []
        for j in range(t):
            x = sample_batch_contexts(spec, n, rng)
            sel = select_actions(kind, state, x, sched, rng)
            y = realize_rewards(model, x, sel.actions, rng)
            fits.append(fit_batch_ols(x, sel.actions, y, batch_index=j + 1))
            state = update_state(state, x, sel.actions, y)
        _v0, v1 = variance_known_sigma(fits, sigma=1.0, batch_size=n)
        limit = limit_arm_second_moment(spec, model, 0.1, 1, 1_000_000, make_rng(13))
        target = np.linalg.inv(limit)  # noise variance 1
        rel = np.linalg.norm(t * v1 - target, 2) / np.linalg.norm(target, 2)
        assert rel < 0.10
