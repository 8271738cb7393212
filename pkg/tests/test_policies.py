import numpy as np
import pytest

from banditstop import (
    ClipSchedule,
    ConfigError,
    ContractError,
    EpsGreedy,
    PolicyState,
    Schedule,
    Thompson,
    Ucb,
    UniformRandom,
    action_probabilities,
    action_probability,
    clip,
    constant_clip,
    make_rng,
    select_actions,
    thompson_sampled_probability,
    update_state,
)


def scalar_state(beta0: float, beta1: float, gram: float = 1.0) -> PolicyState:
    """d=1 state whose cumulative OLS estimates are exactly (beta0, beta1)."""
    s = PolicyState.empty(1)
    s.gram0 = np.array([[gram]])
    s.gram1 = np.array([[gram]])
    s.moment0 = np.array([gram * beta0])
    s.moment1 = np.array([gram * beta1])
    s.count0 = s.count1 = 5
    s.t = 1
    return s


def random_state(dim: int, rng: np.random.Generator, n_per_arm: int = 12) -> PolicyState:
    s = PolicyState.empty(dim)
    x = rng.uniform(-1, 1, size=(2 * n_per_arm, dim))
    a = np.repeat([0, 1], n_per_arm)
    y = rng.normal(size=2 * n_per_arm)
    return update_state(s, x, a, y)


class TestActionProbability:
    @pytest.mark.parametrize(
        "kind",
        [UniformRandom(), EpsGreedy(Schedule(0.2)), Ucb(Schedule(1.0)), Thompson(1.0)],
    )
    def test_empty_state_gives_half(self, kind):
        state = PolicyState.empty(2)
        assert action_probability(kind, state, [0.3, -0.7]) == 0.5

    def test_eps_greedy_favors_better_arm(self):
        state = scalar_state(beta0=1.0, beta1=2.0)
        kind = EpsGreedy(Schedule(0.2))
        assert action_probability(kind, state, [1.0]) == 0.9
        assert action_probability(kind, state, [-1.0]) == pytest.approx(0.1)

    def test_eps_greedy_tie(self):
        state = scalar_state(beta0=1.5, beta1=1.5)
        assert action_probability(EpsGreedy(Schedule(0.2)), state, [1.0]) == 0.5
        assert action_probability(EpsGreedy(Schedule(0.2)), state, [0.0]) == 0.5

    def test_ucb_deterministic_sides(self):
        state = scalar_state(beta0=0.0, beta1=1.0)
        kind = Ucb(Schedule(0.5))
        assert action_probability(kind, state, [1.0]) == 1.0
        assert action_probability(kind, state, [-1.0]) == 0.0

    def test_ucb_tie(self):
        state = scalar_state(beta0=1.0, beta1=1.0)
        assert action_probability(Ucb(Schedule(0.5)), state, [1.0]) == 0.5

    def test_thompson_symmetry(self):
        state = scalar_state(beta0=0.7, beta1=0.7)
        assert action_probability(Thompson(1.0), state, [1.0]) == 0.5

    def test_thompson_closed_form_matches_sampling(self):
        rng = make_rng(123)
        for trial in range(5):
            state = random_state(2, rng)
            x = rng.uniform(-1, 1, size=2)
            closed = action_probability(Thompson(0.8), state, x)
            sampled = thompson_sampled_probability(state, x, 0.8, make_rng(trial), draws=100_000)
            assert abs(closed - sampled) < 0.01

    def test_measurability_replay(self):
        # The probability map is a pure function of (state, contexts).
        rng = make_rng(7)
        state = random_state(3, rng)
        x = rng.uniform(-1, 1, size=(50, 3))
        for kind in (EpsGreedy(Schedule(0.3)), Ucb(Schedule(0.7)), Thompson(1.2)):
            p1 = action_probabilities(kind, state, x)
            p2 = action_probabilities(kind, state, x)
            np.testing.assert_array_equal(p1, p2)


class TestClip:
    def test_floor(self):
        assert clip(0.0, 0.1) == 0.1

    def test_ceiling(self):
        assert clip(0.95, 0.1) == pytest.approx(0.9)

    def test_interior_fixed_point(self):
        assert clip(0.5, 0.1) == 0.5

    def test_bad_level(self):
        with pytest.raises(ConfigError):
            clip(0.5, 0.6)

    def test_bad_prob(self):
        with pytest.raises(ContractError):
            clip(1.2, 0.1)

    def test_clip_schedule_validation(self):
        with pytest.raises(ConfigError):
            ClipSchedule(Schedule(0.7))
        sched = ClipSchedule(Schedule(0.4, decay=0.5, floor=0.05))
        assert sched.value(1) == 0.4
        assert sched.value(100) == pytest.approx(max(0.4 * 100**-0.5, 0.05))
        assert sched.floor == 0.05
        assert constant_clip(0.1).floor == 0.1


class TestSelectActions:
    def test_uniform_fraction(self):
        state = PolicyState.empty(1)
        x = np.ones((10_000, 1))
        sel = select_actions(UniformRandom(), state, x, constant_clip(0.1), make_rng(0))
        assert abs(sel.actions.mean() - 0.5) < 0.015

    def test_clipped_floor_fraction(self):
        # Pre-clip 0.05 (eps/2) is floored to the clip level 0.1.
        state = scalar_state(beta0=2.0, beta1=1.0)
        x = np.ones((10_000, 1))
        sel = select_actions(EpsGreedy(Schedule(0.1)), state, x, constant_clip(0.1), make_rng(1))
        assert np.all(sel.prob_post_clip == 0.1)
        assert abs(sel.actions.mean() - 0.1) < 3 * np.sqrt(0.1 * 0.9 / 10_000)

    def test_deterministic_ucb_clipped(self):
        state = scalar_state(beta0=0.0, beta1=1.0)
        x = np.ones((10_000, 1))
        sel = select_actions(Ucb(Schedule(0.5)), state, x, constant_clip(0.1), make_rng(2))
        assert np.all(sel.prob_pre_clip == 1.0)
        assert np.all(sel.prob_post_clip == 0.9)
        assert abs(sel.actions.mean() - 0.9) < 3 * np.sqrt(0.1 * 0.9 / 10_000)

    def test_clipping_invariant_along_trajectory(self):
        rng = make_rng(3)
        state = PolicyState.empty(2)
        kind = EpsGreedy(Schedule(0.4, decay=0.3, floor=0.05))
        sched = ClipSchedule(Schedule(0.2, decay=0.25, floor=0.05))
        beta1 = np.array([0.5, -0.2])
        for _ in range(6):
            x = rng.uniform(-1, 1, size=(40, 2))
            sel = select_actions(kind, state, x, sched, rng)
            level = sched.value(state.t + 1)
            assert np.all(sel.prob_post_clip >= level - 1e-15)
            assert np.all(sel.prob_post_clip <= 1 - level + 1e-15)
            y = x @ beta1 * sel.actions + rng.normal(size=40)
            state = update_state(state, x, sel.actions, y)


class TestUpdateState:
    def test_empty_batch_for_one_arm(self):
        state = PolicyState.empty(2)
        x = np.array([[1.0, 0.0], [0.0, 1.0]])
        new = update_state(state, x, np.array([1, 1]), np.array([1.0, 2.0]))
        np.testing.assert_array_equal(new.gram0, np.zeros((2, 2)))
        np.testing.assert_array_equal(new.moment0, np.zeros(2))
        assert new.count0 == 0 and new.count1 == 2 and new.t == 1

    def test_rank_one_update(self):
        state = PolicyState.empty(2)
        x = np.array([[1.0, 2.0]])
        new = update_state(state, x, np.array([1]), np.array([3.0]))
        np.testing.assert_allclose(new.gram1, np.array([[1.0, 2.0], [2.0, 4.0]]))
        np.testing.assert_allclose(new.moment1, np.array([3.0, 6.0]))

    def test_two_updates_equal_one_combined(self):
        rng = make_rng(4)
        x = rng.uniform(-1, 1, size=(30, 3))
        a = (rng.random(30) < 0.5).astype(int)
        y = rng.normal(size=30)
        s0 = PolicyState.empty(3)
        combined = update_state(s0, x, a, y)
        seq = update_state(update_state(s0, x[:17], a[:17], y[:17]), x[17:], a[17:], y[17:])
        np.testing.assert_allclose(seq.gram1, combined.gram1, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(seq.gram0, combined.gram0, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(seq.moment1, combined.moment1, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(seq.moment0, combined.moment0, rtol=1e-12, atol=1e-14)
        assert seq.count0 == combined.count0 and seq.count1 == combined.count1
        assert seq.t == 2 and combined.t == 1

    def test_dimension_mismatch(self):
        state = PolicyState.empty(2)
        with pytest.raises(ContractError):
            update_state(state, np.ones((3, 2)), np.zeros(2, dtype=int), np.ones(3))
        with pytest.raises(ContractError):
            update_state(state, np.ones((3, 2)), np.array([0, 1, 2]), np.ones(3))


class TestSchedule:
    def test_non_increasing(self):
        s = Schedule(0.5, decay=0.4, floor=0.01)
        vals = [s.value(t) for t in range(1, 200)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_validation(self):
        with pytest.raises(ConfigError):
            Schedule(0.5, decay=-1.0)
        with pytest.raises(ConfigError):
            Schedule(0.5, floor=0.6)
        with pytest.raises(ContractError):
            Schedule(0.5).value(0)
