import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flightpause.imputation import (BridgeSpec, GapPlan, ImputationError, ImputationMethod, bridge_flights_ffbs,
                                    find_gaps, impute_gaps, render_plan, sample_gap_plan)
from flightpause.inference import fit
from flightpause.mechanisms import CompositeGap, GeometricGaps, OnOff, UnscheduledGap, generate_z, mask_trajectory
from flightpause.model import FLIGHT, PAUSE, Theta, simulate_motion
from flightpause.trajectory import ObservedTrajectory, extract_increments, motion_to_trajectory

thetas = st.builds(Theta, st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(-0.95, 0.95),
                   st.floats(0.01, 10.0))


def dense_bridge_moments(n, theta3, theta4, context, total):
    """Conditional mean and covariance of one coordinate's displacements given their sum."""
    L = np.array([[theta3 ** (i - j) if i >= j else 0.0 for j in range(n)] for i in range(n)])
    cov = theta4 * L @ L.T
    powers = theta3 ** np.arange(1, n + 1)
    if context is None:
        mean = np.zeros(n)
        cov = cov + theta4 / (1 - theta3 ** 2) * np.outer(powers, powers)
    else:
        mean = powers * context
    one = np.ones(n)
    gain = cov @ one / (one @ cov @ one)
    return mean + gain * (total - one @ mean), cov - np.outer(gain, one @ cov)


class TestGapPlan:
    @settings(max_examples=100, deadline=None)
    @given(theta=thetas, span=st.integers(1, 200), kind=st.sampled_from([FLIGHT, PAUSE]), seed=st.integers(0, 10**9))
    def test_plan_invariants(self, theta, span, kind, seed):
        plan = sample_gap_plan(theta, kind, span, seed)
        assert plan.total_duration == span
        assert all(d == 1 for k, d in zip(plan.kinds, plan.durations) if k is FLIGHT)
        assert not any(a is PAUSE and b is PAUSE for a, b in zip(plan.kinds[:-1], plan.kinds[1:]))

    def test_degenerate_theta1(self):
        plan = sample_gap_plan(Theta(1e-9, 0.5, 0.0, 1.0), FLIGHT, 10, 0)
        assert plan.kinds == (FLIGHT,) * 10

    def test_single_step(self):
        for seed in range(20):
            plan = sample_gap_plan(Theta(0.5, 0.5, 0.0, 1.0), FLIGHT, 1, seed)
            assert len(plan.kinds) == 1 and plan.durations == (1,)

    def test_deterministic(self):
        th = Theta(0.4, 0.3, 0.0, 1.0)
        assert sample_gap_plan(th, FLIGHT, 40, 5) == sample_gap_plan(th, FLIGHT, 40, 5)

    def test_rejects_bad_span_and_plans(self):
        with pytest.raises(ValueError):
            sample_gap_plan(Theta(0.4, 0.3, 0.0, 1.0), FLIGHT, 0, 1)
        with pytest.raises(ValueError):
            GapPlan((PAUSE, PAUSE), (1, 2))
        with pytest.raises(ValueError):
            GapPlan((FLIGHT,), (2,))

    def test_pause_occupancy_matches_chain(self):
        t1, t2, span, reps = 0.5, 0.3, 40, 10_000
        q = np.array([[1 - t1, t1], [t2, 1 - t2]])
        # the plan's first step follows a flight; occupancy averages the chain's pause probability over the span
        expected = np.mean([np.linalg.matrix_power(q, k)[0, 1] for k in range(1, span + 1)])
        rng = np.random.default_rng(1)
        fracs = []
        for _ in range(reps):
            plan = sample_gap_plan(Theta(t1, t2, 0.0, 1.0), FLIGHT, span, rng)
            fracs.append(sum(d for k, d in zip(plan.kinds, plan.durations) if k is PAUSE) / span)
        fracs = np.array(fracs)
        assert abs(fracs.mean() - expected) < 3 * fracs.std(ddof=1) / math.sqrt(reps)

    def test_running_pause_continues(self):
        t2 = 0.2
        rng = np.random.default_rng(3)
        starts = [sample_gap_plan(Theta(0.5, t2, 0.0, 1.0), PAUSE, 5, rng).kinds[0] is PAUSE for _ in range(20_000)]
        p = 1 - t2
        assert abs(np.mean(starts) - p) < 3 * math.sqrt(p * (1 - p) / 20_000)


class TestBridge:
    theta = Theta(0.1, 0.1, 0.95, 1.0)

    def test_single_flight_is_fixed(self):
        spec = BridgeSpec((1.0, 2.0), (4.0, -2.0), (0.5, 0.5), 1, self.theta)
        for seed in range(5):
            np.testing.assert_array_equal(bridge_flights_ffbs(spec, seed), [[3.0, -4.0]])

    @settings(max_examples=60, deadline=None)
    @given(theta=thetas, n=st.integers(1, 60), seed=st.integers(0, 10**9),
           end=st.tuples(st.floats(-500, 500), st.floats(-500, 500)), ctx=st.booleans())
    def test_endpoint_identity(self, theta, n, seed, end, ctx):
        spec = BridgeSpec((3.0, -7.0), end, (1.0, -2.0) if ctx else None, n, theta)
        d = bridge_flights_ffbs(spec, seed)
        assert d.shape == (n, 2)
        gap = np.asarray(end) - [3.0, -7.0]
        assert np.all(np.abs(d.sum(axis=0) - gap) < 1e-9 * max(1.0, np.abs(gap).max()))

    def test_two_flights_without_context(self):
        spec = BridgeSpec((0.0, 0.0), (6.0, -2.0), None, 2, Theta(0.1, 0.1, 0.0, 1.0))
        draws = np.array([bridge_flights_ffbs(spec, s) for s in range(4000)])
        mean, cov = dense_bridge_moments(2, 0.0, 1.0, None, 6.0)
        np.testing.assert_allclose(mean, [3.0, 3.0])
        se = math.sqrt(cov[0, 0] / 4000)
        assert np.all(np.abs(draws[:, :, 0].mean(axis=0) - 3.0) < 3 * se)
        assert np.all(np.abs(draws[:, :, 1].mean(axis=0) + 1.0) < 3 * se)

    @pytest.mark.parametrize("n", [2, 3, 5])
    @pytest.mark.parametrize("context", [None, (1.5, -0.5)])
    def test_covariance_matches_dense_oracle(self, n, context):
        reps = 10_000
        spec = BridgeSpec((0.0, 0.0), (4.0, 1.0), context, n, self.theta)
        rng = np.random.default_rng(7)
        draws = np.array([bridge_flights_ffbs(spec, rng) for _ in range(reps)])
        for c, total in enumerate((4.0, 1.0)):
            mean, cov = dense_bridge_moments(n, 0.95, 1.0, None if context is None else context[c], total)
            emp = np.cov(draws[:, :, c], rowvar=False)
            # standard error of a sample covariance entry under normality
            se = np.sqrt((cov ** 2 + np.outer(np.diag(cov), np.diag(cov))) / reps)
            assert np.all(np.abs(emp - cov) < 4 * se + 1e-12)
            assert np.all(np.abs(draws[:, :, c].mean(axis=0) - mean) < 3 * np.sqrt(np.diag(cov) / reps) + 1e-12)

    def test_rejects_empty_bridge(self):
        with pytest.raises(ValueError):
            BridgeSpec((0, 0), (1, 1), None, 0, self.theta)


def test_render_plan():
    plan = GapPlan((FLIGHT, PAUSE, FLIGHT), (1, 2, 1))
    np.testing.assert_array_equal(render_plan(plan, np.array([[1.0, 0.0], [0.0, 2.0]])),
                                  [[1, 0], [1, 0], [1, 0], [1, 2]])


def test_find_gaps():
    z = np.array([0, 1, 1, 0, 0, 1, 0], dtype=bool)
    assert [(g.u, g.v, g.at_start, g.at_end) for g in find_gaps(z)] == [
        (1, 1, True, False), (4, 5, False, False), (7, 7, False, True)]


class TestImputeGaps:
    def test_linear_example(self):
        pos = np.zeros((6, 2))
        pos[5] = (10.0, 0.0)
        obs = ObservedTrajectory(pos, [1, 0, 0, 0, 0, 1])
        out = impute_gaps(obs, None, None, "linear")[0].positions
        np.testing.assert_allclose(out[1:5], [[2, 0], [4, 0], [6, 0], [8, 0]], atol=1e-12)

    def test_linear_edges_repeat_nearest(self):
        obs = ObservedTrajectory(np.arange(10.0).reshape(5, 2), [0, 1, 1, 0, 0])
        res = impute_gaps(obs, None, None, "linear")
        np.testing.assert_array_equal(res[0].positions, [[2, 3], [2, 3], [4, 5], [4, 5], [4, 5]])
        assert res.edge_gaps == ((1, 1), (4, 5))

    @pytest.mark.parametrize("mech", [OnOff(25, 25), UnscheduledGap(0.5), CompositeGap(0.5, 25, 25),
                                      GeometricGaps(0.4)])
    def test_parametric_continuity(self, mech, study_theta):
        traj = motion_to_trajectory(simulate_motion(study_theta, 1000, seed=2))
        obs = mask_trajectory(traj, generate_z(mech, 1000, seed=5))
        res = extract_increments(obs)
        imps = impute_gaps(obs, res, fit(res, "mnar").theta_hat, "adjusted", 50, seed=11)
        assert len(imps) == 50
        for tr in imps:
            assert np.isfinite(tr.positions).all()
            np.testing.assert_array_equal(tr.positions[obs.z], obs.positions[obs.z])
        assert len({tr.positions.tobytes() for tr in imps}) == 50

    def test_deterministic_given_seed(self, study_theta):
        traj = motion_to_trajectory(simulate_motion(study_theta, 300, seed=2))
        obs = mask_trajectory(traj, generate_z(OnOff(25, 25), 300))
        a = impute_gaps(obs, None, study_theta, "adjusted", 3, seed=4)
        b = impute_gaps(obs, None, study_theta, "adjusted", 3, seed=4)
        assert a.trajectories == b.trajectories
        assert a.metadata()["method"] == "adjusted" and a.metadata()["seed"] == 4

    def test_linear_limit(self, study_theta):
        traj = motion_to_trajectory(simulate_motion(study_theta, 400, seed=8))
        obs = mask_trajectory(traj, generate_z(UnscheduledGap(0.5), 400))
        lin = impute_gaps(obs, None, None, "linear")[0].positions
        near = impute_gaps(obs, None, Theta(1e-9, 0.5, 0.0, 1e-12), "adjusted", 5, seed=1)
        for tr in near:
            assert np.abs(tr.positions - lin).max() < 1e-3

    def test_autoregression_breaks_linear_limit(self, study_theta):
        # with strong autoregression the bridge mean bends toward the previous heading
        z = np.ones(60, dtype=bool)
        z[20:40] = False
        pos = np.zeros((60, 2))
        pos[:20, 0] = np.arange(20) * 3.0
        pos[40:, 0] = pos[19, 0] + 3.0
        obs = ObservedTrajectory(pos, z)
        lin = impute_gaps(obs, None, None, "linear")[0].positions
        near = impute_gaps(obs, None, Theta(1e-9, 0.5, 0.9, 1e-12), "adjusted", 1, seed=1)[0].positions
        assert np.abs(near - lin).max() > 1.0

    def test_errors(self, study_theta):
        empty = ObservedTrajectory(np.zeros((4, 2)), np.zeros(4))
        with pytest.raises(ImputationError):
            impute_gaps(empty, None, study_theta, "adjusted")
        obs = ObservedTrajectory(np.zeros((4, 2)), [1, 0, 1, 1])
        with pytest.raises(ValueError):
            impute_gaps(obs, None, None, "adjusted")
        with pytest.raises(ValueError):
            impute_gaps(obs, None, study_theta, "linear", 0)
        with pytest.raises(ValueError):
            ImputationMethod.parse("spline")
        assert ImputationMethod.parse("AdjustedParametric") is ImputationMethod.ADJUSTED_PARAMETRIC
