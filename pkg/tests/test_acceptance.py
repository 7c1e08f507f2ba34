"""Acceptance suite: one test and one printed PASS/FAIL line per criterion."""
import csv
import itertools
import math
import time
from collections import defaultdict

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, observable_count
from flightpause import io
from flightpause.imputation import BridgeSpec, bridge_flights_ffbs
from flightpause.inference import (brute_force_gap_log_likelihood, fit, mnar_adjusted_log_likelihood,
                                   naive_mar_log_likelihood, two_state_nstep)
from flightpause.mechanisms import CompositeGap, GeometricGaps, OnOff, UnscheduledGap, generate_z, mask_trajectory
from flightpause.model import FLIGHT, PAUSE, Theta, simulate_motion
from flightpause.pipeline import mini_config, run_pipeline
from flightpause.trajectory import ObservedTrajectory, extract_increments, motion_to_trajectory

from test_imputation import dense_bridge_moments

TRUTH = Theta(0.1, 0.1, 0.95, 1.0)
N_REPLICATES = 50


def record(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def tree(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def on_off_replicates():
    z = generate_z(OnOff(25, 25), 1000)
    out = []
    for seed in range(N_REPLICATES):
        traj = motion_to_trajectory(simulate_motion(TRUTH, 1000, seed=seed))
        out.append(extract_increments(mask_trajectory(traj, z)))
    return out


def test_criterion_1_chain_power():
    grid = (0.1, 0.3, 0.5, 0.7, 0.9)
    start = time.perf_counter()
    worst = 0.0
    for t1, t2 in itertools.product(grid, grid):
        q = np.array([[1 - t1, t1], [t2, 1 - t2]])
        power = np.eye(2)
        for n in range(1, 201):
            power = power @ q
            worst = max(worst, np.abs(two_state_nstep(t1, t2, n) - power).max())
    elapsed = time.perf_counter() - start
    record(1, worst <= 1e-12 and elapsed < 1.0, f"max entry error {worst:.2e} (tol 1e-12), {elapsed:.3f} s (< 1 s)")


def test_criterion_2_mnar_oracle():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    instances, worst, combos, seed = 0, 0.0, set(), 0
    while instances < 150 or len(combos) < 4:
        seed += 1
        truth = Theta(*rng.uniform([0.1, 0.1, -0.8, 0.3], [0.7, 0.8, 0.9, 2.0]))
        theta = Theta(*rng.uniform([0.05, 0.05, -0.9, 0.2], [0.95, 0.95, 0.95, 3.0]))
        traj = motion_to_trajectory(simulate_motion(truth, 80, seed=seed))
        res = extract_increments(mask_trajectory(traj, generate_z(GeometricGaps(rng.uniform(0.6, 0.9)), 80, seed=seed)))
        if len(res.blocks) < 2 or any(s.n > 12 for s in res.block_stats):
            continue
        instances += 1
        combos |= {(s.delta, s.gamma) for s in res.block_stats}
        bf = math.fsum(brute_force_gap_log_likelihood((FLIGHT, FLIGHT), s, theta) for s in res.block_stats)
        worst = max(worst, abs(mnar_adjusted_log_likelihood(res, theta) - naive_mar_log_likelihood(res, theta) - bf))
    elapsed = time.perf_counter() - start
    record(2, worst <= 1e-8 and len(combos) == 4 and elapsed < 60,
           f"{instances} instances, (delta, gamma) combos {sorted(combos)}, max error {worst:.2e} (tol 1e-8), "
           f"{elapsed:.1f} s (< 60 s)")


def test_criterion_3_roundtrip_extraction():
    bad = []
    for seed in range(N_REPLICATES):
        m = simulate_motion(TRUTH, 1000, seed=seed)
        traj = motion_to_trajectory(m)
        res = extract_increments(ObservedTrajectory(traj.positions, np.ones(1000, dtype=bool)))
        k = observable_count(m, 1000)
        if res.increments != m.increments[:k] or res.effective_sample_size != k or len(m) - k not in (1, 2):
            bad.append(seed)
    record(3, not bad, f"{N_REPLICATES} full-observation motions, mismatching seeds {bad}")


def test_criterion_4_bias_replication(on_off_replicates):
    start = time.perf_counter()
    naive = np.array([fit(r, "naive").theta_hat.as_list() for r in on_off_replicates])
    adjusted = np.array([fit(r, "mnar").theta_hat.as_list() for r in on_off_replicates])
    elapsed = time.perf_counter() - start
    truth = np.array(TRUTH.as_list())

    naive_share = float(np.mean(naive[:, 0] >= 0.95))
    se = adjusted.std(axis=0, ddof=1) / math.sqrt(N_REPLICATES)
    z = (adjusted.mean(axis=0) - truth) / se
    bias_naive = np.abs(naive.mean(axis=0) - truth)
    bias_adj = np.abs(adjusted.mean(axis=0) - truth)
    parts = {
        "naive theta1 >= 0.95 in >= 90%": naive_share >= 0.9,
        "adjusted within 3 SE": bool(np.all(np.abs(z) <= 3)),
        "adjusted bias smaller for theta1, theta2": bool(np.all(bias_adj[:2] < bias_naive[:2])),
        "runtime < 15 min": elapsed < 900,
    }
    detail = (f"naive share {naive_share:.2f}, naive mean {np.round(naive.mean(axis=0), 4).tolist()}, "
              f"adjusted mean {np.round(adjusted.mean(axis=0), 4).tolist()}, adjusted z {np.round(z, 2).tolist()}, "
              f"|bias| naive {np.round(bias_naive[:2], 4).tolist()} vs adjusted {np.round(bias_adj[:2], 4).tolist()}, "
              f"{elapsed:.1f} s; failed parts: {[k for k, v in parts.items() if not v] or 'none'}")
    record(4, all(parts.values()), detail)


def test_criterion_5_ess_degeneracy(on_off_replicates):
    alternating = np.arange(1000) % 2 == 0
    ess = []
    for seed in range(N_REPLICATES):
        traj = motion_to_trajectory(simulate_motion(TRUTH, 1000, seed=seed))
        for z in (alternating, ~alternating):
            ess.append(extract_increments(mask_trajectory(traj, z)).effective_sample_size)
    long_pauses = sum(inc.duration >= 25 for r in on_off_replicates for inc in r.increments if inc.kind is PAUSE)
    record(5, max(ess) == 0 and long_pauses == 0,
           f"alternating max ESS {max(ess)}, on-off observed pauses of duration >= 25: {long_pauses}")


def test_criterion_6_bridge():
    theta = TRUTH
    draws_n = 10_000
    rng = np.random.default_rng(6)
    worst_z, worst_end = 0.0, 0.0
    start_pos, end_pos = np.array([2.0, -1.0]), np.array([7.5, 3.0])
    total = end_pos - start_pos
    for n in range(1, 7):
        for context in (None, (1.2, -0.4)):
            spec = BridgeSpec(tuple(start_pos), tuple(end_pos), context, n, theta)
            draws = np.array([bridge_flights_ffbs(spec, rng) for _ in range(draws_n)])
            worst_end = max(worst_end, np.abs(draws.sum(axis=1) - total).max())
            for c in range(2):
                mean, cov = dense_bridge_moments(n, theta.theta3, theta.theta4,
                                                 None if context is None else context[c], total[c])
                sd = np.sqrt(np.clip(np.diag(cov), 0.0, None) / draws_n)
                gap = np.abs(draws[:, :, c].mean(axis=0) - mean)
                if n > 1:
                    worst_z = max(worst_z, float((gap / sd).max()))
    single = BridgeSpec(tuple(start_pos), tuple(end_pos), (1.0, 1.0), 1, theta)
    deterministic = all(np.array_equal(bridge_flights_ffbs(single, s), [total]) for s in range(20))
    record(6, worst_z <= 3 and worst_end <= 1e-9 and deterministic,
           f"max mean deviation {worst_z:.2f} SE (<= 3), max endpoint error {worst_end:.1e} (<= 1e-9), "
           f"single flight deterministic {deterministic}")


def test_criterion_7_continuity(tmp_path):
    schemes = (UnscheduledGap(0.5), OnOff(25, 25), CompositeGap(0.5, 25, 25))
    checked, bad = 0, []
    for master_seed, mech in itertools.product((0, 1), schemes):
        out = tmp_path / f"{type(mech).__name__}_{master_seed}"
        run_pipeline(mini_config(mechanism=mech, master_seed=master_seed, write_trajectories=True), out)
        for obs_path in sorted((out / "observed").rglob("*.csv")):
            obs = io.read_trajectory_csv(obs_path)
            tag = obs_path.parent.name
            for method in ("linear", "adjusted"):
                for k, imp in enumerate(io.read_imputations_csv(out / "imputed" / tag / method / obs_path.name)):
                    checked += 1
                    if not (len(imp) == len(obs) and np.isfinite(imp.positions).all()
                            and np.array_equal(imp.positions[obs.z], obs.positions[obs.z])):
                        bad.append((tag, method, master_seed, obs_path.name, k))
    record(7, checked > 0 and not bad, f"{checked} imputed trajectories over 3 schemes, 2 methods, 2 seeds; "
           f"violations {bad[:5]}")


def pair_rates(path):
    """Per (trajectory, hotspot) agreement rates of each method, read from the long exposure table."""
    truth, hits = {}, defaultdict(list)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (int(row["trajectory_id"]), int(row["hotspot_id"]))
            if row["method"] == "truth":
                truth[key] = row["passed"] == "1"
            else:
                hits[row["method"], key].append(row["passed"] == "1")
    rates = {m: {k: np.mean(np.array(v) == truth[k]) for (mm, k), v in hits.items() if mm == m}
             for m in {m for m, _ in hits}}
    return truth, rates


def test_criterion_8_exposure_ordering(tmp_path):
    start = time.perf_counter()
    cfg = mini_config()
    run_pipeline(cfg, tmp_path)
    elapsed = time.perf_counter() - start
    truth, rates = pair_rates(tmp_path / "exposure_long.csv")
    positives = sorted(k for k, v in truth.items() if v)
    adj = np.array([rates["adjusted"][k] for k in positives])
    lin = np.array([rates["linear"][k] for k in positives])
    diff = adj - lin
    se = diff.std(ddof=1) / math.sqrt(diff.size) if diff.size > 1 else 0.0
    # one-sided test of "adjusted below linear"; the ordering stands unless rejected at 0.05
    t = diff.mean() / se if se > 0 else (0.0 if diff.mean() == 0 else math.copysign(math.inf, diff.mean()))
    ok = diff.size > 0 and t > -1.6449 and elapsed < 600
    record(8, ok, f"{diff.size} positive pairs, true-positive rate adjusted {adj.mean():.4f} vs linear "
           f"{lin.mean():.4f}, paired t {t:.2f} (> -1.645), {elapsed:.1f} s (< 600 s)")


def test_criterion_9_determinism(tmp_path):
    cfg = mini_config()
    run_pipeline(cfg, tmp_path / "a")
    run_pipeline(cfg, tmp_path / "b")
    a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
    differing = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    record(9, len(a) >= 7 and not differing, f"{len(a)} artifacts compared, differing {differing}")
