"""Exposure hot-spots, exposure time and agreement rates between true and imputed trajectories."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .trajectory import Trajectory

DEFAULT_RADIUS = 100.0


@dataclass(frozen=True)
class BoundingBox:
    lower: tuple[float, float]
    upper: tuple[float, float]

    @property
    def sides(self) -> tuple[float, float]:
        return (self.upper[0] - self.lower[0], self.upper[1] - self.lower[1])

    @property
    def degenerate(self) -> bool:
        return min(self.sides) <= 0.0

    def contains(self, points) -> bool:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return bool(np.all(p >= np.asarray(self.lower)) and np.all(p <= np.asarray(self.upper)))


@dataclass(frozen=True)
class Hotspot:
    center: tuple[float, float]
    radius: float = DEFAULT_RADIUS

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if not self.radius > 0:
            raise ValueError("hotspot radius must be positive")

    def translated(self, offset) -> "Hotspot":
        return Hotspot((self.center[0] + offset[0], self.center[1] + offset[1]), self.radius)


def center_and_bound(trajs: Sequence[Trajectory]) -> tuple[list[Trajectory], BoundingBox]:
    """Shift each trajectory by minus its time-average position and bound the result."""
    if not trajs:
        raise ValueError("need at least one trajectory")
    shifted = [Trajectory(t.positions - t.positions.mean(axis=0)) for t in trajs]
    allpos = np.concatenate([t.positions for t in shifted])
    lo, hi = allpos.min(axis=0), allpos.max(axis=0)
    return shifted, BoundingBox((float(lo[0]), float(lo[1])), (float(hi[0]), float(hi[1])))


def sample_hotspot(box: BoundingBox, seed=None, radius: float = DEFAULT_RADIUS) -> Hotspot:
    """Centre drawn coordinatewise from Normal(0, (side / 3)**2)."""
    if box.degenerate:
        raise ValueError("cannot place hotspots in a degenerate bounding box")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sd = np.asarray(box.sides) / 3.0
    c = sd * rng.standard_normal(2)
    return Hotspot((float(c[0]), float(c[1])), radius)


def inside(traj: Trajectory, h: Hotspot) -> np.ndarray:
    """Per-time membership of the open ball around the hotspot."""
    diff = traj.positions - np.asarray(h.center)
    return np.hypot(diff[:, 0], diff[:, 1]) < h.radius


def exposure_time(traj: Trajectory, h: Hotspot) -> int:
    return int(np.count_nonzero(inside(traj, h)))


def passes(traj: Trajectory, h: Hotspot) -> bool:
    return bool(inside(traj, h).any())


@dataclass(frozen=True)
class ExposureReport:
    """Agreement of imputations with the truth on hotspot pass-through and exposure time.

    Rates are averaged over (trajectory, hotspot) pairs; ``*_by_trajectory``
    first pools all hotspots of a trajectory. ``exposure_time_diffs`` has shape
    (trajectories, hotspots, imputations) and holds true minus imputed time.
    """

    true_positive_rate: float
    true_negative_rate: float
    exposure_time_diffs: np.ndarray
    grand_mean_diff: float
    true_positive_rate_by_trajectory: float
    true_negative_rate_by_trajectory: float
    pair_pass_rates: np.ndarray = field(repr=False)
    truth_passes: np.ndarray = field(repr=False)
    n_positive: int = 0
    n_negative: int = 0

    def to_dict(self) -> dict:
        def num(x):
            return None if x is None or (isinstance(x, float) and math.isnan(x)) else float(x)
        return {
            "true_positive_rate": num(self.true_positive_rate),
            "true_negative_rate": num(self.true_negative_rate),
            "true_positive_rate_by_trajectory": num(self.true_positive_rate_by_trajectory),
            "true_negative_rate_by_trajectory": num(self.true_negative_rate_by_trajectory),
            "grand_mean_diff": num(self.grand_mean_diff),
            "n_positive": int(self.n_positive),
            "n_negative": int(self.n_negative),
            "exposure_time_diffs": self.exposure_time_diffs.astype(int).tolist(),
        }


def _mean_or_nan(x: np.ndarray) -> float:
    return float(np.mean(x)) if x.size else math.nan


def evaluate_exposure(true_trajs: Sequence[Trajectory], imputed_sets: Sequence[Sequence[Trajectory]],
                      hotspots: Sequence[Sequence[Hotspot]]) -> ExposureReport:
    """Compare imputations against the truth for every trajectory and its hotspots.

    ``imputed_sets[i]`` are the imputations of trajectory ``i`` and
    ``hotspots[i]`` its hotspots. A (trajectory, hotspot) pair is positive when
    the true trajectory enters the hotspot's ball.
    """
    n = len(true_trajs)
    if len(imputed_sets) != n or len(hotspots) != n:
        raise ValueError("true trajectories, imputations and hotspots are not aligned")
    if n == 0:
        raise ValueError("need at least one trajectory")
    n_h = len(hotspots[0])
    n_imp = len(imputed_sets[0])
    if n_h == 0 or n_imp == 0 or any(len(h) != n_h for h in hotspots) or any(len(s) != n_imp for s in imputed_sets):
        raise ValueError("every trajectory needs the same positive number of hotspots and imputations")

    truth_pass = np.zeros((n, n_h), dtype=bool)
    rate = np.zeros((n, n_h))
    diffs = np.zeros((n, n_h, n_imp), dtype=np.int64)
    for i, (truth, imps, hs) in enumerate(zip(true_trajs, imputed_sets, hotspots)):
        for j, h in enumerate(hs):
            true_in = inside(truth, h)
            truth_pass[i, j] = true_in.any()
            e_true = int(true_in.sum())
            agree = 0
            for k, imp in enumerate(imps):
                if len(imp) != len(truth):
                    raise ValueError(f"imputation {k} of trajectory {i} has the wrong length")
                imp_in = inside(imp, h)
                agree += int(imp_in.any() == truth_pass[i, j])
                diffs[i, j, k] = e_true - int(imp_in.sum())
            rate[i, j] = agree / n_imp

    pos, neg = truth_pass, ~truth_pass
    # per-trajectory pooling: mean agreement over that trajectory's positive (negative) hotspots
    by_traj_pos = [rate[i, pos[i]].mean() for i in range(n) if pos[i].any()]
    by_traj_neg = [rate[i, neg[i]].mean() for i in range(n) if neg[i].any()]
    return ExposureReport(
        true_positive_rate=_mean_or_nan(rate[pos]),
        true_negative_rate=_mean_or_nan(rate[neg]),
        exposure_time_diffs=diffs,
        grand_mean_diff=float(diffs.mean()),
        true_positive_rate_by_trajectory=_mean_or_nan(np.array(by_traj_pos)),
        true_negative_rate_by_trajectory=_mean_or_nan(np.array(by_traj_neg)),
        pair_pass_rates=rate,
        truth_passes=truth_pass,
        n_positive=int(pos.sum()),
        n_negative=int(neg.sum()),
    )
