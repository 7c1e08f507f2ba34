"""Run configuration, named seed streams and the end-to-end experiment pipeline."""
from __future__ import annotations

import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import io
from .exposure import DEFAULT_RADIUS, center_and_bound, evaluate_exposure, inside, sample_hotspot
from .imputation import ImputationMethod, impute_gaps
from .inference import FitMode, fit
from .mechanisms import (OnOff, generate_z, has_alpha, mask_trajectory, mechanism_from_dict,
                         mechanism_to_dict, with_alpha, UnscheduledGap)
from .model import Theta, simulate_motion
from .trajectory import extract_increments, motion_to_trajectory

FIT_MODES = ("naive", "mnar")
IMPUTE_METHODS = ("linear", "adjusted")


class StageError(RuntimeError):
    """Failure inside a named pipeline stage."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


def stream_seed(master: int, stage: str, index: int = 0) -> int:
    """Integer seed for the (stage, index) stream of a master seed."""
    ss = np.random.SeedSequence([int(master), zlib.crc32(stage.encode()), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def _expand(tag: str, choices: tuple[str, ...], parse) -> tuple[str, ...]:
    if tag == "both":
        return choices
    value = parse(tag).value
    if value not in choices:
        raise ValueError(f"unsupported choice {tag!r}")
    return (value,)


@dataclass(frozen=True)
class RunConfig:
    theta: Theta = Theta(0.1, 0.1, 0.95, 1.0)
    t_max: int = 1000
    n_trajectories: int = 100
    mechanism: object = OnOff(25, 25)
    fit_mode: str = "both"
    impute_method: str = "both"
    n_imputations: int = 50
    alpha_grid: tuple[float, ...] = (0.2, 0.5, 0.8)
    master_seed: int = 0
    n_hotspots: int = 1
    radius: float = DEFAULT_RADIUS
    tolerance: float = 0.0
    out_dir: str = "out"
    write_trajectories: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        if self.t_max < 2:
            raise ValueError("t_max must be at least 2")
        if self.n_trajectories < 0:
            raise ValueError("n_trajectories must be nonnegative")
        if self.n_imputations < 1 or self.n_hotspots < 1:
            raise ValueError("n_imputations and n_hotspots must be positive")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")
        if not self.radius > 0 or self.tolerance < 0:
            raise ValueError("radius must be positive and tolerance nonnegative")
        _ = (self.fit_modes, self.impute_methods)
        if any(not 0.0 < a < 1.0 for a in self.alpha_grid):
            raise ValueError("alpha values must lie in (0, 1)")

    @property
    def fit_modes(self) -> tuple[str, ...]:
        return _expand(self.fit_mode, FIT_MODES, FitMode.parse)

    @property
    def impute_methods(self) -> tuple[str, ...]:
        return _expand(self.impute_method, IMPUTE_METHODS, ImputationMethod.parse)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["theta"] = self.theta.as_list()
        out["mechanism"] = mechanism_to_dict(self.mechanism)
        out["alpha_grid"] = list(self.alpha_grid)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "theta" in data:
            data["theta"] = Theta.from_sequence(data["theta"])
        if "mechanism" in data:
            data["mechanism"] = mechanism_from_dict(data["mechanism"])
        return cls(**data)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def mini_config(**kw) -> RunConfig:
    """Small replication: 20 trajectories, 5 hotspots each, 10 imputations, central gap at alpha 0.5."""
    base = RunConfig(n_trajectories=20, n_imputations=10, n_hotspots=5,
                     mechanism=UnscheduledGap(0.5), alpha_grid=(0.5,))
    return replace(base, **kw)


def scheme_name(mech) -> str:
    return type(mech).__name__


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def simulate_all(cfg: RunConfig):
    motions = [simulate_motion(cfg.theta, cfg.t_max, seed=stream_seed(cfg.master_seed, "simulate", i))
               for i in range(cfg.n_trajectories)]
    return motions, [motion_to_trajectory(m) for m in motions]


def replicate(args):
    """Mask, extract, fit and impute one trajectory under one mechanism."""
    cfg, mech, i, truth = args
    stage = "mask"
    try:
        z = generate_z(mech, cfg.t_max, seed=stream_seed(cfg.master_seed, "mask", i))
        obs = mask_trajectory(truth, z)
        stage = "extract"
        res = extract_increments(obs, cfg.tolerance)
        stage = "fit"
        fits = {m: fit(res, m) for m in cfg.fit_modes}
        stage = "impute"
        imps = {}
        for method in cfg.impute_methods:
            theta = None
            if method == "adjusted":
                theta = (fits.get("mnar") or fits["naive"]).theta_hat
            imps[method] = impute_gaps(obs, res, theta, method, cfg.n_imputations,
                                       seed=stream_seed(cfg.master_seed, f"impute-{method}", i))
    except Exception as exc:
        raise StageError(stage, f"trajectory {i}: {exc}") from exc
    return obs, res, fits, imps


def _histograms(fit_rows: list[dict], bins: int = 20) -> list[list]:
    rows = []
    keys = sorted({(r["alpha"], r["scheme"]) for r in fit_rows}, key=lambda k: (str(k[1]), -1 if k[0] is None else k[0]))
    for alpha, scheme in keys:
        sub = [r for r in fit_rows if r["alpha"] == alpha and r["scheme"] == scheme]
        for p in range(4):
            vals = np.array([r["theta_hat"][p] for r in sub])
            lo, hi = float(vals.min()), float(vals.max())
            if hi <= lo:
                lo, hi = lo - 0.5, hi + 0.5
            edges = np.linspace(lo, hi, bins + 1)
            for mode in sorted({r["mode"] for r in sub}):
                counts, _ = np.histogram([r["theta_hat"][p] for r in sub if r["mode"] == mode], edges)
                for b in range(bins):
                    rows.append([scheme, "" if alpha is None else alpha, mode, f"theta{p + 1}",
                                 float(edges[b]), float(edges[b + 1]), int(counts[b])])
    return rows


def run_pipeline(cfg: RunConfig, out_dir=None, jobs: int = 1) -> dict:
    """simulate -> mask -> extract -> fit -> impute -> evaluate, writing all artifacts to ``out_dir``."""
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # the output location is not part of the experiment, so reruns elsewhere stay byte-identical
    io.write_json(out / "config.json", {k: v for k, v in cfg.to_dict().items() if k != "out_dir"})
    if cfg.n_trajectories == 0:
        summary = {"n_trajectories": 0, "reports": []}
        io.write_json(out / "exposure_report.json", summary)
        return summary

    try:
        motions, trajs = simulate_all(cfg)
        centered, box = center_and_bound(trajs)
    except Exception as exc:
        raise StageError("simulate", str(exc)) from exc
    try:
        hotspots = [[sample_hotspot(box, stream_seed(cfg.master_seed, "hotspot", i * cfg.n_hotspots + j), cfg.radius)
                     for j in range(cfg.n_hotspots)] for i in range(cfg.n_trajectories)]
    except Exception as exc:
        raise StageError("exposure", str(exc)) from exc

    variants = ([(a, with_alpha(cfg.mechanism, a)) for a in cfg.alpha_grid]
                if has_alpha(cfg.mechanism) else [(None, cfg.mechanism)])

    fit_rows, rate_rows, long_rows, reports = [], [], [], []
    for i, (tr, hs) in enumerate(zip(centered, hotspots)):
        for j, h in enumerate(hs):
            long_rows.append([i, j, -1, "truth", "", "", int(inside(tr, h).any()), int(inside(tr, h).sum())])

    for alpha, mech in variants:
        scheme = scheme_name(mech)
        tasks = [(cfg, mech, i, tr) for i, tr in enumerate(centered)]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                results = list(ex.map(replicate, tasks))
        else:
            results = [replicate(t) for t in tasks]

        for i, (obs, res, fits, imps) in enumerate(results):
            for mode, fr in fits.items():
                fit_rows.append({"trajectory_id": i, "alpha": alpha, "scheme": scheme,
                                 "effective_sample_size": res.effective_sample_size, **fr.to_dict()})
            if cfg.write_trajectories:
                tag = f"{scheme}" + ("" if alpha is None else f"_a{alpha}")
                io.write_trajectory_csv(out / "observed" / tag / f"trajectory_{i:03d}.csv", obs)
                for method, s in imps.items():
                    io.write_imputations_csv(out / "imputed" / tag / method / f"trajectory_{i:03d}.csv", s)

        try:
            for method in cfg.impute_methods:
                sets = [r[3][method] for r in results]
                rep = evaluate_exposure(centered, sets, hotspots)
                alpha_cell = "" if alpha is None else alpha
                rate_rows.append([scheme, alpha_cell, method, rep.true_positive_rate, rep.true_negative_rate,
                                  rep.true_positive_rate_by_trajectory, rep.true_negative_rate_by_trajectory,
                                  rep.grand_mean_diff, rep.n_positive, rep.n_negative])
                reports.append({"scheme": scheme, "alpha": alpha, "method": method, **rep.to_dict()})
                for i, s in enumerate(sets):
                    for j, h in enumerate(hotspots[i]):
                        for k, imp in enumerate(s):
                            m_in = inside(imp, h)
                            long_rows.append([i, j, k, method, alpha_cell, scheme, int(m_in.any()), int(m_in.sum())])
        except Exception as exc:
            raise StageError("exposure", str(exc)) from exc

    io.write_json(out / "fits.json", fit_rows)
    io.write_csv(out / "fits.csv",
                 ("trajectory_id", "scheme", "alpha", "mode", "theta1", "theta2", "theta3", "theta4",
                  "loglik", "converged", "iterations", "effective_sample_size"),
                 ([r["trajectory_id"], r["scheme"], "" if r["alpha"] is None else r["alpha"], r["mode"],
                   *r["theta_hat"], r["loglik"], int(r["converged"]), r["iterations"],
                   r["effective_sample_size"]] for r in fit_rows))
    io.write_csv(out / "fit_histograms.csv",
                 ("scheme", "alpha", "mode", "parameter", "bin_left", "bin_right", "count"),
                 _histograms(fit_rows))
    io.write_csv(out / "rates.csv",
                 ("scheme", "alpha", "method", "true_positive_rate", "true_negative_rate",
                  "true_positive_rate_by_trajectory", "true_negative_rate_by_trajectory",
                  "grand_mean_diff", "n_positive", "n_negative"), rate_rows)
    io.write_csv(out / "exposure_long.csv",
                 ("trajectory_id", "hotspot_id", "imputation_id", "method", "alpha", "scheme",
                  "passed", "exposure_time"), long_rows)
    summary = {"n_trajectories": cfg.n_trajectories, "reports": reports}
    io.write_json(out / "exposure_report.json", summary)
    return summary
