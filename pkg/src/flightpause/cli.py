"""Command-line interface: ``flightpause <subcommand> ...``.

Every subcommand exits with status 0 on success. Failures print
``error [stage]: message`` to stderr and exit with status 2.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .exposure import center_and_bound, evaluate_exposure, sample_hotspot
from .imputation import impute_gaps
from .inference import fit
from .mechanisms import generate_z, mask_trajectory, mechanism_from_dict
from .model import Theta
from .pipeline import RunConfig, StageError, run_pipeline, simulate_all, stream_seed
from .trajectory import Trajectory, extract_increments


def _load_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = RunConfig.from_dict(io.read_json(args.config))
    overrides = {
        "master_seed": getattr(args, "seed", None),
        "out_dir": getattr(args, "out_dir", None),
        "fit_mode": getattr(args, "mode", None),
        "impute_method": getattr(args, "method", None),
        "tolerance": getattr(args, "tolerance", None),
    }
    mech = getattr(args, "mechanism", None)
    if mech:
        overrides["mechanism"] = _parse_mechanism(mech)
    return cfg.with_overrides(**overrides)


def _parse_mechanism(text: str):
    path = Path(text)
    data = io.read_json(path) if path.exists() else json.loads(text)
    return mechanism_from_dict(data)


def _theta_from_args(args):
    if args.theta_json:
        data = io.read_json(args.theta_json)
        if isinstance(data, list):
            data = next((d for d in data if d.get("mode") == "mnar"), data[0])
        return Theta.from_sequence(data["theta_hat"])
    if args.theta:
        return Theta.from_sequence(args.theta)
    return None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.out_dir)
    motions, trajs = simulate_all(cfg)
    for i, (m, tr) in enumerate(zip(motions, trajs)):
        io.write_motion_csv(out / "motions" / f"motion_{i:03d}.csv", m)
        io.write_trajectory_csv(out / "trajectories" / f"trajectory_{i:03d}.csv", tr)
    print(f"wrote {len(trajs)} trajectories to {out}")
    return 0


def cmd_mask(args) -> int:
    obs = io.read_trajectory_csv(args.input)
    cfg = _load_config(args)
    z = generate_z(cfg.mechanism, len(obs), seed=stream_seed(cfg.master_seed, "mask", args.index))
    masked = mask_trajectory(Trajectory(np.where(obs.z[:, None], obs.positions, 0.0)), z & obs.z)
    io.write_trajectory_csv(args.out, masked)
    print(f"observed {masked.n_observed} of {len(masked)} locations")
    return 0


def cmd_extract(args) -> int:
    obs = io.read_trajectory_csv(args.input)
    res = extract_increments(obs, args.tolerance or 0.0)
    payload = io.extraction_to_dict(res)
    if args.out:
        io.write_json(args.out, payload)
    print(f"effective sample size {res.effective_sample_size} in {len(res.blocks)} blocks")
    return 0


def cmd_fit(args) -> int:
    obs = io.read_trajectory_csv(args.input)
    res = extract_increments(obs, args.tolerance or 0.0)
    modes = ("naive", "mnar") if args.mode in (None, "both") else (args.mode,)
    fits = [fit(res, m).to_dict() for m in modes]
    if args.out:
        io.write_json(args.out, fits if len(fits) > 1 else fits[0])
    for f in fits:
        print(f"{f['mode']}: theta_hat={f['theta_hat']} loglik={f['loglik']:.6f} converged={f['converged']}")
    return 0


def cmd_impute(args) -> int:
    obs = io.read_trajectory_csv(args.input)
    res = extract_increments(obs, args.tolerance or 0.0)
    method = args.method or "adjusted"
    theta = _theta_from_args(args)
    if theta is None and method != "linear":
        theta = fit(res, "mnar").theta_hat
    seed = 0 if args.seed is None else args.seed
    imps = impute_gaps(obs, res, theta, method, args.n_imputations, seed=seed)
    io.write_imputations_csv(args.out, imps.trajectories)
    io.write_json(Path(args.out).with_suffix(".json"), imps.metadata())
    print(f"wrote {len(imps)} imputations to {args.out}")
    return 0


def cmd_exposure(args) -> int:
    if len(args.truth) != len(args.imputed):
        raise ValueError("--truth and --imputed need the same number of files")
    truths, sets = [], []
    for t_path, i_path in zip(args.truth, args.imputed):
        obs = io.read_trajectory_csv(t_path)
        if not obs.z.all():
            raise ValueError(f"{t_path}: true trajectories must be fully observed")
        shift = obs.positions.mean(axis=0)
        truths.append(Trajectory(obs.positions))
        sets.append([Trajectory(t.positions - shift) for t in io.read_imputations_csv(i_path)])
    centered, box = center_and_bound(truths)
    seed = 0 if args.seed is None else args.seed
    hotspots = [[sample_hotspot(box, stream_seed(seed, "hotspot", i * args.n_hotspots + j), args.radius)
                 for j in range(args.n_hotspots)] for i in range(len(centered))]
    rep = evaluate_exposure(centered, sets, hotspots)
    payload = rep.to_dict()
    payload["hotspots"] = [[list(h.center) for h in hs] for hs in hotspots]
    if args.out:
        io.write_json(args.out, payload)
    print(f"true-positive rate {rep.true_positive_rate} true-negative rate {rep.true_negative_rate}")
    return 0


def cmd_pipeline(args) -> int:
    cfg = _load_config(args)
    run_pipeline(cfg, cfg.out_dir, jobs=args.jobs)
    print(f"pipeline artifacts written to {cfg.out_dir}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flightpause", description="Flight-pause mobility model toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="run-config JSON file")
        sp.add_argument("--seed", type=int, help="master seed")
        return sp

    sp = common(sub.add_parser("simulate", help="simulate motions and their trajectories"))
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_simulate, stage="simulate")

    sp = common(sub.add_parser("mask", help="apply a data-collection mechanism to a trajectory CSV"))
    sp.add_argument("input")
    sp.add_argument("--mechanism", help="mechanism JSON string or file")
    sp.add_argument("--index", type=int, default=0, help="replicate index of the mask seed stream")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_mask, stage="mask")

    for name in ("extract", "ingest"):
        sp = sub.add_parser(name, help="extract observed increments from a trajectory CSV")
        sp.add_argument("input")
        sp.add_argument("--tolerance", type=float, default=0.0)
        sp.add_argument("--out")
        sp.set_defaults(func=cmd_extract, stage="extract")

    sp = sub.add_parser("fit", help="maximum-likelihood fit from a trajectory CSV")
    sp.add_argument("input")
    sp.add_argument("--mode", choices=("naive", "mnar", "both"), default="both")
    sp.add_argument("--tolerance", type=float, default=0.0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_fit, stage="fit")

    sp = common(sub.add_parser("impute", help="impute the gaps of a trajectory CSV"), config=False)
    sp.add_argument("input")
    sp.add_argument("--method", choices=("linear", "adjusted"), default="adjusted")
    sp.add_argument("--n-imputations", type=int, default=1)
    sp.add_argument("--theta", type=float, nargs=4, metavar=("T1", "T2", "T3", "T4"))
    sp.add_argument("--theta-json", help="fit JSON produced by the fit subcommand")
    sp.add_argument("--tolerance", type=float, default=0.0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_impute, stage="impute")

    sp = common(sub.add_parser("exposure", help="evaluate imputations against true trajectories"), config=False)
    sp.add_argument("--truth", nargs="+", required=True)
    sp.add_argument("--imputed", nargs="+", required=True)
    sp.add_argument("--n-hotspots", type=int, default=1)
    sp.add_argument("--radius", type=float, default=100.0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_exposure, stage="exposure")

    sp = common(sub.add_parser("pipeline", help="run the full simulation study"))
    sp.add_argument("--out-dir")
    sp.add_argument("--mechanism", help="mechanism JSON string or file")
    sp.add_argument("--mode", choices=("naive", "mnar", "both"))
    sp.add_argument("--method", choices=("linear", "adjusted", "both"))
    sp.add_argument("--tolerance", type=float)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_pipeline, stage="pipeline")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
    except (ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error {StageError(args.stage, str(exc))}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
