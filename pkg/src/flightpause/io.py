"""CSV and JSON serialization of motions, trajectories, extraction results and reports.

Floats are written with ``repr`` so that files round-trip exactly and reruns are
byte-identical.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import Increment, IncrementType, Motion
from .trajectory import ExtractionResult, ObservedTrajectory, Trajectory

MOTION_COLUMNS = ("k", "start_time", "start_x", "start_y", "duration", "disp_x", "disp_y", "kind")
TRAJECTORY_COLUMNS = ("t", "x", "y", "observed")


class SchemaError(ValueError):
    """A file does not match its declared schema; ``line`` is 1-based and counts the header."""

    def __init__(self, path, line: int | None, message: str):
        self.path, self.line = str(path), line
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")


def fmt(x: float) -> str:
    return repr(float(x))


def _write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    _write_rows(path, header, ([fmt(v) if isinstance(v, float) else v for v in r] for r in rows))


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n")


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(obj) else float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None


def _read_table(path, columns: Sequence[str]):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(path, 1, "empty file") from None
        header = [h.strip() for h in header]
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaError(path, 1, f"missing columns {missing}")
        idx = [header.index(c) for c in columns]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(path, lineno, f"expected {len(header)} fields, found {len(row)}")
            yield lineno, [row[i].strip() for i in idx], dict(zip(header, row))


def _num(path, lineno, value: str, name: str, kind=float):
    try:
        v = kind(value)
    except ValueError:
        raise SchemaError(path, lineno, f"column {name!r}: cannot parse {value!r}") from None
    if kind is float and not math.isfinite(v):
        raise SchemaError(path, lineno, f"column {name!r}: non-finite value")
    return v


# ---------------------------------------------------------------------------
# Motions
# ---------------------------------------------------------------------------

def write_motion_csv(path, motion: Motion) -> None:
    write_csv(path, MOTION_COLUMNS, (
        (k, inc.start_time, inc.start_pos[0], inc.start_pos[1], inc.duration,
         inc.displacement[0], inc.displacement[1], inc.kind.value)
        for k, inc in enumerate(motion, start=1)))


def read_motion_csv(path) -> Motion:
    incs = []
    for lineno, (k, t, x, y, d, dx, dy, kind), _ in _read_table(path, MOTION_COLUMNS):
        try:
            kind = IncrementType.parse(kind)
        except ValueError:
            raise SchemaError(path, lineno, f"column 'kind': expected 'f' or 'p', got {kind!r}") from None
        if _num(path, lineno, k, "k", int) != len(incs) + 1:
            raise SchemaError(path, lineno, "increment index out of sequence")
        incs.append(Increment(_num(path, lineno, t, "start_time", int),
                              (_num(path, lineno, x, "start_x"), _num(path, lineno, y, "start_y")),
                              _num(path, lineno, d, "duration", int),
                              (_num(path, lineno, dx, "disp_x"), _num(path, lineno, dy, "disp_y")), kind))
    return Motion(tuple(incs))


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def _trajectory_rows(positions: np.ndarray, z: np.ndarray, prefix=()):
    for t, (p, seen) in enumerate(zip(positions, z), start=1):
        if seen:
            yield (*prefix, t, fmt(p[0]), fmt(p[1]), 1)
        else:
            yield (*prefix, t, "", "", 0)


def write_trajectory_csv(path, traj: Trajectory | ObservedTrajectory) -> None:
    z = traj.z if isinstance(traj, ObservedTrajectory) else np.ones(len(traj), dtype=bool)
    _write_rows(path, TRAJECTORY_COLUMNS, _trajectory_rows(traj.positions, z))


def read_trajectory_csv(path) -> ObservedTrajectory:
    rows, zs = [], []
    for lineno, (t, x, y, obs), _ in _read_table(path, TRAJECTORY_COLUMNS):
        if _num(path, lineno, t, "t", int) != len(rows) + 1:
            raise SchemaError(path, lineno, f"time index {t!r} out of sequence (expected {len(rows) + 1})")
        if obs not in ("0", "1"):
            raise SchemaError(path, lineno, f"column 'observed' must be 0 or 1, got {obs!r}")
        if obs == "1":
            rows.append((_num(path, lineno, x, "x"), _num(path, lineno, y, "y")))
        else:
            if x or y:
                raise SchemaError(path, lineno, "unobserved row must leave x and y empty")
            rows.append((math.nan, math.nan))
        zs.append(obs == "1")
    if not rows:
        raise SchemaError(path, None, "no data rows")
    return ObservedTrajectory(np.array(rows, dtype=float), np.array(zs, dtype=bool))


def write_imputations_csv(path, trajs: Sequence[Trajectory]) -> None:
    rows = []
    for i, tr in enumerate(trajs):
        rows.extend(_trajectory_rows(tr.positions, np.ones(len(tr), dtype=bool), prefix=(i,)))
    _write_rows(path, ("imputation_id",) + TRAJECTORY_COLUMNS, rows)


def read_imputations_csv(path) -> list[Trajectory]:
    groups: dict[int, list] = {}
    for lineno, (i, t, x, y, obs), _ in _read_table(path, ("imputation_id",) + TRAJECTORY_COLUMNS):
        i = _num(path, lineno, i, "imputation_id", int)
        pts = groups.setdefault(i, [])
        if _num(path, lineno, t, "t", int) != len(pts) + 1:
            raise SchemaError(path, lineno, "time index out of sequence")
        if obs != "1":
            raise SchemaError(path, lineno, "imputed trajectories must be complete")
        pts.append((_num(path, lineno, x, "x"), _num(path, lineno, y, "y")))
    return [Trajectory(np.array(groups[k])) for k in sorted(groups)]


# ---------------------------------------------------------------------------
# Extraction results
# ---------------------------------------------------------------------------

def extraction_to_dict(res: ExtractionResult) -> dict:
    return {
        "n_times": res.n_times,
        "tolerance": res.tolerance,
        "effective_sample_size": res.effective_sample_size,
        "n_blocks": len(res.blocks),
        "n_pauses": sum(1 for inc in res.increments if not inc.is_flight),
        "blocks": [
            {"run_start": b.run_start, "run_end": b.run_end,
             "increments": [[inc.start_time, inc.start_pos[0], inc.start_pos[1], inc.duration,
                             inc.displacement[0], inc.displacement[1], inc.kind.value]
                            for inc in b.increments]}
            for b in res.blocks],
        "block_stats": [{"d": s.d, "g": s.g, "n": s.n, "interior": [list(r) for r in s.interior]}
                        for s in res.block_stats],
        "leftover_locations": list(res.leftover_locations),
    }
