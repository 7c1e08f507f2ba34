"""Trajectories, observability vectors and reconstruction of observed increments.

Time indices are 1-based throughout the public API: ``positions[t - 1]`` is
the location at time ``t``.

Extraction works on the per-step movement indicator ``moved_t = (s_t != s_{t+1})``.
A flight occupies time ``t`` exactly when ``moved_t`` holds and a pause
occupies it otherwise, so the indicator is the time-indexed flight/pause state.
It is known whenever both ``s_t`` and ``s_{t+1}`` are observed. A flight is
recovered from one known movement step; a pause of duration ``d`` starting at
``a`` needs locations ``a-1 .. a+d+1`` observed so that both flanking flights
are seen.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import FLIGHT, PAUSE, Increment, Motion


@dataclass(frozen=True, eq=False)
class Trajectory:
    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError(f"positions must have shape (T, 2), got {pos.shape}")
        object.__setattr__(self, "positions", pos)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, Trajectory) and np.array_equal(self.positions, other.positions)

    def __hash__(self):
        return hash(self.positions.tobytes())

    def at(self, t: int) -> np.ndarray:
        return self.positions[t - 1]


@dataclass(frozen=True, eq=False)
class ObservedTrajectory:
    """Positions at observed times; missing entries are NaN."""

    positions: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        z = np.asarray(self.z)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError(f"positions must have shape (T, 2), got {pos.shape}")
        if z.shape != (pos.shape[0],):
            raise ValueError("observability vector length does not match the trajectory")
        if not np.isin(z, (0, 1)).all():
            raise ValueError("observability indicators must be 0 or 1")
        z = z.astype(bool)
        pos[~z] = np.nan
        if np.isnan(pos[z]).any():
            raise ValueError("observed time without a position")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "z", z)

    def __len__(self) -> int:
        return self.z.shape[0]

    def __eq__(self, other) -> bool:
        return (isinstance(other, ObservedTrajectory) and np.array_equal(self.z, other.z)
                and np.array_equal(self.positions, other.positions, equal_nan=True))

    @property
    def n_observed(self) -> int:
        return int(self.z.sum())


def motion_to_trajectory(motion: Motion) -> Trajectory:
    """Location at every time step: one per flight, ``duration`` copies per pause."""
    rows = []
    for inc in motion:
        rows.extend([inc.start_pos] * inc.duration)
    return Trajectory(np.array(rows, dtype=float).reshape(-1, 2))


def increment_time_span(inc: Increment) -> tuple[int, ...]:
    return tuple(range(inc.start_time, inc.start_time + inc.duration))


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Block:
    """A maximal run of consecutive observed increments.

    ``run_start`` and ``run_end`` are the first and last times whose movement
    indicator is known in the observed stretch containing the block. The block
    itself starts with the flight at ``first_flight`` and ends with the flight at
    ``last_flight``.
    """

    increments: tuple[Increment, ...]
    run_start: int
    run_end: int

    @property
    def first_flight(self) -> int:
        return self.increments[0].start_time

    @property
    def last_flight(self) -> int:
        return self.increments[-1].start_time

    def __len__(self) -> int:
        return len(self.increments)


@dataclass(frozen=True)
class BlockStats:
    """Boundary statistics of the unresolved stretch between blocks j and j+1.

    d        observed stationary steps after block j's last flight
    g        observed stationary steps before block j+1's first flight
    n        time steps between the last known movement state of block j's
             stretch and the first known state of block j+1's stretch
    interior observed stationary runs that hold no increment, as
             ``(offset, length)`` with offset counted from the start of the
             unresolved span
    """

    d: int
    g: int
    n: int
    interior: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.d < 0 or self.g < 0:
            raise ValueError("d and g must be nonnegative")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        object.__setattr__(self, "interior", tuple((int(o), int(m)) for o, m in self.interior))
        last = 0
        for off, length in self.interior:
            if length < 1 or off <= last or off + length - 1 >= self.n:
                raise ValueError(f"interior run {(off, length)} does not fit inside the span")
            last = off + length - 1

    @property
    def delta(self) -> int:
        return int(self.d == 0)

    @property
    def gamma(self) -> int:
        return int(self.g == 0)


@dataclass(frozen=True)
class ExtractionResult:
    blocks: tuple[Block, ...]
    block_stats: tuple[BlockStats, ...]
    leftover_locations: tuple[int, ...]
    n_times: int
    tolerance: float = 0.0
    stationary_runs: tuple[tuple[int, int], ...] = field(default=(), repr=False)

    @property
    def effective_sample_size(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def increments(self) -> tuple[Increment, ...]:
        return tuple(inc for b in self.blocks for inc in b.increments)


def effective_sample_size(res: ExtractionResult) -> int:
    return res.effective_sample_size


def _known_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True as inclusive 0-based (start, end) pairs."""
    if mask.size == 0:
        return []
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])]


def extract_increments(obs: ObservedTrajectory, tol: float = 0.0) -> ExtractionResult:
    """Recover the observable increments, their blocks and the gap statistics.

    Two positions count as equal when their Euclidean distance is at most
    ``tol``.
    """
    pos = obs.positions
    z = obs.z
    T = len(obs)
    if T < 2:
        return ExtractionResult((), (), tuple(int(t) + 1 for t in np.flatnonzero(z)), T, tol)

    known = z[:-1] & z[1:]
    with np.errstate(invalid="ignore"):
        step = np.linalg.norm(pos[1:] - pos[:-1], axis=1)
    moved = np.zeros(T - 1, dtype=bool)
    moved[known] = step[known] > tol

    blocks: list[Block] = []
    stationary: list[tuple[int, int]] = []
    for a, b in _known_runs(known):
        flights = np.flatnonzero(moved[a:b + 1]) + a
        if flights.size == 0:
            stationary.append((a + 1, b + 1))
            continue
        f, l = int(flights[0]), int(flights[-1])
        incs = []
        i = f
        while i <= l:
            if moved[i]:
                incs.append(Increment(i + 1, pos[i], 1, pos[i + 1] - pos[i], FLIGHT))
                i += 1
            else:
                j = i
                while not moved[j]:
                    j += 1
                incs.append(Increment(i + 1, pos[i], j - i, pos[i] - pos[i - 1], PAUSE))
                i = j
        blocks.append(Block(tuple(incs), a + 1, b + 1))

    stats = []
    for left, right in zip(blocks[:-1], blocks[1:]):
        origin = left.run_end
        interior = tuple((s - origin, e - s + 1) for s, e in stationary
                         if origin < s and e < right.run_start)
        stats.append(BlockStats(
            d=left.run_end - left.last_flight,
            g=right.first_flight - right.run_start,
            n=right.run_start - left.run_end,
            interior=interior,
        ))

    # leftovers: observed times outside the time span of every extracted increment
    used = np.zeros(T, dtype=bool)
    for blk in blocks:
        used[blk.first_flight - 1: blk.last_flight] = True
    leftover = tuple(int(t) + 1 for t in np.flatnonzero(z & ~used))
    return ExtractionResult(tuple(blocks), tuple(stats), leftover, T, tol, tuple(stationary))
