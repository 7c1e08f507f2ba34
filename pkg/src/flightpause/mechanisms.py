"""Data-collection mechanisms: observability vectors for location sequences."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .trajectory import ObservedTrajectory, Trajectory


@dataclass(frozen=True)
class OnOff:
    """Record ``o`` consecutive locations, then skip ``u``; repeat."""

    o: int
    u: int
    phase: int = 0

    def __post_init__(self):
        if self.o < 1 or self.u < 1:
            raise ValueError("on-off periods must be positive integers")
        if self.phase < 0:
            raise ValueError("phase must be nonnegative")


@dataclass(frozen=True)
class GeometricGaps:
    """Each location recorded independently with probability ``eta``."""

    eta: float

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")


@dataclass(frozen=True)
class UnscheduledGap:
    """A single missing stretch of length ``alpha * t_max`` centred in the trajectory."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class CompositeGap:
    """An unscheduled central gap on top of an on-off schedule."""

    alpha: float
    o: int
    u: int
    phase: int = 0

    def __post_init__(self):
        UnscheduledGap(self.alpha)
        OnOff(self.o, self.u, self.phase)


@dataclass(frozen=True)
class MovementTriggered:
    pass


@dataclass(frozen=True)
class FullObservation:
    pass


MechanismConfig = OnOff | GeometricGaps | UnscheduledGap | CompositeGap | MovementTriggered | FullObservation

_VARIANTS = {cls.__name__: cls for cls in
             (OnOff, GeometricGaps, UnscheduledGap, CompositeGap, MovementTriggered, FullObservation)}


def mechanism_to_dict(cfg) -> dict:
    return {"type": type(cfg).__name__, **asdict(cfg)}


def mechanism_from_dict(data: dict):
    data = dict(data)
    name = data.pop("type", None)
    if name not in _VARIANTS:
        raise ValueError(f"unknown mechanism type {name!r}; expected one of {sorted(_VARIANTS)}")
    cls = _VARIANTS[name]
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unexpected parameters for {name}: {sorted(unknown)}")
    return cls(**data)


def with_alpha(cfg, alpha: float):
    """Copy of a gap mechanism with ``alpha`` replaced; other mechanisms are returned unchanged."""
    if isinstance(cfg, UnscheduledGap):
        return UnscheduledGap(alpha)
    if isinstance(cfg, CompositeGap):
        return CompositeGap(alpha, cfg.o, cfg.u, cfg.phase)
    return cfg


def has_alpha(cfg) -> bool:
    return isinstance(cfg, (UnscheduledGap, CompositeGap))


def _on_off(t_max: int, o: int, u: int, phase: int) -> np.ndarray:
    t = np.arange(t_max)
    return ((t + phase) % (o + u)) < o


def _central_gap(t_max: int, alpha: float) -> np.ndarray:
    length = int(round(alpha * t_max))
    if alpha * t_max < 1 or length < 1:
        raise ValueError(f"gap of length alpha*t_max={alpha * t_max} is shorter than one step")
    start = (t_max - length) // 2
    z = np.ones(t_max, dtype=bool)
    z[start:start + length] = False
    return z


def generate_z(cfg, t_max: int, seed=None) -> np.ndarray:
    """Observability vector (bool array of length ``t_max``) for a mechanism."""
    if t_max < 1:
        raise ValueError("t_max must be positive")
    if isinstance(cfg, OnOff):
        return _on_off(t_max, cfg.o, cfg.u, cfg.phase)
    if isinstance(cfg, GeometricGaps):
        return np.random.default_rng(seed).random(t_max) < cfg.eta
    if isinstance(cfg, UnscheduledGap):
        return _central_gap(t_max, cfg.alpha)
    if isinstance(cfg, CompositeGap):
        return _central_gap(t_max, cfg.alpha) & _on_off(t_max, cfg.o, cfg.u, cfg.phase)
    if isinstance(cfg, (MovementTriggered, FullObservation)):
        # movement-triggered collection loses no increment information
        return np.ones(t_max, dtype=bool)
    raise TypeError(f"not a mechanism config: {cfg!r}")


def mask_trajectory(traj: Trajectory | ObservedTrajectory, z) -> ObservedTrajectory:
    """Keep positions where ``z`` is set; masking an observed trajectory intersects the masks."""
    z = np.asarray(z)
    if z.shape != (len(traj),):
        raise ValueError(f"observability vector has length {z.shape}, trajectory has {len(traj)}")
    z = z.astype(bool)
    if isinstance(traj, ObservedTrajectory):
        z = z & traj.z
    return ObservedTrajectory(traj.positions, z)
