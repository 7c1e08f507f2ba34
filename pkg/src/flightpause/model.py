"""Increments, motions and the standard parametrization of the flight-pause model.

A motion is an ordered sequence of increments. Flights last one time unit and
move the individual; pauses last one or more time units and keep the
individual in place while carrying the displacement of the preceding flight.

Under the standard parametrization the model has four parameters:

* ``theta1`` probability of pausing after a flight,
* ``theta2`` per-step probability that a pause ends (geometric durations),
* ``theta3`` autoregression coefficient of flight displacements,
* ``theta4`` per-coordinate variance of the flight noise.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


class InvalidMotionError(ValueError):
    """Raised when a motion violates the flight-pause invariants."""


class IncrementType(str, enum.Enum):
    FLIGHT = "f"
    PAUSE = "p"

    @classmethod
    def parse(cls, value: "str | IncrementType") -> "IncrementType":
        if isinstance(value, IncrementType):
            return value
        return cls(str(value).strip().lower())


FLIGHT = IncrementType.FLIGHT
PAUSE = IncrementType.PAUSE


def _vec2(v) -> tuple[float, float]:
    a, b = v
    return (float(a), float(b))


@dataclass(frozen=True)
class Increment:
    """One stage of a motion: origin, duration, displacement and type."""

    start_time: int
    start_pos: tuple[float, float]
    duration: int
    displacement: tuple[float, float]
    kind: IncrementType

    def __post_init__(self):
        object.__setattr__(self, "start_pos", _vec2(self.start_pos))
        object.__setattr__(self, "displacement", _vec2(self.displacement))
        object.__setattr__(self, "kind", IncrementType.parse(self.kind))
        object.__setattr__(self, "start_time", int(self.start_time))
        object.__setattr__(self, "duration", int(self.duration))

    @property
    def is_flight(self) -> bool:
        return self.kind is FLIGHT

    @property
    def end_time(self) -> int:
        """First time index after the increment."""
        return self.start_time + self.duration


@dataclass(frozen=True)
class Motion:
    increments: tuple[Increment, ...]

    def __post_init__(self):
        object.__setattr__(self, "increments", tuple(self.increments))

    def __len__(self) -> int:
        return len(self.increments)

    def __iter__(self) -> Iterator[Increment]:
        return iter(self.increments)

    def __getitem__(self, k):
        return self.increments[k]

    @property
    def total_duration(self) -> int:
        return sum(inc.duration for inc in self.increments)

    def translated(self, offset) -> "Motion":
        dx, dy = _vec2(offset)
        return Motion(tuple(
            Increment(inc.start_time, (inc.start_pos[0] + dx, inc.start_pos[1] + dy),
                      inc.duration, inc.displacement, inc.kind)
            for inc in self.increments))


@dataclass(frozen=True)
class Theta:
    """Standard-parametrization parameters; boundary values are rejected."""

    theta1: float
    theta2: float
    theta3: float
    theta4: float

    def __post_init__(self):
        for name in ("theta1", "theta2", "theta3", "theta4"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not 0.0 < self.theta1 < 1.0:
            raise ValueError(f"theta1 must lie in (0, 1), got {self.theta1}")
        if not 0.0 < self.theta2 < 1.0:
            raise ValueError(f"theta2 must lie in (0, 1), got {self.theta2}")
        if not -1.0 < self.theta3 < 1.0:
            raise ValueError(f"theta3 must lie in (-1, 1), got {self.theta3}")
        if not self.theta4 > 0.0 or not math.isfinite(self.theta4):
            raise ValueError(f"theta4 must be positive, got {self.theta4}")

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "Theta":
        if len(values) != 4:
            raise ValueError(f"theta needs 4 components, got {len(values)}")
        return cls(*values)

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2, self.theta3, self.theta4])

    def as_list(self) -> list[float]:
        return [self.theta1, self.theta2, self.theta3, self.theta4]


@dataclass(frozen=True)
class InitialIncrementSpec:
    """Law of the first increment: a flight at time 1 from a fixed origin.

    The first displacement is Normal(``first_displacement_mean``,
    ``first_displacement_var`` * I).
    """

    start_pos: tuple[float, float] = (0.0, 0.0)
    first_displacement_mean: tuple[float, float] = (0.0, 0.0)
    first_displacement_var: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "start_pos", _vec2(self.start_pos))
        object.__setattr__(self, "first_displacement_mean", _vec2(self.first_displacement_mean))
        object.__setattr__(self, "first_displacement_var", float(self.first_displacement_var))
        if not self.first_displacement_var > 0.0:
            raise ValueError("first_displacement_var must be positive")


DEFAULT_INIT = InitialIncrementSpec()


# ---------------------------------------------------------------------------
# Component distributions
# ---------------------------------------------------------------------------

def transition_log_prob(prev_kind, next_kind, theta1: float) -> float:
    """Log-probability of the type of increment k given the type of k-1."""
    prev_kind = IncrementType.parse(prev_kind)
    next_kind = IncrementType.parse(next_kind)
    if prev_kind is PAUSE:
        return 0.0 if next_kind is FLIGHT else -math.inf
    return math.log(theta1) if next_kind is PAUSE else math.log1p(-theta1)


def pause_duration_log_pmf(d: int, theta2: float) -> float:
    """Geometric pmf ``theta2 * (1 - theta2)**(d - 1)`` on {1, 2, ...}."""
    if d < 1 or int(d) != d:
        raise ValueError(f"pause duration must be a positive integer, got {d}")
    return math.log(theta2) + (d - 1) * math.log1p(-theta2)


def flight_displacement_log_pdf(delta, delta_prev, theta3: float, theta4: float) -> float:
    """Sum over both coordinates of log N(delta_i; theta3 * delta_prev_i, theta4)."""
    if not theta4 > 0:
        raise ValueError("theta4 must be positive")
    r = np.asarray(delta, dtype=float) - theta3 * np.asarray(delta_prev, dtype=float)
    return float(-LOG_2PI - math.log(theta4) - 0.5 * np.dot(r, r) / theta4)


def gaussian_log_pdf_2d(x, mean, var: float) -> float:
    r = np.asarray(x, dtype=float) - np.asarray(mean, dtype=float)
    return float(-LOG_2PI - math.log(var) - 0.5 * np.dot(r, r) / var)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    index: int
    rule: str
    message: str = field(default="", compare=False)

    def __str__(self) -> str:
        return f"k={self.index}: {self.rule} ({self.message})" if self.message else f"k={self.index}: {self.rule}"


def _close(a, b, atol: float) -> bool:
    return math.isclose(a[0], b[0], rel_tol=1e-12, abs_tol=atol) and \
        math.isclose(a[1], b[1], rel_tol=1e-12, abs_tol=atol)


def validate_motion(motion: Motion, atol: float = 1e-9) -> list[Violation]:
    """Return every violated motion invariant, tagged with the 1-based increment index.

    Spatial continuity is checked up to ``atol`` because positions are
    accumulated in floating point.
    """
    out: list[Violation] = []
    incs = motion.increments
    for k, inc in enumerate(incs, start=1):
        if inc.duration < 1:
            out.append(Violation(k, "positive-duration", f"duration={inc.duration}"))
        if inc.kind is FLIGHT and inc.duration != 1:
            out.append(Violation(k, "flight-duration", f"duration={inc.duration}"))
        if k == 1:
            continue
        prev = incs[k - 2]
        if inc.start_time != prev.start_time + prev.duration:
            out.append(Violation(k, "continuity-in-time",
                                 f"{inc.start_time} != {prev.start_time}+{prev.duration}"))
        if prev.kind is FLIGHT:
            expected = (prev.start_pos[0] + prev.displacement[0], prev.start_pos[1] + prev.displacement[1])
            if not _close(inc.start_pos, expected, atol):
                out.append(Violation(k, "continuity-in-space-flight"))
        elif not _close(inc.start_pos, prev.start_pos, atol):
            out.append(Violation(k, "continuity-in-space-pause"))
        if prev.kind is PAUSE and inc.kind is PAUSE:
            out.append(Violation(k, "no-consecutive-pauses"))
        if inc.kind is PAUSE and not _close(inc.displacement, prev.displacement, atol):
            out.append(Violation(k, "pause-stores-flight"))
    return out


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def simulate_motion(theta: Theta, t_max: int, init: InitialIncrementSpec = DEFAULT_INIT,
                    seed=None) -> Motion:
    """Draw a motion whose trajectory covers exactly ``t_max`` time steps.

    Generation stops once the next increment would start after ``t_max``; a
    final pause crossing ``t_max`` is truncated to end there.

    Stored flight displacements are the differences of consecutive stored
    positions, so displacements recomputed from the trajectory match bit for bit.
    """
    if t_max < 2:
        raise ValueError("t_max must be at least 2")
    rng = np.random.default_rng(seed)
    noise_sd = math.sqrt(theta.theta4)

    pos = np.array(init.start_pos, dtype=float)
    raw = np.array(init.first_displacement_mean) + math.sqrt(init.first_displacement_var) * rng.standard_normal(2)
    nxt = pos + raw
    disp = nxt - pos
    incs = [Increment(1, pos, 1, disp, FLIGHT)]
    t = 2
    while t <= t_max:
        prev = incs[-1]
        if prev.kind is FLIGHT and rng.random() < theta.theta1:
            d = int(rng.geometric(theta.theta2))
            d = min(d, t_max - t + 1)
            incs.append(Increment(t, nxt, d, prev.displacement, PAUSE))
            t += d
            continue
        pos = nxt
        raw = theta.theta3 * np.asarray(prev.displacement) + noise_sd * rng.standard_normal(2)
        nxt = pos + raw
        incs.append(Increment(t, pos, 1, nxt - pos, FLIGHT))
        t += 1
    return Motion(tuple(incs))


# ---------------------------------------------------------------------------
# Complete-data likelihood
# ---------------------------------------------------------------------------

def complete_data_log_likelihood(motion: Motion, theta: Theta,
                                 init: InitialIncrementSpec = DEFAULT_INIT) -> float:
    violations = validate_motion(motion)
    if violations:
        raise InvalidMotionError("; ".join(map(str, violations)))
    if len(motion) == 0 or motion[0].kind is not FLIGHT:
        raise InvalidMotionError("the first increment must be a flight")

    first = motion[0]
    ll = gaussian_log_pdf_2d(first.displacement, init.first_displacement_mean, init.first_displacement_var)
    log_t1, log_1mt1 = math.log(theta.theta1), math.log1p(-theta.theta1)
    for k in range(1, len(motion)):
        prev, inc = motion[k - 1], motion[k]
        if inc.kind is PAUSE:
            ll += log_t1 + pause_duration_log_pmf(inc.duration, theta.theta2)
        else:
            if prev.kind is FLIGHT:
                ll += log_1mt1
            # a pause carries the displacement of the flight before it
            ll += flight_displacement_log_pdf(inc.displacement, prev.displacement, theta.theta3, theta.theta4)
    return ll
