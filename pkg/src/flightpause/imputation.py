"""Gap imputation: plug-in parametric sampling and linear interpolation.

A missing stretch ``u..v`` between observed locations ``s_{u-1}`` and
``s_{v+1}`` is covered by increments starting at times ``u-1 .. v``. The
parametric method samples their types and durations from the fitted chain and
then draws the flight displacements from the AR(1) law conditioned on reaching
``s_{v+1}`` exactly, using a forward-filter backward-sampler on the per-coordinate
state (cumulative displacement, current displacement).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .model import FLIGHT, PAUSE, IncrementType, Theta
from .trajectory import ExtractionResult, ObservedTrajectory, Trajectory

_MAX_PLAN_ATTEMPTS = 1000


class ImputationMethod(str, enum.Enum):
    LINEAR = "linear"
    ADJUSTED_PARAMETRIC = "adjusted"

    @classmethod
    def parse(cls, value) -> "ImputationMethod":
        if isinstance(value, ImputationMethod):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        aliases = {"linear": cls.LINEAR, "adjusted": cls.ADJUSTED_PARAMETRIC,
                   "adjustedparametric": cls.ADJUSTED_PARAMETRIC, "parametric": cls.ADJUSTED_PARAMETRIC}
        if key not in aliases:
            raise ValueError(f"unknown imputation method {value!r}")
        return aliases[key]


class ImputationError(ValueError):
    pass


def _as_rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# Increment plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GapPlan:
    kinds: tuple[IncrementType, ...]
    durations: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "kinds", tuple(IncrementType.parse(k) for k in self.kinds))
        object.__setattr__(self, "durations", tuple(int(d) for d in self.durations))
        if len(self.kinds) != len(self.durations):
            raise ValueError("kinds and durations differ in length")
        for k, (kind, d) in enumerate(zip(self.kinds, self.durations)):
            if d < 1:
                raise ValueError("durations must be positive")
            if kind is FLIGHT and d != 1:
                raise ValueError("flights last exactly one step")
            if k and kind is PAUSE and self.kinds[k - 1] is PAUSE:
                raise ValueError("a plan cannot hold consecutive pauses")

    @property
    def total_duration(self) -> int:
        return sum(self.durations)

    @property
    def n_flights(self) -> int:
        return sum(1 for k in self.kinds if k is FLIGHT)


def sample_gap_plan(theta_hat: Theta, preceding_kind, gap_span: int, seed=None) -> GapPlan:
    """Sample increment types and durations until they cover ``gap_span`` steps.

    After a flight the next increment is a pause with probability theta1. When
    the step before the gap is a pause, that pause may still be running: by
    memorylessness it continues with probability 1 - theta2 for a fresh
    geometric number of steps. A final pause that overshoots is truncated.
    """
    if gap_span < 1:
        raise ValueError("gap_span must be at least 1")
    rng = _as_rng(seed)
    prev = IncrementType.parse(preceding_kind)
    kinds, durs, total = [], [], 0
    while total < gap_span:
        if prev is FLIGHT:
            pause = rng.random() < theta_hat.theta1
        else:
            pause = not kinds and rng.random() >= theta_hat.theta2
        if pause:
            d = min(int(rng.geometric(theta_hat.theta2)), gap_span - total)
            kinds.append(PAUSE)
            durs.append(d)
            prev = PAUSE
        else:
            kinds.append(FLIGHT)
            durs.append(1)
            prev = FLIGHT
        total += durs[-1]
    return GapPlan(tuple(kinds), tuple(durs))


# ---------------------------------------------------------------------------
# Displacement bridge
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BridgeSpec:
    start_pos: tuple[float, float]
    end_pos: tuple[float, float]
    last_observed_displacement: tuple[float, float] | None
    n_flights: int
    theta: Theta

    def __post_init__(self):
        if self.n_flights < 1:
            raise ValueError("a bridge needs at least one flight")


def _bridge_coordinate(total: float, n: int, context: float | None, theta3: float, theta4: float,
                       rng: np.random.Generator) -> np.ndarray:
    """Displacements d_1..d_n of one coordinate with d_k = theta3 d_{k-1} + N(0, theta4), sum = total."""
    if n == 1:
        return np.array([total])
    A = np.array([[1.0, theta3], [0.0, theta3]])
    noise = theta4 * np.ones((2, 2))
    if context is None:
        m = np.array([0.0, 0.0])
        P = np.array([[0.0, 0.0], [0.0, theta4 / (1.0 - theta3 * theta3)]])
    else:
        m = np.array([0.0, float(context)])
        P = np.zeros((2, 2))
    means, covs = [m], [P]
    for _ in range(n):
        m = A @ m
        P = A @ P @ A.T + noise
        means.append(m)
        covs.append(P)

    # exact terminal observation of the cumulative displacement
    p = np.empty(n + 1)
    d = np.empty(n + 1)
    p[n] = total
    d[n] = _conditional_draw(means[n], covs[n], total, None, theta3, theta4, rng)
    for k in range(n - 1, 0, -1):
        p[k] = p[k + 1] - d[k + 1]
        if k == 1:
            d[1] = p[1]
        else:
            d[k] = _conditional_draw(means[k], covs[k], p[k], d[k + 1], theta3, theta4, rng)
    return d[1:]


def _conditional_draw(m, P, p_value, d_next, theta3, theta4, rng) -> float:
    """Draw the displacement component given the cumulative one and, optionally, the next displacement."""
    if P[0, 0] > 0.0:
        mu = m[1] + P[1, 0] / P[0, 0] * (p_value - m[0])
        var = max(P[1, 1] - P[1, 0] ** 2 / P[0, 0], 0.0)
    else:
        mu, var = m[1], P[1, 1]
    if d_next is not None:
        if var == 0.0:
            return mu
        prec = 1.0 / var + theta3 * theta3 / theta4
        mu = (mu / var + theta3 * d_next / theta4) / prec
        var = 1.0 / prec
    return mu + math.sqrt(var) * rng.standard_normal()


def bridge_flights_ffbs(spec: BridgeSpec, seed=None) -> np.ndarray:
    """Flight displacements, shape (n_flights, 2), summing to ``end_pos - start_pos``."""
    rng = _as_rng(seed)
    th = spec.theta
    gap = np.asarray(spec.end_pos, dtype=float) - np.asarray(spec.start_pos, dtype=float)
    ctx = spec.last_observed_displacement
    cols = [_bridge_coordinate(float(gap[c]), spec.n_flights, None if ctx is None else float(ctx[c]),
                               th.theta3, th.theta4, rng)
            for c in range(2)]
    return np.column_stack(cols)


def simulate_displacements(n: int, context, theta: Theta, seed=None) -> np.ndarray:
    """Unconditional AR(1) displacements, from the context or the stationary law."""
    rng = _as_rng(seed)
    if context is None:
        prev = math.sqrt(theta.theta4 / (1.0 - theta.theta3 ** 2)) * rng.standard_normal(2)
    else:
        prev = np.asarray(context, dtype=float)
    out = np.empty((n, 2))
    for k in range(n):
        prev = theta.theta3 * prev + math.sqrt(theta.theta4) * rng.standard_normal(2)
        out[k] = prev
    return out


def render_plan(plan: GapPlan, displacements: np.ndarray) -> np.ndarray:
    """Offsets from the starting location after each time step of the plan, shape (span, 2)."""
    rows, cur, k = [], np.zeros(2), 0
    for kind, dur in zip(plan.kinds, plan.durations):
        if kind is FLIGHT:
            cur = cur + displacements[k]
            k += 1
            rows.append(cur)
        else:
            rows.extend([cur] * dur)
    return np.array(rows).reshape(-1, 2)


# ---------------------------------------------------------------------------
# Whole-trajectory imputation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gap:
    """Maximal missing stretch ``u..v`` (1-based, inclusive)."""

    u: int
    v: int
    n_times: int

    @property
    def at_start(self) -> bool:
        return self.u == 1

    @property
    def at_end(self) -> bool:
        return self.v == self.n_times

    @property
    def span(self) -> int:
        return self.v - self.u + 2


def find_gaps(z: np.ndarray) -> list[Gap]:
    z = np.asarray(z, dtype=bool)
    padded = np.concatenate(([True], z, [True])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [Gap(int(a) + 1, int(b), z.size) for a, b in zip(edges[::2], edges[1::2])]


def _context_before(obs: ObservedTrajectory, t: int):
    """(preceding kind, last flight displacement) reading back from observed time ``t``."""
    pos, z = obs.positions, obs.z
    kind = None
    i = t - 1  # 0-based index of s_t
    while i >= 1 and z[i] and z[i - 1]:
        step = pos[i] - pos[i - 1]
        if np.any(step != 0.0):
            return (kind or FLIGHT), (float(step[0]), float(step[1]))
        kind = kind or PAUSE
        i -= 1
    return (kind or FLIGHT), None


@dataclass(frozen=True)
class ImputationSet:
    """Imputed trajectories plus the settings that produced them.

    ``edge_gaps`` lists missing stretches touching the start or end of the
    trajectory; they have only one observed boundary and are filled by
    unconditional simulation (parametric) or by repeating the nearest observed
    location (linear).
    """

    method: ImputationMethod
    theta_hat: Theta | None
    seed: int | None
    trajectories: tuple[Trajectory, ...]
    edge_gaps: tuple[tuple[int, int], ...] = field(default=())

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    def __getitem__(self, i) -> Trajectory:
        return self.trajectories[i]

    def metadata(self) -> dict:
        return {"method": self.method.value,
                "theta_hat": None if self.theta_hat is None else self.theta_hat.as_list(),
                "seed": self.seed, "n_imputations": len(self.trajectories),
                "edge_gaps": [list(g) for g in self.edge_gaps]}


def _fill_linear(out: np.ndarray, gap: Gap) -> None:
    u, v = gap.u - 1, gap.v - 1  # 0-based inclusive
    if gap.at_start and gap.at_end:
        raise ImputationError("trajectory has no observed location")
    if gap.at_start:
        out[u:v + 1] = out[v + 1]
    elif gap.at_end:
        out[u:v + 1] = out[u - 1]
    else:
        start, end = out[u - 1], out[v + 1]
        frac = (np.arange(1, gap.span) / gap.span)[:, None]
        out[u:v + 1] = start + frac * (end - start)


def _bridge_plan(theta: Theta, kind, span: int, start, end, ctx, rng) -> np.ndarray:
    for _ in range(_MAX_PLAN_ATTEMPTS):
        plan = sample_gap_plan(theta, kind, span, rng)
        if plan.n_flights or np.array_equal(start, end):
            break
    else:
        plan = GapPlan((FLIGHT,) * span, (1,) * span)
    if plan.n_flights == 0:
        return np.zeros((span, 2))
    disp = bridge_flights_ffbs(BridgeSpec(tuple(start), tuple(end), ctx, plan.n_flights, theta), rng)
    return render_plan(plan, disp)


def _fill_parametric(out: np.ndarray, obs: ObservedTrajectory, gap: Gap, theta: Theta,
                     rng: np.random.Generator) -> None:
    u, v = gap.u - 1, gap.v - 1
    if gap.at_start and gap.at_end:
        raise ImputationError("trajectory has no observed location")
    if gap.at_end:
        kind, ctx = _context_before(obs, gap.u - 1)
        plan = sample_gap_plan(theta, kind, gap.span - 1, rng)
        offsets = render_plan(plan, simulate_displacements(plan.n_flights, ctx, theta, rng))
        out[u:v + 1] = out[u - 1] + offsets
    elif gap.at_start:
        # simulate forward over times 1..v and anchor the path at the first observed location
        plan = sample_gap_plan(theta, FLIGHT, gap.span - 1, rng)
        offsets = render_plan(plan, simulate_displacements(plan.n_flights, None, theta, rng))
        origin = out[v + 1] - offsets[-1]
        out[0] = origin
        out[1:v + 1] = origin + offsets[:-1]
    else:
        kind, ctx = _context_before(obs, gap.u - 1)
        offsets = _bridge_plan(theta, kind, gap.span, out[u - 1], out[v + 1], ctx, rng)
        out[u:v + 1] = out[u - 1] + offsets[:-1]


def impute_gaps(obs: ObservedTrajectory, res: ExtractionResult | None, theta_hat: Theta | None,
                method="adjusted", n_imputations: int = 1, seed: int | None = None) -> ImputationSet:
    """Complete trajectories agreeing exactly with ``obs`` wherever it is observed.

    Imputation ``i`` draws from its own stream ``default_rng([seed, i])``.
    """
    method = ImputationMethod.parse(method)
    if n_imputations < 1:
        raise ValueError("n_imputations must be positive")
    if res is not None and res.n_times != len(obs):
        raise ValueError("extraction result does not belong to this trajectory")
    if method is ImputationMethod.ADJUSTED_PARAMETRIC and theta_hat is None:
        raise ValueError("parametric imputation needs a fitted theta")
    if obs.n_observed == 0:
        raise ImputationError("trajectory has no observed location")
    gaps = find_gaps(obs.z)
    edges = tuple((g.u, g.v) for g in gaps if g.at_start or g.at_end)

    trajs = []
    for i in range(n_imputations):
        out = obs.positions.copy()
        if method is ImputationMethod.LINEAR:
            for g in gaps:
                _fill_linear(out, g)
        else:
            rng = np.random.default_rng(None if seed is None else [seed, i])
            for g in gaps:
                _fill_parametric(out, obs, g, theta_hat, rng)
        out[obs.z] = obs.positions[obs.z]
        trajs.append(Trajectory(out))
    return ImputationSet(method, theta_hat, seed, tuple(trajs), edges)
