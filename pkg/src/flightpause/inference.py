"""Observed-data likelihoods and maximum-likelihood fitting.

Two likelihoods are provided for increments extracted from a partially observed
trajectory:

``naive_mar_log_likelihood``
    composite likelihood that treats every observed block as an independent
    motion, i.e. it pretends the increments are missing at random;

``mnar_adjusted_log_likelihood``
    adds, for each gap between consecutive blocks, the probability of the
    observed boundary behaviour under the time-indexed flight/pause chain
    ``[[1 - theta1, theta1], [theta2, 1 - theta2]]``. This accounts for the fact
    that long pauses are systematically less likely to be observed.

Ordering of chain states is (flight, pause) everywhere.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .model import FLIGHT, LOG_2PI, PAUSE, IncrementType, Theta
from .trajectory import BlockStats, ExtractionResult

F_STATE, P_STATE = 0, 1


class EmptyExtractionError(ValueError):
    """No observed increments are available for likelihood evaluation."""


class FitMode(str, enum.Enum):
    NAIVE_MAR = "naive"
    MNAR_ADJUSTED = "mnar"

    @classmethod
    def parse(cls, value) -> "FitMode":
        if isinstance(value, FitMode):
            return value
        key = str(value).strip().lower()
        aliases = {"naive": cls.NAIVE_MAR, "naivemar": cls.NAIVE_MAR, "mar": cls.NAIVE_MAR,
                   "mnar": cls.MNAR_ADJUSTED, "mnaradjusted": cls.MNAR_ADJUSTED,
                   "adjusted": cls.MNAR_ADJUSTED}
        if key not in aliases:
            raise ValueError(f"unknown likelihood mode {value!r}")
        return aliases[key]


# ---------------------------------------------------------------------------
# Two-state chain
# ---------------------------------------------------------------------------

def one_step_matrix(theta1: float, theta2: float) -> np.ndarray:
    return np.array([[1.0 - theta1, theta1], [theta2, 1.0 - theta2]])


def two_state_nstep(theta1: float, theta2: float, n: int) -> np.ndarray:
    """Closed-form n-step transition matrix of the flight/pause chain."""
    if n < 1:
        raise ValueError("n must be at least 1")
    s = theta1 + theta2
    lam_n = (1.0 - s) ** n
    base = np.array([[theta2, theta1], [theta2, theta1]])
    dev = np.array([[theta1, -theta1], [-theta2, theta2]])
    return (base + lam_n * dev) / s


def _log_nstep_entries(theta1: float, theta2: float, n: np.ndarray,
                       a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Log of ``two_state_nstep(theta1, theta2, n)[a, b]`` for arrays of (n, a, b).

    ``1 - lam**n`` is evaluated through expm1 so that small theta1 + theta2 keeps
    full relative precision.
    """
    s = theta1 + theta2
    lam = 1.0 - s
    n = np.asarray(n, dtype=float)
    with np.errstate(divide="ignore"):
        log_abs_lam = math.log(abs(lam)) if lam != 0.0 else -math.inf
    pow_abs = np.exp(n * log_abs_lam)
    negative_odd = (lam < 0) & (np.mod(n, 2) == 1)
    lam_n = np.where(negative_odd, -pow_abs, pow_abs)
    one_minus = np.where(negative_odd, 1.0 + pow_abs, -np.expm1(n * log_abs_lam))

    stay = np.where(a == F_STATE, theta2 + theta1 * lam_n, theta1 + theta2 * lam_n)
    move = np.where(a == F_STATE, theta1, theta2) * one_minus
    return np.log(np.where(a == b, stay, move)) - math.log(s)


# ---------------------------------------------------------------------------
# Sufficient statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SufficientStats:
    """Within-block summaries of one observed block."""

    pause_count: int
    flight_flight_count: int
    pause_duration_sum: int
    gaussian_pairs: np.ndarray  # (m, 2, 2): [current displacement, previous displacement]
    first_displacement: np.ndarray


def block_sufficient_stats(res: ExtractionResult) -> list[SufficientStats]:
    out = []
    for blk in res.blocks:
        incs = blk.increments
        pauses = [inc for inc in incs if inc.kind is PAUSE]
        ff = sum(1 for x, y in zip(incs[:-1], incs[1:]) if x.kind is FLIGHT and y.kind is FLIGHT)
        pairs = [(incs[k].displacement, incs[k - 1].displacement)
                 for k in range(1, len(incs)) if incs[k].kind is FLIGHT]
        out.append(SufficientStats(
            pause_count=len(pauses),
            flight_flight_count=ff,
            pause_duration_sum=sum(p.duration for p in pauses),
            gaussian_pairs=np.array(pairs, dtype=float).reshape(-1, 2, 2),
            first_displacement=np.array(incs[0].displacement, dtype=float),
        ))
    return out


@dataclass(frozen=True)
class _TypeDesign:
    """Exponents of log theta1, log(1-theta1), log theta2, log(1-theta2) plus chain jumps."""

    c_t1: float
    c_1mt1: float
    c_t2: float
    c_1mt2: float
    jump_n: np.ndarray
    jump_a: np.ndarray
    jump_b: np.ndarray

    def evaluate(self, theta1: float, theta2: float) -> float:
        ll = 0.0
        if self.c_t1:
            ll += self.c_t1 * math.log(theta1)
        if self.c_1mt1:
            ll += self.c_1mt1 * math.log1p(-theta1)
        if self.c_t2:
            ll += self.c_t2 * math.log(theta2)
        if self.c_1mt2:
            ll += self.c_1mt2 * math.log1p(-theta2)
        if self.jump_n.size:
            ll += float(np.sum(_log_nstep_entries(theta1, theta2, self.jump_n, self.jump_a, self.jump_b)))
        return ll


def _gap_pieces(stats: BlockStats):
    """Decompose one gap into exponent counts and n-step chain jumps.

    Returns ``(c_t1, c_t2, c_1mt2, jumps)`` where jumps lists ``(n, a, b)``.
    """
    c_t1 = 1 - stats.delta
    c_t2 = 1 - stats.gamma
    c_1mt2 = (stats.d - 1 + stats.delta) + (stats.g - 1 + stats.gamma)
    cur = F_STATE if stats.delta else P_STATE
    end = F_STATE if stats.gamma else P_STATE
    jumps = []
    pos = 0
    for off, length in stats.interior:
        jumps.append((off - pos, cur, P_STATE))
        c_1mt2 += length - 1
        cur, pos = P_STATE, off + length - 1
    jumps.append((stats.n - pos, cur, end))
    return c_t1, c_t2, c_1mt2, jumps


def _type_design(suff: list[SufficientStats], gaps=()) -> _TypeDesign:
    P = sum(s.pause_count for s in suff)
    FF = sum(s.flight_flight_count for s in suff)
    S = sum(s.pause_duration_sum for s in suff)
    c_t1, c_1mt1, c_t2, c_1mt2 = float(P), float(FF), float(P), float(S - P)
    jumps = []
    for g in gaps:
        a1, a2, a3, j = _gap_pieces(g)
        c_t1 += a1
        c_t2 += a2
        c_1mt2 += a3
        jumps.extend(j)
    arr = np.array(jumps, dtype=np.int64).reshape(-1, 3)
    return _TypeDesign(c_t1, c_1mt1, c_t2, c_1mt2, arr[:, 0], arr[:, 1], arr[:, 2])


@dataclass(frozen=True)
class _FlightDesign:
    n_pairs: int
    s_cc: float
    s_cp: float
    s_pp: float
    n_first: int
    s_first: float

    def evaluate(self, theta3: float, theta4: float) -> float:
        # both spatial coordinates: 2 scalar Gaussian terms per displacement
        var0 = theta4 / (1.0 - theta3 * theta3)
        quad = self.s_cc - 2.0 * theta3 * self.s_cp + theta3 * theta3 * self.s_pp
        ll = -self.n_pairs * (LOG_2PI + math.log(theta4)) - 0.5 * quad / theta4
        ll += -self.n_first * (LOG_2PI + math.log(var0)) - 0.5 * self.s_first / var0
        return ll


def _flight_design(suff: list[SufficientStats]) -> _FlightDesign:
    pairs = np.concatenate([s.gaussian_pairs for s in suff]) if suff else np.zeros((0, 2, 2))
    cur, prev = pairs[:, 0, :], pairs[:, 1, :]
    first = np.array([s.first_displacement for s in suff]).reshape(-1, 2)
    return _FlightDesign(
        n_pairs=int(pairs.shape[0]),
        s_cc=float(np.sum(cur * cur)),
        s_cp=float(np.sum(cur * prev)),
        s_pp=float(np.sum(prev * prev)),
        n_first=int(first.shape[0]),
        s_first=float(np.sum(first * first)),
    )


# ---------------------------------------------------------------------------
# Likelihoods
# ---------------------------------------------------------------------------

def stationary_flight_marginal(theta3: float, theta4: float) -> tuple[np.ndarray, float]:
    """Stationary law of the displacement AR(1): mean 0, variance theta4 / (1 - theta3**2)."""
    if not abs(theta3) < 1.0:
        raise ValueError(f"|theta3| must be below 1 for a stationary law, got {theta3}")
    if not theta4 > 0:
        raise ValueError("theta4 must be positive")
    return np.zeros(2), theta4 / (1.0 - theta3 * theta3)


class Likelihood:
    """Log-likelihood of an extraction result, compiled once for repeated evaluation."""

    def __init__(self, res: ExtractionResult, mode=FitMode.MNAR_ADJUSTED):
        if res.effective_sample_size == 0:
            raise EmptyExtractionError("no observed increments: the likelihood cannot be evaluated")
        self.mode = FitMode.parse(mode)
        if self.mode is FitMode.MNAR_ADJUSTED and len(res.block_stats) != len(res.blocks) - 1:
            raise ValueError("block statistics are missing for some gaps")
        suff = block_sufficient_stats(res)
        gaps = res.block_stats if self.mode is FitMode.MNAR_ADJUSTED else ()
        self.types = _type_design(suff, gaps)
        self.flights = _flight_design(suff)

    def type_part(self, theta1: float, theta2: float) -> float:
        return self.types.evaluate(theta1, theta2)

    def flight_part(self, theta3: float, theta4: float) -> float:
        return self.flights.evaluate(theta3, theta4)

    def __call__(self, theta: Theta) -> float:
        return self.type_part(theta.theta1, theta.theta2) + self.flight_part(theta.theta3, theta.theta4)


def naive_mar_log_likelihood(res: ExtractionResult, theta: Theta) -> float:
    return Likelihood(res, FitMode.NAIVE_MAR)(theta)


def mnar_adjusted_log_likelihood(res: ExtractionResult, theta: Theta) -> float:
    return Likelihood(res, FitMode.MNAR_ADJUSTED)(theta)


def gap_log_term(stats: BlockStats, theta1: float, theta2: float) -> float:
    """Closed-form gap correction for one gap (the MNAR minus naive difference)."""
    c_t1, c_t2, c_1mt2, jumps = _gap_pieces(stats)
    j = np.array(jumps, dtype=np.int64).reshape(-1, 3)
    return (c_t1 * math.log(theta1) + c_t2 * math.log(theta2) + c_1mt2 * math.log1p(-theta2)
            + float(np.sum(_log_nstep_entries(theta1, theta2, j[:, 0], j[:, 1], j[:, 2]))))


def _state(kind) -> int:
    return F_STATE if IncrementType.parse(kind) is FLIGHT else P_STATE


def brute_force_gap_log_likelihood(boundary, stats: BlockStats, theta: Theta,
                                   max_gap_len: int = 12) -> float:
    """Gap contribution by summing over every hidden flight/pause step sequence.

    The path runs from the last flight of block j (state ``boundary[0]``) to the
    first flight of block j+1 (state ``boundary[1]``). Steps seen as stationary
    are pinned to the pause state; unobserved steps are enumerated. Spatial
    terms integrate to one, so only type transitions contribute.
    """
    if stats.n > max_gap_len:
        raise ValueError(f"gap of {stats.n} steps exceeds the enumeration bound {max_gap_len}")
    d, g, n = stats.d, stats.g, stats.n
    length = d + n + g + 1
    pinned: list[int | None] = [None] * length
    pinned[0] = _state(boundary[0])
    pinned[-1] = _state(boundary[1])
    for i in range(1, d + 1):
        pinned[i] = P_STATE
    for i in range(d + n, d + n + g):
        pinned[i] = P_STATE
    for off, run in stats.interior:
        for i in range(d + off, d + off + run):
            pinned[i] = P_STATE
    free = [i for i, p in enumerate(pinned) if p is None]

    Q = one_step_matrix(theta.theta1, theta.theta2)
    total = 0.0
    path = list(pinned)
    for states in itertools.product((F_STATE, P_STATE), repeat=len(free)):
        for i, s in zip(free, states):
            path[i] = s
        prob = 1.0
        for x, y in zip(path[:-1], path[1:]):
            prob *= Q[x, y]
        total += prob
    return math.log(total)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    theta_hat: Theta
    loglik: float
    iterations: int
    converged: bool
    mode: FitMode

    def to_dict(self) -> dict:
        return {"theta_hat": self.theta_hat.as_list(), "loglik": self.loglik, "mode": self.mode.value,
                "converged": bool(self.converged), "iterations": int(self.iterations)}

    @classmethod
    def from_dict(cls, data: dict) -> "FitResult":
        return cls(Theta.from_sequence(data["theta_hat"]), float(data["loglik"]), int(data["iterations"]),
                   bool(data["converged"]), FitMode.parse(data["mode"]))


class _Box:
    """Maps unconstrained reals onto an interval with logistic or exp links."""

    def __init__(self, lo: float, hi: float):
        self.lo, self.hi = lo, hi

    def to_unit(self, x: float) -> float:
        if math.isinf(self.hi):
            return math.log(x - self.lo)
        return float(logit((x - self.lo) / (self.hi - self.lo)))

    def from_unit(self, u: float) -> float:
        if math.isinf(self.hi):
            return self.lo + math.exp(min(u, 700.0))
        return self.lo + (self.hi - self.lo) * float(expit(u))


def _maximize_2d(objective, boxes, start, tol: float, max_restarts: int = 8):
    u = np.array([b.to_unit(x) for b, x in zip(boxes, start)])

    def neg(v):
        val = objective(*(b.from_unit(x) for b, x in zip(boxes, v)))
        return -val if math.isfinite(val) else math.inf

    best = neg(u)
    if not math.isfinite(best):
        raise ValueError("log-likelihood is not finite at the initial value")
    iters, converged = 0, False
    for _ in range(max_restarts):
        # scipy's default simplex is tiny around zero coordinates; use unit-scale steps instead
        simplex = np.vstack([u, u + 0.5 * np.eye(u.size)])
        out = minimize(neg, u, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": tol * 1e-2, "maxiter": 20000,
                                "initial_simplex": simplex})
        iters += int(out.nit)
        gain = best - out.fun
        if out.fun <= best:
            u, best = out.x, out.fun
        if out.success and gain < tol:
            converged = True
            break
    return tuple(b.from_unit(x) for b, x in zip(boxes, u)), -best, iters, converged


def default_init(res: ExtractionResult) -> Theta:
    """Deterministic starting value whose noise scale is taken from the data."""
    pairs = [s.gaussian_pairs for s in block_sufficient_stats(res)]
    disp = np.concatenate(pairs)[:, 0, :] if pairs and sum(len(p) for p in pairs) else None
    scale = float(np.mean(disp ** 2)) if disp is not None and disp.size else 1.0
    return Theta(0.3, 0.3, 0.5, max(scale * 0.5, 1e-6))


def fit(res: ExtractionResult, mode=FitMode.MNAR_ADJUSTED, init: Theta | None = None,
        eps: float = 1e-6, tol: float = 1e-8) -> FitResult:
    """Maximum-likelihood estimate of theta over the open box defined by ``eps``.

    The log-likelihood separates into a (theta1, theta2) part and a
    (theta3, theta4) part, so each pair is maximized on its own with a
    Nelder-Mead simplex in reparametrized coordinates. The simplex is restarted
    from its best vertex until the log-likelihood gain drops below ``tol``.
    """
    lik = Likelihood(res, mode)
    init = init or default_init(res)
    prob_box = _Box(eps, 1.0 - eps)
    ar_box = _Box(-1.0 + eps, 1.0 - eps)
    var_box = _Box(eps, math.inf)
    for value, box in ((init.theta1, prob_box), (init.theta2, prob_box),
                       (init.theta3, ar_box), (init.theta4, var_box)):
        if not box.lo < value < box.hi:
            raise ValueError(f"initial value {value} lies outside the fitting box")

    (t1, t2), ll_types, it1, ok1 = _maximize_2d(lik.type_part, (prob_box, prob_box),
                                                (init.theta1, init.theta2), tol)
    (t3, t4), ll_flights, it2, ok2 = _maximize_2d(lik.flight_part, (ar_box, var_box),
                                                  (init.theta3, init.theta4), tol)
    theta_hat = Theta(t1, t2, t3, t4)
    return FitResult(theta_hat, lik(theta_hat), it1 + it2, ok1 and ok2, lik.mode)
