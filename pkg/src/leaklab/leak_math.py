"""Continuous-time stake decay during an inactivity leak.

Every quantity here is stake-weighted and expressed as a proportion of the
initial registry, so validator counts and the initial stake cancel out.
Time ``t`` is measured in epochs since the leak began.

The three behaviours accumulate inactivity score at constant average rates
(0, 3/2 and 4 per epoch), so integrating ``s' = -I(t) s / 2**26`` gives a
Gaussian-in-time decay ``s0 * exp(-rate * t**2 / (2 * 2**26))``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

TWO_THIRDS = 2.0 / 3.0
ONE_THIRD = 1.0 / 3.0

BISECTION_TOL = 1e-6
BISECTION_MAX_ITER = 200


class BehaviorKind(enum.Enum):
    ACTIVE = "active"
    SEMI_ACTIVE = "semi_active"
    INACTIVE = "inactive"


# average inactivity-score growth per epoch
SCORE_RATE = {
    BehaviorKind.ACTIVE: 0.0,
    BehaviorKind.SEMI_ACTIVE: 1.5,
    BehaviorKind.INACTIVE: 4.0,
}


@dataclass(frozen=True)
class LeakParams:
    """Protocol constants of the leak model.

    ``inactive_ejection_epoch`` and ``semi_active_ejection_epoch`` are the
    reference ejection epochs used for caps and for the maximal Byzantine
    share. They are not derived from ``ejection_threshold``; see
    :func:`ejection_epoch` for the closed-form inversion and
    :meth:`calibrated_threshold` for the threshold they actually imply.
    """

    penalty_scale: float = 2.0**26
    ejection_threshold: float = 16.75
    initial_stake: float = 32.0
    inactive_ejection_epoch: float = 4685.0
    semi_active_ejection_epoch: float = 7652.0

    def __post_init__(self):
        if self.penalty_scale <= 0:
            raise ValueError("penalty_scale must be positive")
        if not 0 < self.ejection_threshold <= self.initial_stake:
            raise ValueError("need 0 < ejection_threshold <= initial_stake")
        if not self.inactive_ejection_epoch < self.semi_active_ejection_epoch:
            raise ValueError("inactive ejection must precede semi-active ejection")

    def decay_exponent(self, behavior: BehaviorKind, t: float) -> float:
        """Exponent ``k`` such that ``stake = s0 * exp(-k)``."""
        return SCORE_RATE[behavior] * t * t / (2.0 * self.penalty_scale)

    def calibrated_threshold(self) -> float:
        """Stake of an always-inactive validator at ``inactive_ejection_epoch``.

        About 16.636 ETH with the defaults; with this threshold the closed-form
        inversion reproduces both reference ejection epochs.
        """
        return stake_at(BehaviorKind.INACTIVE, self.inactive_ejection_epoch, self)


DEFAULT_PARAMS = LeakParams()


@dataclass(frozen=True)
class PartitionSplit:
    """Honest share ``p0`` on the observed branch and Byzantine share ``beta0``."""

    p0: float
    beta0: float = 0.0

    def __post_init__(self):
        if not 0 < self.p0 < 1:
            raise ValueError(f"p0 must be in (0, 1), got {self.p0}")
        if not 0 <= self.beta0 < ONE_THIRD:
            raise ValueError(f"beta0 must be in [0, 1/3), got {self.beta0}")

    def mirrored(self) -> "PartitionSplit":
        """The same partition seen from the other branch."""
        return PartitionSplit(1.0 - self.p0, self.beta0)


class Crossing(NamedTuple):
    t: float
    capped: bool


def _check_time(t: float) -> None:
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")


def _inactive_factor(t: float, params: LeakParams) -> float:
    return math.exp(-params.decay_exponent(BehaviorKind.INACTIVE, t))


def _semi_active_factor(t: float, params: LeakParams) -> float:
    return math.exp(-params.decay_exponent(BehaviorKind.SEMI_ACTIVE, t))


def _inactive_crossing(log_ratio: float, params: LeakParams) -> float:
    """Time at which the inactive decay factor falls to ``exp(-log_ratio)``, capped."""
    rate = SCORE_RATE[BehaviorKind.INACTIVE]
    t = math.sqrt(2.0 * params.penalty_scale * log_ratio / rate)
    return min(t, params.inactive_ejection_epoch)


def bisect_increasing(f: Callable[[float], float], lo: float, hi: float,
                      tol: float = BISECTION_TOL,
                      max_iter: int = BISECTION_MAX_ITER) -> float:
    """Smallest ``x`` in ``[lo, hi]`` with ``f(x) >= 0`` for nondecreasing ``f``.

    Requires ``f(lo) < 0 <= f(hi)``. Returns the upper end of the final
    bracket, so the result always satisfies ``f(x) >= 0``.
    """
    if f(lo) >= 0:
        return lo
    if f(hi) < 0:
        raise ValueError("root not bracketed")
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


def stake_at(behavior: BehaviorKind, t: float,
             params: LeakParams = DEFAULT_PARAMS) -> float:
    """Stake after ``t`` leak epochs. Not clamped at the ejection threshold."""
    _check_time(t)
    return params.initial_stake * math.exp(-params.decay_exponent(behavior, t))


def ejection_epoch(behavior: BehaviorKind,
                   params: LeakParams = DEFAULT_PARAMS) -> float:
    """First time the stake curve reaches ``params.ejection_threshold``."""
    rate = SCORE_RATE[behavior]
    if rate == 0:
        raise ValueError("active validators are never ejected")
    log_ratio = math.log(params.initial_stake / params.ejection_threshold)
    return math.sqrt(2.0 * params.penalty_scale * log_ratio / rate)


def active_ratio_honest(p0: float, t: float,
                        params: LeakParams = DEFAULT_PARAMS) -> float:
    """Active stake share on a branch holding ``p0`` of the honest stake."""
    if not 0 < p0 < 1:
        raise ValueError(f"p0 must be in (0, 1), got {p0}")
    _check_time(t)
    return p0 / (p0 + (1.0 - p0) * _inactive_factor(t, params))


def time_to_finalize_honest(p0: float,
                            params: LeakParams = DEFAULT_PARAMS) -> float:
    """Leak time at which the active share on the branch reaches 2/3.

    Capped at the inactive-ejection epoch; 0 when ``p0 >= 2/3``.
    """
    if not 0 < p0 < 1:
        raise ValueError(f"p0 must be in (0, 1), got {p0}")
    if p0 >= TWO_THIRDS:
        return 0.0
    return _inactive_crossing(math.log(2.0 * (1.0 - p0)) - math.log(p0), params)


def active_ratio_slashable(split: PartitionSplit, t: float,
                           params: LeakParams = DEFAULT_PARAMS) -> float:
    """Active share when Byzantine validators vote on both branches."""
    _check_time(t)
    p0, b = split.p0, split.beta0
    active = p0 * (1.0 - b) + b
    return active / (active + (1.0 - p0) * (1.0 - b) * _inactive_factor(t, params))


def time_to_finalize_slashable(split: PartitionSplit,
                               params: LeakParams = DEFAULT_PARAMS) -> float:
    p0, b = split.p0, split.beta0
    if p0 * (1.0 - b) + b >= TWO_THIRDS:
        return 0.0
    return _inactive_crossing(
        math.log(2.0 * (1.0 - p0)) - math.log(p0 + b / (1.0 - b)), params)


def active_ratio_semi_active(split: PartitionSplit, t: float,
                             params: LeakParams = DEFAULT_PARAMS) -> float:
    """Active share when Byzantine validators alternate between branches."""
    _check_time(t)
    p0, b = split.p0, split.beta0
    active = p0 * (1.0 - b) + b * _semi_active_factor(t, params)
    return active / (active + (1.0 - p0) * (1.0 - b) * _inactive_factor(t, params))


def time_to_finalize_semi_active(split: PartitionSplit,
                                 params: LeakParams = DEFAULT_PARAMS) -> Crossing:
    """Bisection for the 2/3 crossing of :func:`active_ratio_semi_active`.

    No closed form exists. When the crossing lies beyond the inactive-ejection
    epoch the cap is returned with ``capped=True``.
    """
    cap = params.inactive_ejection_epoch

    def gap(t: float) -> float:
        return active_ratio_semi_active(split, t, params) - TWO_THIRDS

    if gap(0.0) >= 0:
        return Crossing(0.0, False)
    if gap(cap) < 0:
        return Crossing(cap, True)
    return Crossing(bisect_increasing(gap, 0.0, cap), False)


def byz_proportion(split: PartitionSplit, t: float,
                   params: LeakParams = DEFAULT_PARAMS) -> float:
    """Byzantine stake share on a branch where they are semi-active."""
    _check_time(t)
    p0, b = split.p0, split.beta0
    byz = b * _semi_active_factor(t, params)
    honest = p0 * (1.0 - b) + (1.0 - p0) * (1.0 - b) * _inactive_factor(t, params)
    return byz / (honest + byz)


def byz_max_proportion(split: PartitionSplit,
                       params: LeakParams = DEFAULT_PARAMS) -> float:
    """Byzantine share right after the inactive honest validators are ejected."""
    p0, b = split.p0, split.beta0
    byz = b * _semi_active_factor(params.inactive_ejection_epoch, params)
    return byz / (p0 * (1.0 - b) + byz)


def min_beta_for_threshold(p0: float,
                           params: LeakParams = DEFAULT_PARAMS) -> float:
    """Smallest ``beta0`` whose maximal share reaches 1/3.

    Solving ``b*E / (p0*(1-b) + b*E) = 1/3`` for ``b`` gives
    ``b = p0 / (p0 + 2E)`` with ``E`` the semi-active decay at ejection.
    """
    if not 0 < p0 < 1:
        raise ValueError(f"p0 must be in (0, 1), got {p0}")
    decay = _semi_active_factor(params.inactive_ejection_epoch, params)
    return p0 / (p0 + 2.0 * decay)
