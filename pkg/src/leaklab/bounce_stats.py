"""Stake statistics of honest validators under the probabilistic bouncing attack.

An honest validator that lands on a random branch each epoch sees its
inactivity score perform a random walk with drift ``V = 3/2`` per epoch.
Approximating the score by a Gaussian and integrating the stake ODE gives a
log-normal stake law; ejection below ``a`` and the ``b`` cap turn it into a
law with point masses at 0 and ``b``.

Normal tails go through ``scipy.special.erfc`` (Cody's rational Chebyshev
approximations, relative error ~1e-16), so both ends of the CDF keep full
precision instead of cancelling in ``1/2 + erf(x)/2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate, special, stats

from . import rng
from .leak_math import ONE_THIRD

PENALTY_SCALE = 2.0**26
DRIFT = 1.5


@dataclass(frozen=True)
class BounceParams:
    """Parameters of the stochastic stake model.

    ``diffusion`` defaults to ``25 * p0 * (1 - p0)``, the value used inside
    the Gaussian score density. The per-epoch variance of the underlying
    +4/-1 walk is also ``25 * p0 * (1 - p0)``, which for a heat kernel
    corresponds to half that diffusion coefficient; use
    :meth:`walk_matched` for the law that tracks the simulated walk.
    """

    p0: float
    beta0: float = 0.0
    diffusion: float | None = None
    drift: float = DRIFT
    floor: float = 16.75
    cap: float = 32.0
    penalty_scale: float = PENALTY_SCALE

    def __post_init__(self):
        if not 0 <= self.p0 <= 1:
            raise ValueError(f"p0 must be in [0, 1], got {self.p0}")
        if not 0 < self.floor < self.cap:
            raise ValueError("need 0 < floor < cap")
        if self.diffusion is not None and self.diffusion < 0:
            raise ValueError("diffusion must be non-negative")

    @property
    def D(self) -> float:
        if self.diffusion is not None:
            return self.diffusion
        return 25.0 * self.p0 * (1.0 - self.p0)

    @property
    def V(self) -> float:
        return self.drift

    @classmethod
    def walk_matched(cls, p0: float, beta0: float = 0.0, **kw) -> "BounceParams":
        return cls(p0, beta0, diffusion=12.5 * p0 * (1.0 - p0), **kw)


def step_distribution(p0):
    """Two-epoch score increments and their probabilities.

    Works with floats or :class:`fractions.Fraction` (exact arithmetic).
    """
    cross = p0 * (1 - p0)
    return [(8, cross), (3, p0 * p0 + (1 - p0) * (1 - p0)), (-2, cross)]


def p0_bounds(beta0: float) -> tuple[float, float]:
    """Honest split window in which the bouncing attack can be sustained."""
    if not 0 <= beta0 <= ONE_THIRD:
        raise ValueError(f"beta0 must be in [0, 1/3], got {beta0}")
    lower = (2.0 - 3.0 * beta0) / (3.0 * (1.0 - beta0))
    upper = 2.0 / (3.0 * (1.0 - beta0))
    return lower, upper


class LogProbability(NamedTuple):
    """Probability ``mantissa * 10**exponent`` with ``1 <= mantissa < 10``."""

    mantissa: float
    exponent: int

    @property
    def log10(self) -> float:
        return math.log10(self.mantissa) + self.exponent

    @property
    def value(self) -> float:
        # may underflow to 0.0
        return self.mantissa * 10.0**self.exponent


def continuation_probability(beta0: float, j: int, k: int) -> LogProbability:
    """``(1 - (1 - beta0)**j)**k``: a Byzantine proposer in the first ``j``
    slots of each of ``k`` epochs."""
    if j < 1 or k < 0:
        raise ValueError("need j >= 1 and k >= 0")
    if k == 0:
        return LogProbability(1.0, 0)
    honest_run = math.exp(j * math.log1p(-beta0)) if beta0 < 1 else 0.0
    if honest_run >= 1.0:
        return LogProbability(0.0, 0)
    log10_p = k * math.log1p(-honest_run) / math.log(10.0)
    exponent = math.floor(log10_p)
    mantissa = 10.0 ** (log10_p - exponent)
    if mantissa >= 10.0:
        mantissa /= 10.0
        exponent += 1
    return LogProbability(mantissa, int(exponent))


def score_gaussian_density(I, t: float, params: BounceParams):
    """Gaussian approximation of the inactivity score at epoch ``t``."""
    if t <= 0:
        raise ValueError("t must be positive")
    spread = 4.0 * params.D * t
    I = np.asarray(I, dtype=float)
    out = np.exp(-(I - params.V * t) ** 2 / spread) / math.sqrt(math.pi * spread)
    return out if out.ndim else float(out)


def _z_from_log(log_ratio, t: float, params: BounceParams):
    """Argument of erf in the stake CDF, from ``ln(s / cap)``."""
    if t <= 0:
        raise ValueError("t must be positive")
    scale = math.sqrt(4.0 / 3.0 * params.D * t**3)
    return (params.penalty_scale * log_ratio + params.V * t * t / 2.0) / scale, scale


def _log_ratio(s, params: BounceParams):
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("stake must be positive")
    return np.log(s / params.cap)


def stake_density(s, t: float, params: BounceParams):
    """Log-normal density of an honest validator's stake (no floor, no cap)."""
    z, scale = _z_from_log(_log_ratio(s, params), t, params)
    s = np.asarray(s, dtype=float)
    out = params.penalty_scale / (s * math.sqrt(math.pi) * scale) * np.exp(-z * z)
    return out if out.ndim else float(out)


def stake_cdf(s, t: float, params: BounceParams):
    z, _ = _z_from_log(_log_ratio(s, params), t, params)
    out = 0.5 * special.erfc(-z)
    return out if np.ndim(out) else float(out)


def stake_median(t: float, params: BounceParams) -> float:
    return params.cap * math.exp(-params.V * t * t / (2.0 * params.penalty_scale))


def stake_log_variance(t: float, params: BounceParams) -> float:
    """Variance of ``ln(s)`` under the log-normal law."""
    return (2.0 / 3.0) * params.D * t**3 / params.penalty_scale**2


def stake_mode(t: float, params: BounceParams) -> float:
    """Mode of the log-normal: ``median * exp(-sigma**2)``."""
    return stake_median(t, params) * math.exp(-stake_log_variance(t, params))


@dataclass(frozen=True)
class StakeLaw:
    """Stake law after ejection below ``floor`` and capping at ``cap``."""

    t: float
    params: BounceParams
    mass_at_zero: float
    mass_at_b: float

    def density(self, x):
        """Continuous part; zero outside ``(floor, cap)``."""
        x = np.asarray(x, dtype=float)
        inside = (x > self.params.floor) & (x < self.params.cap)
        out = np.zeros_like(x)
        if np.any(inside):
            out[inside] = stake_density(x[inside], self.t, self.params)
        return out if out.ndim else float(out)

    def continuous_mass(self) -> float:
        """Quadrature of :meth:`density` over ``(floor, cap)``."""
        # The peak can be ~1e-9 ETH wide next to 32, below the float
        # resolution of s itself, so integrate P(s) ds = P(s) s du over
        # u = ln(s / cap), restricted to 40 sigma around the median.
        p = self.params
        centre = -p.V * self.t * self.t / (2.0 * p.penalty_scale)
        sigma = math.sqrt(stake_log_variance(self.t, p))
        lo = max(math.log(p.floor / p.cap), centre - 40.0 * sigma)
        hi = min(0.0, centre + 40.0 * sigma)
        if lo >= hi:
            return 0.0

        def integrand(u: float) -> float:
            z, scale = _z_from_log(u, self.t, p)
            return p.penalty_scale / (math.sqrt(math.pi) * scale) * math.exp(-z * z)

        breaks = [u for u in (centre, centre - sigma * sigma) if lo < u < hi]
        mass, _ = integrate.quad(integrand, lo, hi, points=breaks or None,
                                 limit=500, epsabs=1e-14, epsrel=1e-12)
        return mass

    def total_mass(self) -> float:
        return self.mass_at_zero + self.mass_at_b + self.continuous_mass()


def truncated_stake_law(t: float, params: BounceParams) -> StakeLaw:
    if t <= 0:
        raise ValueError("t must be positive")
    return StakeLaw(
        t=t,
        params=params,
        mass_at_zero=stake_cdf(params.floor, t, params),
        mass_at_b=1.0 - stake_cdf(params.cap, t, params),
    )


def truncated_stake_cdf(x, t: float, params: BounceParams):
    """CDF of :class:`StakeLaw`; right-continuous, 1 at ``x >= cap``."""
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be non-negative")
    a, b = params.floor, params.cap
    f_a = stake_cdf(a, t, params)
    # H(0) = 1 on both steps
    clipped = np.clip(x, a, b)
    f_x = stake_cdf(clipped, t, params)
    out = np.where(x >= b, 1.0, np.where(x >= a, f_x, f_a))
    return out if out.ndim else float(out)


def byzantine_stake(t: float, params: BounceParams) -> float:
    """Stake of a Byzantine validator that alternates branches every epoch."""
    return params.cap * math.exp(-3.0 * t * t / (4.0 * params.penalty_scale))


def prob_byz_over_third(beta0: float, t: float, params: BounceParams) -> float:
    """Probability that the Byzantine share exceeds 1/3 on one branch.

    ``beta0 * sB / (beta0 * sB + (1 - beta0) * sH) > 1/3`` is equivalent to
    ``sH < 2 * beta0 / (1 - beta0) * sB``.
    """
    if not 0 < beta0 <= ONE_THIRD + 1e-12:
        raise ValueError(f"beta0 must be in (0, 1/3], got {beta0}")
    x = 2.0 * beta0 / (1.0 - beta0) * byzantine_stake(t, params)
    return truncated_stake_cdf(x, t, params)


def prob_byz_over_third_doubled(beta0: float, t: float, params: BounceParams) -> float:
    """Two-branch heuristic: the single-branch probability doubled, capped at 1.

    Adding the two branches assumes the two events are disjoint, which is not
    established; report it next to :func:`prob_byz_over_third`.
    """
    return min(1.0, 2.0 * prob_byz_over_third(beta0, t, params))


# -- Monte Carlo oracle -------------------------------------------------------

@dataclass
class WalkResult:
    """Empirical scores and stakes, one row per recorded epoch."""

    epochs: np.ndarray
    scores: np.ndarray  # (len(epochs), trials), int64
    stakes: np.ndarray  # (len(epochs), trials), float64
    p0: float
    trials: int
    seed: int
    bounded: bool

    def row(self, epoch: int) -> int:
        hits = np.flatnonzero(self.epochs == epoch)
        if hits.size == 0:
            raise KeyError(f"epoch {epoch} was not recorded")
        return int(hits[0])

    def scores_at(self, epoch: int) -> np.ndarray:
        return self.scores[self.row(epoch)]

    def stakes_at(self, epoch: int) -> np.ndarray:
        return self.stakes[self.row(epoch)]

    def histogram(self, epoch: int, bins=50, kind: str = "stake"):
        values = self.stakes_at(epoch) if kind == "stake" else self.scores_at(epoch)
        return np.histogram(values, bins=bins)

    def write_histogram_csv(self, path, epochs: Sequence[int] | None = None,
                            bins=50, kind: str = "stake") -> None:
        """CSV columns: epoch, bin_low, bin_high, count, trials, seed."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "bin_low", "bin_high", "count", "trials", "seed"])
            for epoch in (self.epochs if epochs is None else epochs):
                counts, edges = self.histogram(int(epoch), bins=bins, kind=kind)
                for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                    writer.writerow([int(epoch), f"{lo:.17g}", f"{hi:.17g}",
                                     int(c), self.trials, self.seed])


def monte_carlo_walk(p0: float, t_max: int, trials: int, seed: int,
                     bounded: bool = False, record=None,
                     alternating: bool = False,
                     penalty_scale: float = PENALTY_SCALE,
                     initial_stake: float = 32.0,
                     chunk: int = 20000) -> WalkResult:
    """Simulate the inactivity score and stake of independent honest validators.

    Each epoch a validator is on the observed branch with probability ``p0``
    (score -1, floored at 0 when ``bounded``) and otherwise on the other
    branch (score +4). With ``alternating`` the observed-branch probability
    switches between ``p0`` and ``1 - p0`` every epoch, as when the attacker
    targets each branch in turn; the drift is then 3/2 for every ``p0``.

    Stake follows ``s(t) = s(t-1) * (1 - I(t-1) / penalty_scale)`` with no
    floor and no cap. Trial ``i`` uses SplitMix64 stream ``i`` of ``seed``,
    draw ``t - 1`` for epoch ``t``.
    """
    if trials < 1 or t_max < 2:
        raise ValueError("need trials >= 1 and t_max >= 2")
    epochs = np.arange(1, t_max + 1) if record is None else np.unique(np.asarray(record, dtype=int))
    if epochs.size == 0 or epochs.min() < 0 or epochs.max() > t_max:
        raise ValueError("recorded epochs must lie in [0, t_max]")
    scores_out = np.empty((epochs.size, trials), dtype=np.int64)
    stakes_out = np.empty((epochs.size, trials), dtype=np.float64)
    wanted = {int(e): k for k, e in enumerate(epochs)}

    for start in range(0, trials, chunk):
        stop = min(trials, start + chunk)
        keys = rng.stream_keys(seed, np.arange(start, stop))
        score = np.zeros(stop - start, dtype=np.int64)
        stake = np.full(stop - start, initial_stake)
        if 0 in wanted:
            scores_out[wanted[0], start:stop] = score
            stakes_out[wanted[0], start:stop] = stake
        for t in range(1, t_max + 1):
            stake = stake * (1.0 - score / penalty_scale)
            p_obs = p0 if not alternating or t % 2 == 1 else 1.0 - p0
            on_branch = rng.uniforms(keys, t - 1) < p_obs
            score = np.where(on_branch, score - 1, score + 4)
            if bounded:
                np.maximum(score, 0, out=score)
            if t in wanted:
                scores_out[wanted[t], start:stop] = score
                stakes_out[wanted[t], start:stop] = stake
    return WalkResult(epochs, scores_out, stakes_out, p0, trials, seed, bounded)


def ks_distance(sample, cdf) -> float:
    """Two-sided Kolmogorov-Smirnov statistic of ``sample`` against ``cdf``.

    ``cdf`` must be continuous. Ties in the sample are handled exactly: each
    distinct value is compared against the empirical CDF at the top of its
    jump and just below it, so lattice-valued samples are fine.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    values, first = np.unique(x, return_index=True)
    upper = np.append(first[1:], n) / n  # ECDF at each distinct value
    lower = first / n                    # ECDF just below it
    f = np.asarray(cdf(values), dtype=float)
    return float(max(np.max(np.abs(upper - f)), np.max(np.abs(f - lower))))


def ks_two_sample(a, b) -> float:
    return float(stats.ks_2samp(a, b).statistic)

