"""The single-shot density forecaster and its exact analysis.

The forecaster picks a level ``R`` uniformly from ``1..n`` and a block ``S``
uniformly from ``1..2**(n-R)``, skips ``t = (S-1) * 2**R`` bits, watches the
next ``2**(R-1)`` bits and forecasts that the following ``2**(R-1)`` bits have
the same fraction of ones.  Viewing the first ``2**n`` bits as the leaves of a
depth-``n`` binary tree, the observed and forecast windows are the two halves
of one subtree, which is what the martingale report measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import rng
from .errors import CapacityError, InvalidArgument
from .streams import BitStream

MAX_N = 63  # 2**n must fit a signed 64-bit index
MAX_EXACT_N = 16
MAX_MARTINGALE_N = 20


@dataclass(frozen=True)
class ForecastParams:
    delta: Optional[Fraction]
    eps: Optional[Fraction]
    n: int
    overridden: bool = False

    @property
    def horizon(self) -> int:
        return 1 << self.n


def forecast_params(delta, eps, n_override: Optional[int] = None) -> ForecastParams:
    """``n = ceil(4 / (delta * eps**2))`` unless overridden."""
    delta, eps = Fraction(delta), Fraction(eps)
    if not (0 < delta <= 1 and 0 < eps <= 1):
        raise InvalidArgument(f"delta and eps must lie in (0, 1], got {delta}, {eps}")
    if n_override is not None:
        if not 1 <= n_override <= MAX_N:
            raise CapacityError(f"n must lie in [1, {MAX_N}], got {n_override}")
        return ForecastParams(delta, eps, n_override, True)
    n = math.ceil(4 / (delta * eps * eps))
    if n > MAX_N:
        raise CapacityError(f"n = {n} needs a horizon of 2**{n} bits; pass an explicit n override (<= {MAX_N})")
    return ForecastParams(delta, eps, n)


@dataclass(frozen=True)
class Forecast:
    R: int
    S: int
    t: int  # bits skipped
    N: int  # window length 2**(R-1)
    ones: int  # ones seen in the observation window
    p: Fraction

    @property
    def observed(self) -> tuple[int, int]:
        return self.t + 1, self.t + self.N

    @property
    def window(self) -> tuple[int, int]:
        """1-based inclusive range the forecast is about."""
        return self.t + self.N + 1, self.t + 2 * self.N


@dataclass(frozen=True)
class ScoredForecast:
    forecast: Forecast
    p_star: Fraction
    success: bool


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_N:
        raise CapacityError(f"n must lie in [1, {MAX_N}], got {n}")


def choose_block(n: int, seed: int) -> tuple[int, int]:
    """``(R, S)``; R is drawn first, then S."""
    _check_n(n)
    R = 1 + rng.uniform_below(n, seed, 0)
    S = 1 + rng.uniform_below(1 << (n - R), seed, 1)
    return R, S


def run_forecaster(stream: BitStream, n: int, rng_seed: int) -> Forecast:
    """Commit a forecast having read only the observation window."""
    R, S = choose_block(n, rng_seed)
    N = 1 << (R - 1)
    t = (S - 1) << R
    ones = int(stream.segment(t, N).sum(dtype=np.int64))
    return Forecast(R, S, t, N, ones, Fraction(ones, N))


def score_forecast(stream: BitStream, forecast: Forecast, eps) -> ScoredForecast:
    """Success iff the realised fraction lies in the open interval ``(p - eps, p + eps)``."""
    start, _ = forecast.window
    ones = int(stream.segment(start - 1, forecast.N).sum(dtype=np.int64))
    p_star = Fraction(ones, forecast.N)
    return ScoredForecast(forecast, p_star, abs(forecast.p - p_star) < Fraction(eps))


def _leaves(prefix, n: int) -> np.ndarray:
    x = np.asarray(prefix, dtype=np.int64)
    if len(x) < (1 << n):
        raise InvalidArgument(f"need the first 2**{n} = {1 << n} bits, got {len(x)}")
    return x[:1 << n]


def _block_pairs(x: np.ndarray, n: int):
    """Yield ``(R, observed ones per block, forecast ones per block)`` over all S at once."""
    for R in range(1, n + 1):
        half = 1 << (R - 1)
        blocks = x.reshape(1 << (n - R), 2, half).sum(axis=2)
        yield R, blocks[:, 0], blocks[:, 1]


def exact_failure_probability(prefix: Sequence[int], n: int, eps) -> Fraction:
    """Exact probability over ``(R, S)`` that the forecast misses by ``>= eps``.

    Pair ``(R, S)`` has probability ``1 / (n * 2**(n-R))``.
    """
    if n > MAX_EXACT_N:
        raise CapacityError(f"exact enumeration is limited to n <= {MAX_EXACT_N}, got {n}")
    if n < 1:
        raise InvalidArgument(f"n must be >= 1, got {n}")
    x = _leaves(prefix, n)
    eps = Fraction(eps)
    fail = 0  # numerator over n * 2**n
    for R, a, b in _block_pairs(x, n):
        half = 1 << (R - 1)
        # |a - b| / half >= eps  <=>  |a - b| * eps.den >= eps.num * half
        missed = np.abs(a - b) * eps.denominator >= eps.numerator * half
        fail += int(missed.sum()) << R
    return Fraction(fail, n << n)


@dataclass(frozen=True)
class MartingaleReport:
    n: int
    total_variance: Fraction  # E[(X(n) - X(0))^2]
    level_terms: tuple[Fraction, ...]  # E[(X(t+1) - X(t))^2], t = 0..n-1
    level_sum: Fraction
    residuals: tuple[Fraction, ...]  # max |E[X(t+1) - X(t) | z_1..z_t]| per level
    forecast_sq_error: Fraction  # E[(p - p*)^2] over the forecaster's randomness
    forecast_bound: Fraction  # 4/n

    @property
    def identity_holds(self) -> bool:
        return self.total_variance == self.level_sum

    @property
    def bound_holds(self) -> bool:
        return self.forecast_sq_error <= self.forecast_bound


def tree_levels(prefix, n: int) -> list[np.ndarray]:
    """``counts[i][y]`` = number of ones under the depth-``i`` node ``y`` (lexicographic order)."""
    x = _leaves(prefix, n)
    levels = [x]
    for _ in range(n):
        levels.append(levels[-1].reshape(-1, 2).sum(axis=1))
    return levels[::-1]


def rho(prefix, n: int, y: str) -> Fraction:
    """Fraction of ones among the leaves under node ``y`` (a 0/1 string)."""
    i = len(y)
    if i > n or any(c not in "01" for c in y):
        raise InvalidArgument(f"bad node label {y!r}")
    c = tree_levels(prefix, n)[i][int(y, 2) if y else 0]
    return Fraction(int(c), 1 << (n - i))


def martingale_report(prefix, n: int) -> MartingaleReport:
    if n > MAX_MARTINGALE_N:
        raise CapacityError(f"martingale report is limited to n <= {MAX_MARTINGALE_N}, got {n}")
    if n < 1:
        raise InvalidArgument(f"n must be >= 1, got {n}")
    counts = tree_levels(prefix, n)
    root = int(counts[0][0])
    x = counts[n]
    # (x_z - root / 2**n)^2 averaged over 2**n leaves
    total = Fraction(int((((x << n) - root) ** 2).sum()), 1 << (3 * n))
    terms, residuals = [], []
    for t in range(n):
        parent = np.repeat(counts[t], 2)
        child = counts[t + 1]
        # rho(child) - rho(parent) = (2 c_child - c_parent) / 2**(n-t)
        diff = 2 * child - parent
        terms.append(Fraction(int((diff * diff).sum()), (1 << (2 * (n - t))) * (1 << (t + 1))))
        pair = diff.reshape(-1, 2).sum(axis=1)  # proportional to the conditional mean
        residuals.append(Fraction(int(np.abs(pair).max()), 1 << (n - t + 1)))
    sq = Fraction(0)
    for R, a, b in _block_pairs(counts[n], n):
        half = 1 << (R - 1)
        # (p - p*)^2 = (a - b)^2 / half^2, block weight 1 / (n * 2**(n-R))
        sq += Fraction(int(((a - b) ** 2).sum()), half * half * n * (1 << (n - R)))
    return MartingaleReport(n, total, tuple(terms), sum(terms, Fraction(0)), tuple(residuals),
                            sq, Fraction(4, n))
