"""The infinite-horizon strategy built from chip-stack strategies on growing intervals.

Interval ``r`` has length ``r**2 * K`` and runs the finite strategy with the
threshold ``eps2 = eps + 2*gamma/3`` on its own shifted window.  Exact
evaluation is truncated after ``R_max`` intervals and the unspent mass is
reported as a residual instead of being folded into either outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import CapacityError, InvalidArgument
from .frog_core import (
    OutcomeProbabilities,
    PlayOutcome,
    RationalThreshold,
    draw_candidate,
    draw_commit,
    heights_array,
    window_outcome,
)
from .streams import BitStream

DEFAULT_C = 64


@dataclass(frozen=True)
class CompositionParams:
    eps: Fraction
    gamma: Fraction
    K: int

    def __post_init__(self):
        object.__setattr__(self, "eps", Fraction(self.eps))
        object.__setattr__(self, "gamma", Fraction(self.gamma))
        _check_eps_gamma(self.eps, self.gamma)
        if self.K < 2:
            raise InvalidArgument(f"K must exceed 1, got {self.K}")

    @property
    def eps1(self) -> Fraction:
        # bookkeeping value only; no computation consumes it
        return self.eps + self.gamma / 3

    @property
    def eps2(self) -> Fraction:
        return self.eps + 2 * self.gamma / 3

    @property
    def threshold(self) -> RationalThreshold:
        return RationalThreshold.from_fraction(self.eps2)

    @classmethod
    def with_default_K(cls, eps, gamma, C=DEFAULT_C) -> "CompositionParams":
        return cls(Fraction(eps), Fraction(gamma), default_K(eps, gamma, C))


def _check_eps_gamma(eps: Fraction, gamma: Fraction) -> None:
    if not 0 < eps < 1:
        raise InvalidArgument(f"eps must lie in (0, 1), got {eps}")
    if gamma <= 0:
        raise InvalidArgument(f"gamma must be positive, got {gamma}")
    if eps + gamma >= 1:
        raise InvalidArgument(f"need eps + gamma < 1, got {eps + gamma}")


def default_K(eps, gamma, C=DEFAULT_C) -> int:
    """``max(2, ceil(C * eps2 / (gamma * (1 - eps2))))``."""
    eps, gamma, C = Fraction(eps), Fraction(gamma), Fraction(C)
    _check_eps_gamma(eps, gamma)
    eps2 = eps + 2 * gamma / 3
    return max(2, math.ceil(C * eps2 / (gamma * (1 - eps2))))


def schedule(K: int, r: int) -> tuple[int, int]:
    """1-based inclusive ``(start, end)`` of interval ``r``."""
    if K < 1 or r < 1:
        raise InvalidArgument(f"need K >= 1 and r >= 1, got K={K} r={r}")
    before = (r - 1) * r * (2 * r - 1) // 6  # sum of j**2 for j < r
    start = K * before + 1
    return start, start + r * r * K - 1


@dataclass(frozen=True)
class IntervalRecord:
    r: int
    start: int
    end: int
    reach: Fraction  # P_r
    outcome: OutcomeProbabilities


@dataclass
class CompositeReport:
    params: CompositionParams
    R_max: int
    intervals: list[IntervalRecord] = field(default_factory=list)
    success_total: Fraction = Fraction(0)
    death_total: Fraction = Fraction(0)
    residual: Fraction = Fraction(1)

    def check_consistency(self) -> None:
        """Recompute the totals from the per-interval records; raises on mismatch."""
        reach = Fraction(1)
        s = dth = Fraction(0)
        for rec in self.intervals:
            if rec.reach != reach:
                raise AssertionError(f"reach mismatch at r={rec.r}")
            s += reach * rec.outcome.success
            dth += reach * rec.outcome.death
            reach *= rec.outcome.wait
        if (s, dth, reach) != (self.success_total, self.death_total, self.residual):
            raise AssertionError("totals disagree with interval records")
        if s + dth + reach != 1:
            raise AssertionError("mass not conserved")


def _guard(params: CompositionParams, R_max: int) -> None:
    if R_max < 1:
        raise InvalidArgument(f"R_max must be >= 1, got {R_max}")
    th = params.threshold
    longest = R_max * R_max * params.K
    if th.d * longest >= 1 << 63 or th.p * longest * longest >= 1 << 62:
        raise CapacityError(f"R_max={R_max} with K={params.K} and threshold {th} exceeds 64-bit capacity")


def composed_exact(stream: BitStream, params: CompositionParams, R_max: int,
                   until_residual: Optional[Fraction] = None) -> CompositeReport:
    """Exact success/death/residual of the composed strategy, truncated at ``R_max``.

    With ``until_residual`` the run stops early once the residual drops below it.
    """
    _guard(params, R_max)
    th = params.threshold
    rep = CompositeReport(params, R_max)
    reach = Fraction(1)
    for r in range(1, R_max + 1):
        start, end = schedule(params.K, r)
        out = window_outcome(stream.segment(start - 1, end - start + 1), th)
        rep.intervals.append(IntervalRecord(r, start, end, reach, out))
        rep.success_total += reach * out.success
        rep.death_total += reach * out.death
        reach *= out.wait
        if until_residual is not None and reach < until_residual:
            rep.R_max = r
            break
    rep.residual = reach
    return rep


def sample_composed(stream: BitStream, params: CompositionParams, rng_seed: int, R_max: int) -> PlayOutcome:
    """One seeded play; ``t`` is the absolute stream index of the crossing.

    Interval ``r`` draws its candidate step and commit bit at labels ``(r, 0)``
    and ``(r, 1)`` of ``rng_seed``.
    """
    _guard(params, R_max)
    th = params.threshold
    for r in range(1, R_max + 1):
        start, end = schedule(params.K, r)
        length = end - start + 1
        t_star = draw_candidate(length, rng_seed, r)
        if t_star == 1:
            continue
        h = int(heights_array(stream.segment(start - 1, t_star - 1), th.p, th.q)[-1])
        if draw_commit(h, th.d, length, rng_seed, r):
            t = start + t_star - 1
            return PlayOutcome("squashed" if stream.bit_at(t) else "crossed_safely", t)
    return PlayOutcome("waited")
