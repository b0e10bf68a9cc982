"""The finite-horizon chip-stack strategy.

With threshold ``delta = p/d`` and ``q = d - p``, the strategy picks a
candidate step ``t*`` uniformly from ``1..K``, keeps a stack that gains ``p``
chips on every 0 and loses ``q`` chips (floored at zero) on every 1, and after
bit ``t* - 1`` attempts to cross at ``t*`` with probability
``H_{t*-1} / (d K)``.  Only bits ``1..K-1`` are ever read.

All probabilities are exact ``Fraction`` values.  Heights are computed with
numpy as a reflected walk, ``H_t = S_t - min_{s<=t} S_s`` where ``S`` is the
unfloored walk, which equals the floored recurrence since ``H_0 = S_0 = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import rng
from .errors import CapacityError, InvalidArgument
from .streams import BitStream

INT64_SAFE = 1 << 62


@dataclass(frozen=True)
class RationalThreshold:
    p: int
    d: int

    def __post_init__(self):
        if not (isinstance(self.p, int) and isinstance(self.d, int)) or not 0 < self.p < self.d:
            raise InvalidArgument(f"threshold needs integers 0 < p < d, got p={self.p} d={self.d}")

    @property
    def q(self) -> int:
        return self.d - self.p

    @property
    def delta(self) -> Fraction:
        return Fraction(self.p, self.d)

    @classmethod
    def from_fraction(cls, x) -> "RationalThreshold":
        x = Fraction(x)
        return cls(x.numerator, x.denominator)

    @classmethod
    def from_decimal(cls, x: float, max_denominator: int = 10**6) -> "RationalThreshold":
        return cls.from_fraction(Fraction(x).limit_denominator(max_denominator))

    def __str__(self):
        return f"{self.p}/{self.d}"


@dataclass(frozen=True)
class StackTrace:
    heights: tuple[int, ...]


@dataclass(frozen=True)
class StepDistribution:
    horizon: int
    step_probs: tuple[Fraction, ...]
    p_infty: Fraction

    def __post_init__(self):
        if len(self.step_probs) != self.horizon:
            raise InvalidArgument("step_probs must have one entry per step")

    def prob(self, i) -> Fraction:
        """pi(i) for any i >= 1 (zero past the horizon) or i = inf."""
        if i == float("inf"):
            return self.p_infty
        return self.step_probs[i - 1] if 1 <= i <= self.horizon else Fraction(0)


@dataclass(frozen=True)
class OutcomeProbabilities:
    success: Fraction
    death: Fraction
    wait: Fraction


@dataclass(frozen=True)
class PlayOutcome:
    result: str  # "crossed_safely" | "squashed" | "waited"
    t: Optional[int] = None

    @property
    def crossed(self) -> bool:
        return self.result != "waited"


@dataclass(frozen=True)
class BoundReport:
    pi_infty: Fraction
    delta_prime: Fraction
    bound_ii: Optional[Fraction]
    pass_ii: Optional[bool]  # None when delta' >= delta (outside the hypothesis)
    excess_iii: Fraction  # DP - (p/q) SP
    bound_iii: Fraction
    pass_iii: bool


def _as_array(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.int8)
    if arr.ndim != 1 or (arr.size and (arr.min() < 0 or arr.max() > 1)):
        raise InvalidArgument("bits must be a flat sequence of 0/1")
    return arr


def heights_array(bits, p: int, q: int) -> np.ndarray:
    """``H_0 .. H_n`` for ``n = len(bits)`` as an int64 array."""
    arr = _as_array(bits)
    n = len(arr)
    if p * (n + 1) >= INT64_SAFE or q * (n + 1) >= INT64_SAFE:
        raise CapacityError(f"stack heights for {n} bits exceed int64")
    steps = np.where(arr == 0, p, -q).astype(np.int64)
    walk = np.empty(n + 1, dtype=np.int64)
    walk[0] = 0
    np.cumsum(steps, out=walk[1:])
    return walk - np.minimum.accumulate(walk)


def stack_heights(prefix: Sequence[int], thresh: RationalThreshold) -> StackTrace:
    """Heights ``H_0 .. H_{K-1}`` for a decision prefix of ``K - 1`` bits."""
    if len(prefix) < 1:
        raise InvalidArgument("need K >= 2, i.e. a prefix of at least one bit")
    return StackTrace(tuple(int(h) for h in heights_array(prefix, thresh.p, thresh.q)))


def chip_stack_distribution(prefix: Sequence[int], thresh: RationalThreshold, K: int) -> StepDistribution:
    if K < 2:
        raise InvalidArgument(f"K must exceed 1, got {K}")
    if len(prefix) != K - 1:
        raise InvalidArgument(f"decision prefix must have K-1 = {K - 1} bits, got {len(prefix)}")
    H = heights_array(prefix, thresh.p, thresh.q)
    den = thresh.d * K * K
    probs = tuple(Fraction(int(h), den) for h in H)
    return StepDistribution(K, probs, 1 - Fraction(int(H.sum()), den))


def outcome_probabilities(dist: StepDistribution, bits: Sequence[int]) -> OutcomeProbabilities:
    if len(bits) != dist.horizon:
        raise InvalidArgument(f"scoring needs {dist.horizon} bits, got {len(bits)}")
    success = sum((pr for pr, b in zip(dist.step_probs, bits) if b == 0), Fraction(0))
    death = sum((pr for pr, b in zip(dist.step_probs, bits) if b == 1), Fraction(0))
    return OutcomeProbabilities(success, death, dist.p_infty)


def window_sums(window, thresh: RationalThreshold) -> tuple[int, int, int]:
    """Integer sums ``(sum_{b_t=0} H_{t-1}, sum_{b_t=1} H_{t-1}, sum_t H_{t-1})`` over a K-bit window."""
    arr = _as_array(window)
    K = len(arr)
    if thresh.p * K * K >= INT64_SAFE:
        raise CapacityError(f"window of {K} bits too long for exact int64 accumulation")
    H = heights_array(arr[:-1], thresh.p, thresh.q)
    total = int(H.sum())
    dead = int(H[arr == 1].sum())
    return total - dead, dead, total


def window_outcome(window, thresh: RationalThreshold) -> OutcomeProbabilities:
    """Outcome probabilities of the K-step strategy on a K-bit window (K = len(window))."""
    K = len(window)
    if K < 2:
        raise InvalidArgument(f"K must exceed 1, got {K}")
    s0, s1, total = window_sums(window, thresh)
    den = thresh.d * K * K
    return OutcomeProbabilities(Fraction(s0, den), Fraction(s1, den), 1 - Fraction(total, den))


def lemma_bounds_check(bits: Sequence[int], thresh: RationalThreshold, K: int) -> BoundReport:
    """Evaluate both explicit-constant guarantees on one K-bit window.

    ``bits[:K-1]`` drive the strategy, ``bits[K-1]`` is scored only.
    """
    if len(bits) != K:
        raise InvalidArgument(f"need exactly K = {K} bits, got {len(bits)}")
    out = window_outcome(bits, thresh)
    p, q, d = thresh.p, thresh.q, thresh.d
    delta = thresh.delta
    delta_prime = Fraction(int(sum(bits[:K - 1])), K - 1)
    if delta_prime < delta:
        bound_ii = 1 - (delta - delta_prime) ** 2 / (8 * delta)
        pass_ii = out.wait < bound_ii
    else:
        bound_ii, pass_ii = None, None
    excess = out.death - Fraction(p, q) * out.success
    bound_iii = (Fraction(p * p, q) + 2 * p) / (d * K)
    return BoundReport(out.wait, delta_prime, bound_ii, pass_ii, excess, bound_iii, excess < bound_iii)


def draw_candidate(K: int, seed: int, label: int) -> int:
    """Candidate crossing step ``t*`` in ``1..K`` (drawn first)."""
    return 1 + rng.uniform_below(K, seed, label, 0)


def draw_commit(height: int, d: int, K: int, seed: int, label: int) -> bool:
    """The 0/1 draw with mean ``height / (d K)`` (drawn second)."""
    if height <= 0:
        return False
    if d * K >= 1 << 63:
        raise CapacityError(f"d*K = {d * K} exceeds the 64-bit draw range")
    return rng.uniform_below(d * K, seed, label, 1) < height


def sample_finite(stream: BitStream, offset: int, thresh: RationalThreshold, K: int, rng_seed: int,
                  label: int = 1) -> PlayOutcome:
    """Play the K-step strategy once on bits ``offset+1 .. offset+K``.

    ``t`` in the outcome is the step within the window (1..K).
    """
    if K < 2:
        raise InvalidArgument(f"K must exceed 1, got {K}")
    t_star = draw_candidate(K, rng_seed, label)
    if t_star == 1:
        return PlayOutcome("waited")
    seen = stream.segment(offset, t_star - 1)
    h = int(heights_array(seen, thresh.p, thresh.q)[-1])
    if not draw_commit(h, thresh.d, K, rng_seed, label):
        return PlayOutcome("waited")
    bit = stream.bit_at(offset + t_star)
    return PlayOutcome("squashed" if bit else "crossed_safely", t_star)
