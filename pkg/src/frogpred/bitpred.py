"""Bit prediction: automata over {0,1}, the two-sided predictor and the
automaton-routed predictor.

Predictors come in two equivalent forms.  The streaming form
(:class:`PredictorState`) sees one bit at a time and so cannot look ahead.
The replay form (``strategy.prepare(bits).play(seed)``) evaluates the same
random choices against a known finite prefix, reusing the stack heights across
trials.  Both address their randomness by ``(seed, labels)`` so they agree
draw for draw; the tests hold them to that.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional
import warnings

import numpy as np

from . import rng
from .errors import InvalidArgument, NotStronglyAccessible
from .frog_composed import DEFAULT_C, CompositionParams, default_K, schedule
from .frog_core import draw_candidate, draw_commit, heights_array
from .streams import BitStream


# --------------------------------------------------------------------------
# automata


@dataclass(frozen=True)
class Automaton:
    """Deterministic automaton with states ``1..n_states``.

    ``delta[q - 1] == (next state on 0, next state on 1)``.
    """
    n_states: int
    start: int
    delta: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n_states < 1:
            raise InvalidArgument("an automaton needs at least one state")
        if len(self.delta) != self.n_states:
            raise InvalidArgument(f"delta needs {self.n_states} rows, got {len(self.delta)}")
        object.__setattr__(self, "delta", tuple(tuple(int(v) for v in row) for row in self.delta))
        for row in self.delta:
            if len(row) != 2 or not all(1 <= v <= self.n_states for v in row):
                raise InvalidArgument(f"bad transition row {row}")
        if not 1 <= self.start <= self.n_states:
            raise InvalidArgument(f"start state {self.start} out of range")

    @property
    def states(self) -> range:
        return range(1, self.n_states + 1)

    def step(self, q: int, bit: int) -> int:
        return self.delta[q - 1][bit]

    def check_states(self, B) -> frozenset:
        B = frozenset(B)
        if not B <= set(self.states):
            raise InvalidArgument(f"bad states {sorted(B - set(self.states))} not in 1..{self.n_states}")
        return B

    @classmethod
    def counter(cls, n: int) -> "Automaton":
        """Counts consecutive ones, saturating at ``n``; any 0 resets to state 1."""
        return cls(n, 1, tuple((1, min(i + 1, n)) for i in range(1, n + 1)))


def load_automaton(path) -> tuple[Automaton, frozenset]:
    """Read ``{"states": n, "start": s, "delta": [[q0, q1], ...], "bad": [...]}``."""
    doc = json.loads(Path(path).read_text())
    return automaton_from_json(doc)


def automaton_from_json(doc: dict) -> tuple[Automaton, frozenset]:
    try:
        M = Automaton(int(doc["states"]), int(doc["start"]), tuple(tuple(r) for r in doc["delta"]))
        B = M.check_states(int(b) for b in doc.get("bad", []))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidArgument):
            raise
        raise InvalidArgument(f"malformed automaton document: {exc}") from None
    return M, B


def automaton_to_json(M: Automaton, B=()) -> dict:
    return {"states": M.n_states, "start": M.start, "delta": [list(r) for r in M.delta],
            "bad": sorted(B)}


@dataclass(frozen=True)
class RunTrace:
    states: tuple[int, ...]  # q_0 .. q_T
    visits: dict  # state -> tuple of visit times
    bad_bits: tuple[int, ...]  # 1 at t iff q_t in B

    def visit_counts(self) -> dict:
        return {q: len(v) for q, v in self.visits.items()}


def trace_states(M: Automaton, bits) -> np.ndarray:
    """``q_0 .. q_T`` as an int array."""
    table = M.delta
    out = np.empty(len(bits) + 1, dtype=np.int32)
    q = M.start
    out[0] = q
    # bytes iteration keeps the per-bit loop cheap
    for t, b in enumerate(bytes(np.asarray(bits, dtype=np.uint8)), 1):
        q = table[q - 1][b]
        out[t] = q
    return out


def run_trace(M: Automaton, B, prefix) -> RunTrace:
    B = M.check_states(B)
    qs = trace_states(M, prefix)
    visits = {q: tuple(int(t) for t in np.nonzero(qs == q)[0]) for q in M.states}
    bad = tuple(int(q in B) for q in qs.tolist())
    return RunTrace(tuple(qs.tolist()), visits, bad)


@dataclass(frozen=True)
class Accessibility:
    accessible: bool
    witness: Optional[int] = None  # a reachable state with no path to B

    def __bool__(self):
        return self.accessible


def _bfs(seeds, neighbours) -> set:
    seen = set(seeds)
    todo = deque(seeds)
    while todo:
        q = todo.popleft()
        for r in neighbours(q):
            if r not in seen:
                seen.add(r)
                todo.append(r)
    return seen


def strongly_accessible(M: Automaton, B) -> Accessibility:
    """Can every state reachable from the start still reach ``B``?"""
    B = M.check_states(B)
    if not B:
        raise InvalidArgument("the bad-state set must be nonempty")
    forward = _bfs([M.start], lambda q: M.delta[q - 1])
    preds = {q: [] for q in M.states}
    for q in M.states:
        for r in M.delta[q - 1]:
            preds[r].append(q)
    backward = _bfs(sorted(B), lambda q: preds[q])
    stuck = sorted(forward - backward)
    return Accessibility(not stuck, stuck[0] if stuck else None)


def subsequence(M: Automaton, q: int, prefix) -> list[int]:
    """Bits seen immediately after each visit to ``q``, as far as the prefix goes."""
    M.check_states([q])
    bits = np.asarray(prefix, dtype=np.uint8)
    qs = trace_states(M, bits)[:-1]
    return bits[qs == q].tolist()


# --------------------------------------------------------------------------
# streaming predictors


@dataclass
class BitPrediction:
    """Prediction ``z`` for bit ``t + 1``, committed after seeing bits ``1..t``."""
    t: int
    z: int
    correct: Optional[str] = None  # "correct" | "incorrect" | "none" once scored

    def score(self, bits) -> str:
        idx = self.t + 1
        if idx > len(bits):
            self.correct = "none"
        else:
            self.correct = "correct" if int(bits[idx - 1]) == self.z else "incorrect"
        return self.correct


class FrogCopy:
    """Streaming form of the composed frog strategy.

    ``step(bit)`` returns True when the strategy decides to cross at the next
    step, i.e. predicts that the next bit is 0.
    """

    def __init__(self, params: CompositionParams, R_max: int, seed: int):
        self.thresh = params.threshold
        self.K = params.K
        self.R_max = R_max
        self.seed = seed
        self.done = False
        self.fired = False
        self._enter(1)

    def _enter(self, r: int):
        self.r = r
        self.length = r * r * self.K
        self.pos = 0
        self.height = 0
        self.t_star = draw_candidate(self.length, self.seed, r)

    def step(self, bit: int) -> bool:
        if self.done:
            return False
        if self.pos < self.t_star - 1:
            self.height = self.height + self.thresh.p if bit == 0 else max(0, self.height - self.thresh.q)
        self.pos += 1
        if self.pos == self.t_star - 1:
            if draw_commit(self.height, self.thresh.d, self.length, self.seed, self.r):
                self.done = self.fired = True
                return True
        if self.pos == self.length:
            if self.r == self.R_max:
                self.done = True
            else:
                self._enter(self.r + 1)
        return False


class PredictorState:
    """Single-owner streaming predictor; emits at most one prediction."""

    def __init__(self):
        self.t = 0
        self.prediction: Optional[BitPrediction] = None

    def step(self, bit: int) -> Optional[BitPrediction]:
        if self.prediction is not None:
            self.t += 1
            return None
        self.t += 1
        z = self._advance(int(bit))
        if z is not None:
            self.prediction = BitPrediction(self.t, z)
            return self.prediction
        return None

    def _advance(self, bit: int) -> Optional[int]:
        raise NotImplementedError


class TwoSidedPredictorState(PredictorState):
    def __init__(self, params: CompositionParams, R_max: int, seed: int):
        super().__init__()
        self.on_bits = FrogCopy(params, R_max, rng.derive_seed(seed, 0))
        self.on_complement = FrogCopy(params, R_max, rng.derive_seed(seed, 1))

    def _advance(self, bit):
        zero = self.on_bits.step(bit)
        one = self.on_complement.step(1 - bit)
        if zero:
            return 0  # also the tie-break
        if one:
            return 1
        return None


class AutomatonPredictorState(PredictorState):
    def __init__(self, M: Automaton, inner: "TwoSidedStrategy", seed: int):
        super().__init__()
        self.M = M
        self.q = M.start
        self.inner = {j: inner(rng.derive_seed(seed, j)) for j in M.states}
        self.pending: dict[int, int] = {}

    def _advance(self, bit):
        j = self.q
        pred = self.inner[j].step(bit)
        if pred is not None:
            self.pending[j] = pred.z
        self.q = self.M.step(self.q, bit)
        # the next visit to a state whose copy has spoken is the commit point
        return self.pending.get(self.q)


# --------------------------------------------------------------------------
# replay form


class PreparedFrog:
    """Composed frog strategy against a fixed finite bit array."""

    def __init__(self, bits: np.ndarray, params: CompositionParams, R_max: int):
        self.bits = bits
        self.n = len(bits)
        self.params = params
        self.R_max = R_max
        th = params.threshold
        self.thresh = th
        self.heights: list[np.ndarray] = []
        for r in range(1, R_max + 1):
            start, end = schedule(params.K, r)
            if start - 1 > self.n:
                break
            # decision bits of interval r that exist in the data
            seg = bits[start - 1:min(end - 1, self.n)]
            self.heights.append(heights_array(seg, th.p, th.q))

    def play(self, seed: int) -> Optional[int]:
        """1-based index of the bit predicted to be 0, or None."""
        d, K = self.thresh.d, self.params.K
        for r, H in enumerate(self.heights, 1):
            start = K * ((r - 1) * r * (2 * r - 1) // 6) + 1
            length = r * r * K
            t_star = draw_candidate(length, seed, r)
            if t_star == 1:
                continue
            if t_star - 1 >= len(H):
                return None  # decision point lies past the data
            if draw_commit(int(H[t_star - 1]), d, length, seed, r):
                return start + t_star - 1
            if start + length - 1 > self.n:
                return None
        return None

    def fire_masses(self, limit: Optional[int] = None) -> tuple[Fraction, Fraction]:
        """Exact probability of crossing onto a 0 / onto a 1 at an index ``<= limit``.

        ``limit`` defaults to the data length.
        """
        limit = self.n if limit is None else min(limit, self.n)
        d, K = self.thresh.d, self.params.K
        reach = Fraction(1)
        on0 = on1 = 0  # Fractions accumulated per interval
        for r, H in enumerate(self.heights, 1):
            start, end = schedule(K, r)
            if start > limit:
                break
            length = r * r * K
            den = d * length * length
            top = min(length, limit - start + 1, len(H))
            h = H[:top]
            scored = self.bits[start - 1:start - 1 + top]
            ones = int(h[scored == 1].sum())
            zeros = int(h.sum()) - ones
            on0 += reach * Fraction(zeros, den)
            on1 += reach * Fraction(ones, den)
            if end > limit or len(H) < length:
                break
            reach *= 1 - Fraction(int(H.sum()), den)
        return Fraction(on0), Fraction(on1)


class PreparedTwoSided:
    def __init__(self, bits, params: CompositionParams, R_max: int):
        bits = np.asarray(bits, dtype=np.uint8)
        self.on_bits = PreparedFrog(bits, params, R_max)
        self.on_complement = PreparedFrog(1 - bits, params, R_max)

    def play(self, seed: int) -> Optional[tuple[int, int]]:
        """``(index of predicted bit, predicted value)`` or None."""
        f0 = self.on_bits.play(rng.derive_seed(seed, 0))
        f1 = self.on_complement.play(rng.derive_seed(seed, 1))
        if f0 is None and f1 is None:
            return None
        if f1 is None or (f0 is not None and f0 <= f1):
            return f0, 0
        return f1, 1

    def predict(self, seed: int) -> Optional[BitPrediction]:
        res = self.play(seed)
        return None if res is None else BitPrediction(res[0] - 1, res[1])

    def none_probability(self, limit: Optional[int] = None) -> Fraction:
        """Exact probability that no prediction lands on an index ``<= limit``."""
        a = sum(self.on_bits.fire_masses(limit))
        b = sum(self.on_complement.fire_masses(limit))
        return (1 - a) * (1 - b)

    def incorrect_bound(self, limit: Optional[int] = None) -> Fraction:
        """Sum of both copies' exact death masses, an upper bound on a wrong prediction."""
        return self.on_bits.fire_masses(limit)[1] + self.on_complement.fire_masses(limit)[1]


class PreparedAutomaton:
    def __init__(self, bits, M: Automaton, inner: "TwoSidedStrategy"):
        bits = np.asarray(bits, dtype=np.uint8)
        qs = trace_states(M, bits)
        self.M = M
        self.visits = {j: np.nonzero(qs == j)[0] for j in M.states}
        self.inner = {j: inner.prepare(bits[qs[:-1] == j]) for j in M.states}

    def none_probability(self) -> Fraction:
        """Exact probability that the outer strategy makes no scorable prediction."""
        out = Fraction(1)
        for prep in self.inner.values():
            out *= prep.none_probability()
        return out

    def predict(self, seed: int) -> Optional[BitPrediction]:
        best = None
        for j in self.M.states:
            res = self.inner[j].play(rng.derive_seed(seed, j))
            if res is None:
                continue
            f, z = res
            V = self.visits[j]
            if f <= len(V):
                t = int(V[f - 1])
                if best is None or t < best.t:
                    best = BitPrediction(t, z)
        return best


# --------------------------------------------------------------------------
# strategies


@dataclass(frozen=True)
class TwoSidedStrategy:
    """Predict 0 when the frog copy on the bits crosses, 1 when the copy on the complement does."""
    delta: Fraction
    params: CompositionParams
    R_max: int

    def __call__(self, seed: int) -> TwoSidedPredictorState:
        return TwoSidedPredictorState(self.params, self.R_max, seed)

    def prepare(self, bits) -> PreparedTwoSided:
        return PreparedTwoSided(bits, self.params, self.R_max)

    @property
    def horizon(self) -> int:
        """Last index any copy can act on."""
        return schedule(self.params.K, self.R_max)[1]


def two_sided_predictor(delta, K: Optional[int] = None, R_max: int = 8, C=DEFAULT_C) -> TwoSidedStrategy:
    """Two-sided predictor with per-copy parameters ``eps = gamma = delta / 4``.

    ``K=None`` uses :func:`default_K` with constant ``C``.
    """
    delta = Fraction(delta)
    if not 0 < delta < 1:
        raise InvalidArgument(f"delta must lie in (0, 1), got {delta}")
    eps = gamma = delta / 4
    K = default_K(eps, gamma, C) if K is None else K
    return TwoSidedStrategy(delta, CompositionParams(eps, gamma, K), R_max)


@dataclass(frozen=True)
class AutomatonStrategy:
    M: Automaton
    B: frozenset
    eps: Fraction
    inner: TwoSidedStrategy

    def __call__(self, seed: int) -> AutomatonPredictorState:
        return AutomatonPredictorState(self.M, self.inner, seed)

    def prepare(self, bits) -> PreparedAutomaton:
        return PreparedAutomaton(bits, self.M, self.inner)


def automaton_predictor(M: Automaton, B, eps, K: Optional[int] = None, R_max: int = 8, C=DEFAULT_C,
                        on_inaccessible: str = "raise") -> AutomatonStrategy:
    """One two-sided predictor with ``delta = eps / (2 * n_states)`` per state.

    Copy ``j`` gets seed ``derive_seed(seed, j)``.  ``on_inaccessible`` is
    ``"raise"`` or ``"warn"``.
    """
    B = M.check_states(B)
    acc = strongly_accessible(M, B)
    if not acc:
        if on_inaccessible == "raise":
            raise NotStronglyAccessible(acc.witness)
        warnings.warn(str(NotStronglyAccessible(acc.witness)), stacklevel=2)
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise InvalidArgument(f"eps must lie in (0, 1), got {eps}")
    inner = two_sided_predictor(eps / (2 * M.n_states), K, R_max, C)
    return AutomatonStrategy(M, B, eps, inner)


# --------------------------------------------------------------------------
# evaluation


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    phat = successes / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class BitPredStats:
    trials: int
    correct: int = 0
    incorrect: int = 0
    none: int = 0
    outcomes: list = field(default_factory=list, repr=False)

    @property
    def correct_rate(self) -> float:
        return self.correct / self.trials

    @property
    def incorrect_rate(self) -> float:
        return self.incorrect / self.trials

    @property
    def correct_ci(self) -> tuple[float, float]:
        return wilson_interval(self.correct, self.trials)

    @property
    def incorrect_ci(self) -> tuple[float, float]:
        return wilson_interval(self.incorrect, self.trials)


def play_streaming(strategy: Callable[[int], PredictorState], bits, seed: int) -> Optional[BitPrediction]:
    state = strategy(seed)
    for b in bytes(np.asarray(bits, dtype=np.uint8)):
        pred = state.step(b)
        if pred is not None:
            return pred
    return None


def evaluate(strategy, stream: BitStream, horizon: int, trials: int, seed: int,
             streaming: bool = False) -> BitPredStats:
    """Replay ``trials`` independent runs over bits ``1..horizon``.

    Trial ``k`` uses seed ``derive_seed(seed, k)``.  The replay form is used
    when the strategy offers one, unless ``streaming`` is set.
    """
    if horizon < 1 or trials < 1:
        raise InvalidArgument("horizon and trials must be >= 1")
    bits = stream.prefix(horizon)
    prepared = None if streaming or not hasattr(strategy, "prepare") else strategy.prepare(bits)
    stats = BitPredStats(trials)
    for k in range(trials):
        s = rng.derive_seed(seed, k)
        pred = prepared.predict(s) if prepared is not None else play_streaming(strategy, bits, s)
        verdict = "none" if pred is None else pred.score(bits)
        setattr(stats, verdict, getattr(stats, verdict) + 1)
        stats.outcomes.append(verdict)
    return stats
