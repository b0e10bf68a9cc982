"""Infinite binary sequences: specs, generators and prefix densities.

Indices are 1-based throughout: ``bit_at(1)`` is the first bit.  A stream is
a pure function of the index (and of its seed when stochastic), so it can be
queried in any order, shared between threads, and replayed exactly.
"""

from __future__ import annotations

import bisect
import math
import re
import threading
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from . import rng
from .errors import InvalidArgument, InvalidSpec, ParseError

SEED_LIMIT = 1 << 64


# --------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class FiniteSpec:
    bits: tuple[int, ...]
    pad: int = 0

    def __str__(self):
        return f"finite:{''.join(map(str, self.bits))}:pad={self.pad}"


@dataclass(frozen=True)
class PeriodicSpec:
    pattern: tuple[int, ...]

    def __str__(self):
        return f"periodic:{''.join(map(str, self.pattern))}"


@dataclass(frozen=True)
class BernoulliSpec:
    """Independent bits with a constant rate."""
    rate: Fraction
    seed: Optional[int] = None

    def __str__(self):
        return "bernoulli:" + _fmt_rat(self.rate) + _fmt_seed(self.seed)


@dataclass(frozen=True)
class HalvingSpec:
    """Independent bits, bit i is 1 with probability min(1, eps + 2**-i)."""
    eps: Fraction
    seed: Optional[int] = None

    def rate(self, i: int) -> Fraction:
        return min(Fraction(1), self.eps + Fraction(1, 1 << i))

    def __str__(self):
        return "bernoulli:eps-plus-halving:eps=" + _fmt_rat(self.eps) + _fmt_seed(self.seed)


@dataclass(frozen=True)
class BurstSpec:
    """Alternating all-ones bursts and all-zeros calm blocks.

    Each burst lifts the prefix density to a seeded level in ``(eps, peak]``;
    the calm block after it is the shortest one that brings the density back
    to at most ``eps``.  The prefix lengths at which calm blocks end are the
    certified dips of the stream.
    """
    eps: Fraction
    peak: Optional[Fraction] = None
    seed: Optional[int] = None

    @property
    def peak_level(self) -> Fraction:
        return self.peak if self.peak is not None else (1 + self.eps) / 2

    def __str__(self):
        s = "burst:eps=" + _fmt_rat(self.eps)
        if self.peak is not None:
            s += ":peak=" + _fmt_rat(self.peak)
        return s + _fmt_seed(self.seed)


@dataclass(frozen=True)
class NegSpec:
    inner: "StreamSpec"

    def __str__(self):
        return f"neg({self.inner})"


@dataclass(frozen=True)
class FileSpec:
    """ASCII 0/1 bits read from a file (whitespace ignored), padded with zeros."""
    path: str

    def __str__(self):
        return f"file:{self.path}"


StreamSpec = Union[FiniteSpec, PeriodicSpec, BernoulliSpec, HalvingSpec, BurstSpec, NegSpec, FileSpec]


def _fmt_rat(x: Fraction) -> str:
    return str(Fraction(x))


def _fmt_seed(seed: Optional[int]) -> str:
    return "" if seed is None else f":seed={seed}"


# --------------------------------------------------------------------------
# parsing


def _parse_rat(text: str, full: str, pos: int) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad rational {text!r}", full, pos) from None


def _parse_bits(text: str, full: str, pos: int) -> tuple[int, ...]:
    if not text:
        raise ParseError("expected a nonempty bit string", full, pos)
    for k, ch in enumerate(text):
        if ch not in "01":
            raise ParseError(f"bad bit {ch!r}", full, pos + k)
    return tuple(int(c) for c in text)


def _parse_options(fields: list[tuple[str, int]], allowed: set[str], full: str) -> dict[str, tuple[str, int]]:
    out: dict[str, tuple[str, int]] = {}
    for text, pos in fields:
        key, sep, value = text.partition("=")
        if not sep or key not in allowed:
            raise ParseError(f"unexpected field {text!r} (allowed: {sorted(allowed)})", full, pos)
        if key in out:
            raise ParseError(f"duplicate field {key!r}", full, pos)
        out[key] = (value, pos + len(key) + 1)
    return out


def _parse_seed(opts, full) -> Optional[int]:
    if "seed" not in opts:
        return None
    value, pos = opts["seed"]
    if not re.fullmatch(r"\d+", value) or int(value) >= SEED_LIMIT:
        raise ParseError(f"seed must be an integer in [0, 2**64), got {value!r}", full, pos)
    return int(value)


def _split(text: str, base: int) -> list[tuple[str, int]]:
    fields, pos = [], base
    for part in text.split(":"):
        fields.append((part, pos))
        pos += len(part) + 1
    return fields


def parse_stream_spec(text: str) -> StreamSpec:
    """Parse the stream mini-language.

    >>> str(parse_stream_spec("neg(periodic:10)"))
    'neg(periodic:10)'
    """
    return _parse(text, text, 0)


def _parse(text: str, full: str, base: int) -> StreamSpec:
    if text.startswith("neg("):
        if not text.endswith(")"):
            raise ParseError("unbalanced 'neg(' (missing ')')", full, base + len(text))
        return NegSpec(_parse(text[4:-1], full, base + 4))
    kind, sep, rest = text.partition(":")
    if not sep:
        raise ParseError(f"expected '<kind>:...', got {text!r}", full, base)
    rbase = base + len(kind) + 1
    if kind == "file":
        if not rest:
            raise ParseError("empty file path", full, rbase)
        return FileSpec(rest)
    fields = _split(rest, rbase)
    if kind == "finite":
        bits = _parse_bits(fields[0][0], full, fields[0][1])
        opts = _parse_options(fields[1:], {"pad"}, full)
        pad = 0
        if "pad" in opts:
            value, pos = opts["pad"]
            if value not in ("0", "1"):
                raise ParseError(f"pad must be 0 or 1, got {value!r}", full, pos)
            pad = int(value)
        return FiniteSpec(bits, pad)
    if kind == "periodic":
        if len(fields) != 1:
            raise ParseError("periodic takes only a pattern", full, fields[1][1])
        return PeriodicSpec(_parse_bits(fields[0][0], full, fields[0][1]))
    if kind == "bernoulli":
        head, hpos = fields[0]
        if head == "eps-plus-halving":
            opts = _parse_options(fields[1:], {"eps", "seed"}, full)
            if "eps" not in opts:
                raise ParseError("eps-plus-halving needs eps=<rational>", full, hpos)
            eps = _parse_rat(*opts["eps"], full)
            if not 0 <= eps <= 1:
                raise ParseError(f"eps must lie in [0, 1], got {eps}", full, opts["eps"][1])
            return HalvingSpec(eps, _parse_seed(opts, full))
        rate = _parse_rat(head, full, hpos)
        if not 0 <= rate <= 1:
            raise ParseError(f"rate must lie in [0, 1], got {rate}", full, hpos)
        opts = _parse_options(fields[1:], {"seed"}, full)
        return BernoulliSpec(rate, _parse_seed(opts, full))
    if kind == "burst":
        opts = _parse_options(fields, {"eps", "peak", "seed"}, full)
        if "eps" not in opts:
            raise ParseError("burst needs eps=<rational>", full, rbase)
        eps = _parse_rat(*opts["eps"], full)
        if not 0 < eps < 1:
            raise ParseError(f"eps must lie in (0, 1), got {eps}", full, opts["eps"][1])
        peak = None
        if "peak" in opts:
            peak = _parse_rat(*opts["peak"], full)
            if not eps < peak < 1:
                raise ParseError(f"peak must lie in (eps, 1), got {peak}", full, opts["peak"][1])
        return BurstSpec(eps, peak, _parse_seed(opts, full))
    raise ParseError(f"unknown stream kind {kind!r}", full, base)


def format_stream_spec(spec: StreamSpec) -> str:
    return str(spec)


# --------------------------------------------------------------------------
# streams


class BitStream:
    """Replayable, index-addressable infinite bit sequence."""

    def __init__(self, spec: StreamSpec, seed: Optional[int] = None):
        self.spec = spec
        self.seed = seed

    def bit_at(self, i: int) -> int:
        if i < 1:
            raise InvalidArgument(f"stream indices start at 1, got {i}")
        return int(self.segment(i - 1, 1)[0])

    def segment(self, offset: int, length: int) -> np.ndarray:
        """Bits ``offset+1 .. offset+length`` as a uint8 array."""
        if offset < 0 or length < 0:
            raise InvalidArgument(f"bad segment offset={offset} length={length}")
        return self._segment(offset, length)

    def prefix(self, t: int) -> np.ndarray:
        return self.segment(0, t)

    def _segment(self, offset: int, length: int) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"BitStream({self.spec})"


class _FiniteStream(BitStream):
    def __init__(self, spec, bits: Iterable[int], pad: int):
        super().__init__(spec)
        self._bits = np.asarray(list(bits), dtype=np.uint8)
        self._pad = pad

    def _segment(self, offset, length):
        out = np.full(length, self._pad, dtype=np.uint8)
        n = len(self._bits)
        if offset < n:
            take = min(n - offset, length)
            out[:take] = self._bits[offset:offset + take]
        return out


class _PeriodicStream(BitStream):
    def __init__(self, spec: PeriodicSpec):
        super().__init__(spec)
        self._pattern = np.asarray(spec.pattern, dtype=np.uint8)

    def _segment(self, offset, length):
        idx = (np.arange(length, dtype=np.int64) + offset) % len(self._pattern)
        return self._pattern[idx]


class _BernoulliStream(BitStream):
    def _segment(self, offset, length):
        spec, seed = self.spec, self.seed
        if isinstance(spec, BernoulliSpec):
            r = spec.rate
            if r == 0 or r == 1:
                return np.full(length, int(r), dtype=np.uint8)
            bits = [rng.bernoulli(r, seed, i) for i in range(offset + 1, offset + length + 1)]
        else:
            bits = [_halving_bit(spec.eps, seed, i) for i in range(offset + 1, offset + length + 1)]
        return np.asarray(bits, dtype=np.uint8)


def _halving_bit(eps: Fraction, seed: int, i: int) -> int:
    if i <= 192:
        return rng.bernoulli(min(Fraction(1), eps + Fraction(1, 1 << i)), seed, i)
    # Decide from the first 128 bits of U when they already separate U from
    # eps + 2**-i; the exact comparison is only needed with probability ~2**-126.
    a = (rng.word(seed, i, 0) << 64) | rng.word(seed, i, 1)
    lo, hi = Fraction(a, 1 << 128), Fraction(a + 1, 1 << 128)
    if hi <= eps:
        return 1
    if lo >= eps + Fraction(1, 1 << 128):
        return 0
    return rng.bernoulli(eps + Fraction(1, 1 << i), seed, i)


class _BurstStream(BitStream):
    def __init__(self, spec: BurstSpec, seed: int):
        super().__init__(spec, seed)
        self._lock = threading.Lock()
        # _starts[j] = 0-based offset where burst j begins; _calm[j] = offset where its calm block begins
        self._starts: list[int] = [0]
        self._calm: list[int] = []
        self._ones = 0

    def _extend_to(self, length: int) -> None:
        with self._lock:
            spec = self.spec
            eps, peak = spec.eps, spec.peak_level
            while self._starts[-1] <= length:
                j = len(self._calm)
                L, N = self._starts[-1], self._ones
                k = 1 + rng.uniform_below(8, self.seed, j)
                h = eps + (peak - eps) * k / 8
                burst = max(1, math.ceil((h * L - N) / (1 - h)))
                N += burst
                calm = max(1, math.ceil(N / eps) - L - burst)
                self._calm.append(L + burst)
                self._starts.append(L + burst + calm)
                self._ones = N

    def certificate(self, max_length: int) -> list[int]:
        """Certified dip lengths ``t <= max_length``; each has density <= eps."""
        self._extend_to(max_length)
        return [s for s in self._starts[1:] if s <= max_length]

    def runs(self, offset: int, length: int):
        """Yield (start, stop, bit) runs (0-based, half-open) covering the window."""
        end = offset + length
        self._extend_to(end)
        j = bisect.bisect_right(self._starts, offset) - 1
        pos = offset
        while pos < end:
            c, nxt = self._calm[j], self._starts[j + 1]
            if pos < c:
                stop = min(c, end)
                yield pos, stop, 1
                pos = stop
            stop = min(nxt, end)
            if pos < stop:
                yield pos, stop, 0
                pos = stop
            j += 1

    def _segment(self, offset, length):
        out = np.zeros(length, dtype=np.uint8)
        for a, b, bit in self.runs(offset, length):
            if bit:
                out[a - offset:b - offset] = 1
        return out


class _NegatedStream(BitStream):
    def __init__(self, spec, inner: BitStream):
        super().__init__(spec, inner.seed)
        self.inner = inner

    def _segment(self, offset, length):
        return 1 - self.inner._segment(offset, length)


def from_finite(bits, padding: int = 0) -> BitStream:
    bits = [int(b) for b in bits]
    if not bits:
        raise InvalidSpec("a finite stream needs at least one bit")
    if any(b not in (0, 1) for b in bits) or padding not in (0, 1):
        raise InvalidSpec("bits and padding must be 0 or 1")
    return _FiniteStream(FiniteSpec(tuple(bits), padding), bits, padding)


def read_bit_file(path) -> list[int]:
    data = Path(path).read_bytes()
    bits = []
    for pos, ch in enumerate(data):
        if ch in b"01":
            bits.append(ch - 48)
        elif not chr(ch).isspace():
            raise InvalidSpec(f"{path}: byte {pos} is {chr(ch)!r}, expected 0, 1 or whitespace")
    if not bits:
        raise InvalidSpec(f"{path}: no bits")
    return bits


def generate(spec: Union[StreamSpec, str], seed: int = 0) -> BitStream:
    """Build the stream for ``spec``.

    ``seed`` is used by stochastic kinds unless the spec pins its own seed.
    """
    if isinstance(spec, str):
        spec = parse_stream_spec(spec)
    if isinstance(spec, FiniteSpec):
        if not spec.bits:
            raise InvalidSpec("a finite stream needs at least one bit")
        return _FiniteStream(spec, spec.bits, spec.pad)
    if isinstance(spec, PeriodicSpec):
        if not spec.pattern:
            raise InvalidSpec("empty periodic pattern")
        return _PeriodicStream(spec)
    if isinstance(spec, (BernoulliSpec, HalvingSpec)):
        r = spec.rate if isinstance(spec, BernoulliSpec) else spec.eps
        if not 0 <= r <= 1:
            raise InvalidSpec(f"rate must lie in [0, 1], got {r}")
        return _BernoulliStream(spec, spec.seed if spec.seed is not None else seed)
    if isinstance(spec, BurstSpec):
        if not 0 < spec.eps < 1 or not spec.eps < spec.peak_level < 1:
            raise InvalidSpec(f"bad burst parameters eps={spec.eps} peak={spec.peak}")
        return _BurstStream(spec, spec.seed if spec.seed is not None else seed)
    if isinstance(spec, NegSpec):
        return _NegatedStream(spec, generate(spec.inner, seed))
    if isinstance(spec, FileSpec):
        return _FiniteStream(spec, read_bit_file(spec.path), 0)
    raise InvalidSpec(f"unknown stream spec {spec!r}")


def negate(stream: BitStream) -> BitStream:
    return _NegatedStream(NegSpec(stream.spec), stream)


# --------------------------------------------------------------------------
# densities


@dataclass(frozen=True)
class DensityReport:
    t: int
    ones: int
    density: Fraction
    running_inf: Fraction


def prefix_density(stream: BitStream, t: int, tail_from: Optional[int] = None) -> DensityReport:
    """Exact count ``N_t`` and density ``N_t / t``.

    ``running_inf`` is ``min(N_s / s)`` over ``tail_from <= s <= t``
    (just the density when ``tail_from`` is omitted).
    """
    if t < 1:
        raise InvalidArgument(f"t must be >= 1, got {t}")
    lo = t if tail_from is None else tail_from
    if not 1 <= lo <= t:
        raise InvalidArgument(f"tail_from must lie in [1, {t}], got {tail_from}")
    counts = np.cumsum(stream.prefix(t), dtype=np.int64)
    ones = int(counts[-1])
    if lo == t:
        inf = Fraction(ones, t)
    else:
        tail = counts[lo - 1:]
        s = np.arange(lo, t + 1, dtype=np.int64)
        # argmin of N_s/s via float, then exact comparison among near-ties
        ratio = tail / s
        best = float(ratio.min())
        cand = np.nonzero(ratio <= best * (1 + 1e-12) + 1e-300)[0]
        inf = min(Fraction(int(tail[k]), int(s[k])) for k in cand)
    return DensityReport(t, ones, Fraction(ones, t), inf)
