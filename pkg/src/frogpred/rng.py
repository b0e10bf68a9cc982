"""Counter-mode randomness.

Every random quantity in the package is addressed by a tuple of integer labels
``(seed, *labels)`` and derived by hashing, never from sequential generator
state.  Two consequences matter: a draw can be recomputed from its address
alone (so streams are random-access and strategies can be replayed out of
order), and independent consumers never interfere with each other.
"""

from __future__ import annotations

import hashlib
import struct
from fractions import Fraction

MASK64 = (1 << 64) - 1


_STRUCTS: dict[int, struct.Struct] = {}


def _pack(labels: tuple[int, ...]) -> bytes:
    # the length prefix separates (1, 2) from (1, 2, 0)
    n = len(labels)
    st = _STRUCTS.get(n)
    if st is None:
        st = _STRUCTS[n] = struct.Struct(f"<I{n}Q")
    try:
        return st.pack(n, *labels)
    except struct.error:
        # negative or oversized labels are folded into 64 bits
        return st.pack(n, *[x & MASK64 for x in labels])


# keyed prototypes; copying one is cheaper than constructing a personalised hasher
_WORD = hashlib.blake2b(digest_size=8, person=b"frogpred-word")
_SEED = hashlib.blake2b(digest_size=8, person=b"frogpred-seed")


def word(seed: int, *labels: int) -> int:
    """Uniform 64-bit word at address ``(seed, *labels)``."""
    h = _WORD.copy()
    h.update(_pack((seed, *labels)))
    return int.from_bytes(h.digest(), "little")


def derive_seed(seed: int, *labels: int) -> int:
    """Child seed for a sub-consumer (trial index, copy index, ...)."""
    h = _SEED.copy()
    h.update(_pack((seed, *labels)))
    return int.from_bytes(h.digest(), "little")


def uniform_below(n: int, seed: int, *labels: int) -> int:
    """Exactly uniform integer in ``[0, n)``.

    Rejection sampling over successive words ``(seed, *labels, k)``; for
    ``n > 2**64`` several words are concatenated per attempt.
    """
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    if n == 1:
        return 0
    nbits = (n - 1).bit_length()
    nwords = (nbits + 63) // 64
    if nwords == 1:
        shift = 64 - nbits
        k = 0
        while True:
            u = word(seed, *labels, k) >> shift
            if u < n:
                return u
            k += 1
    k = 0
    while True:
        u = 0
        for _ in range(nwords):
            u = (u << 64) | word(seed, *labels, k)
            k += 1
        u >>= nwords * 64 - nbits
        if u < n:
            return u


def bernoulli(rate: Fraction, seed: int, *labels: int) -> int:
    """Return 1 with probability exactly ``rate``.

    Compares a lazily generated uniform real ``U = 0.w0 w1 w2 ...`` (64-bit
    digits) against the base-2**64 expansion of ``rate``; the first differing
    digit decides ``U < rate``.  Terminates after one word except with
    probability 2**-64 per extra word.
    """
    if rate <= 0:
        return 0
    if rate >= 1:
        return 1
    num, den = rate.numerator, rate.denominator
    k = 0
    while True:
        num <<= 64
        digit, num = divmod(num, den)
        u = word(seed, *labels, k)
        if u != digit:
            return int(u < digit)
        if num == 0:
            # rate is exhausted; U >= rate from here on
            return 0
        k += 1
