from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frogpred.bitpred import PreparedFrog
from frogpred.errors import CapacityError, InvalidArgument
from frogpred.frog_composed import (
    CompositionParams,
    composed_exact,
    default_K,
    sample_composed,
    schedule,
)
from frogpred.frog_core import RationalThreshold, chip_stack_distribution, sample_finite
from frogpred.streams import from_finite, generate


def test_default_K_values():
    # ceil(64 * (3/10 * 10/7) / (1/10)) with eps2 = 1/10 + 2/30 = 1/6
    assert default_K(Fraction(1, 10), Fraction(1, 10)) == 128
    assert default_K("1/10", "1/10") == default_K(Fraction(1, 10), Fraction(1, 10))
    assert default_K(Fraction(1, 1000), Fraction(9, 10) - Fraction(1, 500), C=1) == 2
    with pytest.raises(InvalidArgument):
        default_K(Fraction(1, 2), Fraction(1, 2))


def test_params_derived_quantities():
    params = CompositionParams(Fraction(1, 10), Fraction(1, 10), 128)
    assert params.eps2 == Fraction(1, 6)
    assert params.eps1 == Fraction(1, 10) + Fraction(1, 30)
    assert params.threshold.delta == Fraction(1, 6)
    assert CompositionParams.with_default_K("1/10", "1/10").K == 128
    with pytest.raises(InvalidArgument):
        CompositionParams(Fraction(1, 10), Fraction(1, 10), 1)


def test_schedule_examples():
    assert schedule(5, 1) == (1, 5)
    assert schedule(5, 2) == (6, 25)
    assert [schedule(1, r)[1] - schedule(1, r)[0] + 1 for r in range(1, 5)] == [1, 4, 9, 16]


@settings(max_examples=60)
@given(K=st.integers(1, 500), r=st.integers(1, 60))
def test_schedule_abuts(K, r):
    a, b = schedule(K, r)
    c, _ = schedule(K, r + 1)
    assert b - a + 1 == r * r * K
    assert c == b + 1


def test_all_ones_never_moves():
    params = CompositionParams(Fraction(1, 10), Fraction(1, 10), 16)
    rep = composed_exact(generate("bernoulli:1:seed=0"), params, 5)
    assert (rep.success_total, rep.death_total, rep.residual) == (0, 0, 1)
    s = generate("bernoulli:1:seed=0")
    assert all(sample_composed(s, params, seed, 5).result == "waited" for seed in range(100))


def test_all_zero_matches_hand_composition():
    params = CompositionParams(Fraction(1, 4), Fraction(1, 4), 4)
    th = params.threshold
    assert th.delta == Fraction(5, 12)
    rep = composed_exact(from_finite([0], 0), params, 3)
    # on zeros, H_t = p t, so pi(inf) = 1 - p L (L-1) / (2 d L^2) for an L-bit window
    walls = [1 - Fraction(5 * L * (L - 1), 2 * 12 * L * L) for L in (4, 16, 36)]
    assert walls == [Fraction(27, 32), Fraction(103, 128), Fraction(689, 864)]
    # cross-check against chip_stack_distribution per interval
    for r, w in zip((1, 2, 3), walls):
        L = r * r * 4
        assert chip_stack_distribution([0] * (L - 1), th, L).p_infty == w
    assert rep.death_total == 0
    assert rep.residual == walls[0] * walls[1] * walls[2]
    assert rep.success_total == 1 - rep.residual
    assert [rec.reach for rec in rep.intervals] == [1, walls[0], walls[0] * walls[1]]


stream_texts = st.sampled_from([
    "bernoulli:1/2:seed=1", "bernoulli:1/10:seed=2", "burst:eps=1/10:seed=3", "periodic:10",
    "periodic:1110", "neg(burst:eps=1/5:seed=4)", "bernoulli:eps-plus-halving:eps=1/10:seed=5",
])


@settings(max_examples=30, deadline=None)
@given(text=stream_texts, K=st.integers(2, 40), R=st.integers(1, 6))
def test_partition_and_reach_monotone(text, K, R):
    params = CompositionParams(Fraction(1, 10), Fraction(1, 10), K)
    rep = composed_exact(generate(text), params, R)
    rep.check_consistency()
    assert rep.success_total + rep.death_total + rep.residual == 1
    reaches = [rec.reach for rec in rep.intervals] + [rep.residual]
    assert reaches[0] == 1
    assert all(a >= b for a, b in zip(reaches, reaches[1:]))
    assert rep.death_total <= params.eps + params.gamma


def test_until_residual_stops_early():
    params = CompositionParams(Fraction(1, 4), Fraction(1, 4), 4)
    rep = composed_exact(from_finite([0], 0), params, 50, until_residual=Fraction(1, 100))
    assert rep.residual < Fraction(1, 100)
    assert rep.R_max == len(rep.intervals) < 50


def test_capacity_guard():
    params = CompositionParams(Fraction(1, 10), Fraction(1, 10), 128)
    with pytest.raises(CapacityError):
        composed_exact(from_finite([0], 0), params, 10**6)
    with pytest.raises(InvalidArgument):
        composed_exact(from_finite([0], 0), params, 0)


def test_first_interval_agrees_with_finite_sampler():
    params = CompositionParams(Fraction(1, 10), Fraction(1, 10), 12)
    s = generate("bernoulli:1/5:seed=9")
    for seed in range(400):
        a = sample_finite(s, 0, params.threshold, 12, seed)
        b = sample_composed(s, params, seed, 1)
        assert a.result == b.result
        if a.crossed:
            assert a.t == b.t


def test_prepared_frog_agrees_with_sample_composed():
    params = CompositionParams(Fraction(1, 10), Fraction(1, 10), 8)
    s = generate("burst:eps=1/10:seed=1")
    R = 5
    bits = s.prefix(schedule(8, R)[1])
    frog = PreparedFrog(bits, params, R)
    for seed in range(400):
        out = sample_composed(s, params, seed, R)
        fired = frog.play(seed)
        assert (fired is None) == (not out.crossed)
        if fired is not None:
            assert fired == out.t


def test_sample_frequencies_match_exact():
    params = CompositionParams(Fraction(1, 10), Fraction(1, 10), 10)
    s = generate("bernoulli:1/4:seed=6")
    rep = composed_exact(s, params, 4)
    n = 20_000
    outs = [sample_composed(s, params, seed, 4).result for seed in range(n)]
    for name, p in (("crossed_safely", rep.success_total), ("squashed", rep.death_total),
                    ("waited", rep.residual)):
        p = float(p)
        assert abs(outs.count(name) / n - p) <= 4 * (p * (1 - p) / n) ** 0.5 + 1e-12


def test_sample_is_deterministic_and_absolute():
    params = CompositionParams(Fraction(1, 10), Fraction(1, 10), 6)
    s = from_finite([0], 0)
    seen = set()
    for seed in range(300):
        a = sample_composed(s, params, seed, 4)
        assert a == sample_composed(s, params, seed, 4)
        if a.crossed:
            seen.add(a.t)
    # crossings happen beyond the first interval too
    assert max(seen) > 6


def test_bitwise_composition_via_thresholds():
    # a threshold other than eps2 is never used: compare against the rational directly
    params = CompositionParams(Fraction(1, 5), Fraction(3, 10), 5)
    assert params.threshold == RationalThreshold.from_fraction(Fraction(2, 5))
