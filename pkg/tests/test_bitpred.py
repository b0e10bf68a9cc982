import itertools
import json
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frogpred import rng
from frogpred.bitpred import (
    Automaton,
    BitPrediction,
    automaton_from_json,
    automaton_predictor,
    automaton_to_json,
    evaluate,
    load_automaton,
    play_streaming,
    run_trace,
    strongly_accessible,
    subsequence,
    two_sided_predictor,
    wilson_interval,
)
from frogpred.errors import InvalidArgument, NotStronglyAccessible
from frogpred.streams import generate

COUNTER2 = Automaton.counter(2)


def brute_accessible(M, B):
    """Path enumeration: words of length < n_states suffice to reach anything reachable."""
    def reach(q):
        out = set()
        for n in range(M.n_states):
            for word in itertools.product((0, 1), repeat=n):
                r = q
                for b in word:
                    r = M.step(r, b)
                out.add(r)
        return out
    return all(reach(q) & B for q in reach(M.start))


def all_automata(n):
    rows = list(itertools.product(range(1, n + 1), repeat=2))
    for table in itertools.product(rows, repeat=n):
        yield Automaton(n, 1, table)


def test_counter_trace_example():
    tr = run_trace(COUNTER2, {2}, [1, 0, 1, 1, 0])
    assert tr.states == (1, 2, 1, 2, 2, 1)
    assert tr.visits[1] == (0, 2, 5)
    assert tr.bad_bits == (0, 1, 0, 1, 1, 0)


def test_trace_degenerate_cases():
    assert run_trace(COUNTER2, {2}, []).states == (1,)
    single = Automaton(1, 1, ((1, 1),))
    assert run_trace(single, {1}, [0, 1, 1]).visit_counts() == {1: 4}
    with pytest.raises(InvalidArgument):
        run_trace(COUNTER2, {3}, [1])


def test_subsequence_examples():
    x = [1, 0, 1, 1, 0]
    assert subsequence(COUNTER2, 1, x) == [1, 1]
    assert subsequence(COUNTER2, 2, x) == [0, 1, 0]
    never = Automaton(2, 1, ((1, 1), (2, 2)))
    assert subsequence(never, 2, x) == []
    assert subsequence(Automaton(1, 1, ((1, 1),)), 1, x) == x


@settings(max_examples=100)
@given(bits=st.lists(st.integers(0, 1), max_size=80), n=st.integers(1, 4), data=st.data())
def test_routing_conserves_bits(bits, n, data):
    table = tuple(tuple(data.draw(st.integers(1, n)) for _ in range(2)) for _ in range(n))
    M = Automaton(n, data.draw(st.integers(1, n)), table)
    tr = run_trace(M, set(), bits)
    subs = {q: iter(subsequence(M, q, bits)) for q in M.states}
    rebuilt = [next(subs[q]) for q in tr.states[:-1]]
    assert rebuilt == bits
    assert all(next(it, None) is None for it in subs.values())


def test_strong_accessibility_examples():
    assert strongly_accessible(Automaton.counter(3), {3})
    trap = Automaton(2, 1, ((1, 1), (2, 2)))
    res = strongly_accessible(trap, {2})
    assert not res and res.witness == 1
    assert strongly_accessible(Automaton(1, 1, ((1, 1),)), {1})
    with pytest.raises(InvalidArgument):
        strongly_accessible(COUNTER2, set())


@pytest.mark.parametrize("n", [1, 2, 3])
def test_strong_accessibility_brute_force_small(n):
    for M0 in all_automata(n):
        for s in M0.states:
            M = Automaton(n, s, M0.delta)
            for k in range(1, n + 1):
                for B in itertools.combinations(M.states, k):
                    res = strongly_accessible(M, set(B))
                    assert bool(res) == brute_accessible(M, set(B))
                    if not res:
                        # witness is reachable and cannot reach B
                        w = Automaton(n, res.witness, M.delta)
                        assert not brute_accessible(w, set(B))


@settings(max_examples=300, deadline=None)
@given(data=st.data())
def test_strong_accessibility_brute_force_four_states(data):
    n = 4
    table = tuple(tuple(data.draw(st.integers(1, n)) for _ in range(2)) for _ in range(n))
    M = Automaton(n, data.draw(st.integers(1, n)), table)
    B = set(data.draw(st.sets(st.integers(1, n), min_size=1)))
    assert bool(strongly_accessible(M, B)) == brute_accessible(M, B)


def test_automaton_json_round_trip(tmp_path):
    doc = automaton_to_json(Automaton.counter(3), {3})
    assert doc == {"states": 3, "start": 1, "delta": [[1, 2], [1, 3], [1, 3]], "bad": [3]}
    p = tmp_path / "m.json"
    p.write_text(json.dumps(doc))
    M, B = load_automaton(p)
    assert M == Automaton.counter(3) and B == {3}
    for bad in ({"states": 2}, {"states": 2, "start": 1, "delta": [[1, 3], [1, 1]]},
                {"states": 1, "start": 1, "delta": [[1, 1]], "bad": [2]}):
        with pytest.raises(InvalidArgument):
            automaton_from_json(bad)


def test_bit_prediction_scoring():
    assert BitPrediction(2, 1).score([0, 0, 1]) == "correct"
    assert BitPrediction(0, 1).score([0]) == "incorrect"
    assert BitPrediction(3, 0).score([0, 0, 1]) == "none"


SMALL = dict(K=6, R_max=6)


def test_two_sided_all_zero_and_all_one():
    strat = two_sided_predictor(Fraction(1, 5), **SMALL)
    for bit in (0, 1):
        bits = [bit] * strat.horizon
        preds = [play_streaming(strat, bits, seed) for seed in range(200)]
        fired = [p for p in preds if p is not None]
        assert fired
        assert all(p.z == bit and p.score(bits) == "correct" for p in fired)


def test_two_sided_rejects_bad_delta():
    with pytest.raises(InvalidArgument):
        two_sided_predictor(1)


def _streams():
    return [generate(t) for t in ("bernoulli:1/2:seed=3", "burst:eps=1/10:seed=4", "periodic:110",
                                  "bernoulli:1/20:seed=5", "neg(burst:eps=1/5:seed=6)")]


def test_two_sided_streaming_equals_replay():
    strat = two_sided_predictor(Fraction(1, 5), **SMALL)
    fired = 0
    for s in _streams():
        bits = s.prefix(strat.horizon + 3)
        prep = strat.prepare(bits)
        for seed in range(150):
            a = play_streaming(strat, bits, seed)
            b = prep.predict(seed)
            assert (a is None) == (b is None)
            if a is not None:
                fired += 1
                assert (a.t, a.z) == (b.t, b.z)
    assert fired > 50


def test_automaton_streaming_equals_replay():
    M = Automaton.counter(3)
    strat = automaton_predictor(M, {3}, Fraction(9, 10), K=3, R_max=8)
    fired = 0
    for s in _streams():
        bits = s.prefix(3000)
        prep = strat.prepare(bits)
        for seed in range(100):
            a = play_streaming(strat, bits, seed)
            b = prep.predict(seed)
            assert (a is None) == (b is None)
            if a is not None:
                fired += 1
                assert (a.t, a.z) == (b.t, b.z)
    assert fired > 100


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), tail=st.lists(st.integers(0, 1), min_size=200, max_size=200))
def test_predictions_are_causal(seed, tail):
    strat = automaton_predictor(COUNTER2, {2}, Fraction(1, 2), K=3, R_max=6)
    bits = generate("bernoulli:1/3:seed=8").prefix(400).tolist()
    pred = play_streaming(strat, bits, seed)
    if pred is None:
        return
    # rewrite everything after the prediction point
    other = bits[:pred.t] + tail
    again = play_streaming(strat, other, seed)
    assert (again.t, again.z) == (pred.t, pred.z)


def test_single_state_automaton_reduces_to_two_sided():
    single = Automaton(1, 1, ((1, 1),))
    eps = Fraction(2, 5)
    outer = automaton_predictor(single, {1}, eps, **SMALL)
    inner = two_sided_predictor(eps / 2, **SMALL)
    bits = generate("burst:eps=1/10:seed=2").prefix(outer.inner.horizon + 1)
    for seed in range(200):
        a = play_streaming(outer, bits, seed)
        b = play_streaming(inner, bits, rng.derive_seed(seed, 1))
        assert (a is None) == (b is None)
        if a is not None:
            assert (a.t, a.z) == (b.t, b.z)


def test_prediction_needs_a_revisit():
    # state 2 is entered once and never again: its copy can speak but never commit
    M = Automaton(2, 1, ((2, 2), (1, 1)))
    strat = automaton_predictor(M, {1, 2}, Fraction(1, 2), K=2, R_max=3)
    bits = np.array([0, 1] + [0] * 100, dtype=np.uint8)
    prep = strat.prepare(bits)
    assert all(prep.predict(seed) is None or prep.predict(seed).t != 1 for seed in range(50))


def test_inaccessible_refusal_and_warning():
    trap = Automaton(2, 1, ((1, 1), (2, 2)))
    with pytest.raises(NotStronglyAccessible) as err:
        automaton_predictor(trap, {2}, Fraction(1, 5))
    assert err.value.witness == 1
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        strat = automaton_predictor(trap, {2}, Fraction(1, 5), on_inaccessible="warn")
    assert caught and strat.inner.delta == Fraction(1, 20)


def test_evaluate_partition_and_determinism():
    strat = two_sided_predictor(Fraction(1, 5), **SMALL)
    s = generate("burst:eps=1/10:seed=1")
    a = evaluate(strat, s, strat.horizon, 300, seed=7)
    b = evaluate(strat, s, strat.horizon, 300, seed=7)
    assert a.correct + a.incorrect + a.none == 300
    assert a.outcomes == b.outcomes
    c = evaluate(strat, s, strat.horizon, 300, seed=7, streaming=True)
    assert c.outcomes == a.outcomes
    one = evaluate(strat, s, strat.horizon, 1, seed=7)
    assert one.correct + one.incorrect + one.none == 1
    with pytest.raises(InvalidArgument):
        evaluate(strat, s, 0, 1, seed=7)


def test_exact_none_probability_matches_monte_carlo():
    strat = two_sided_predictor(Fraction(1, 5), K=8, R_max=5)
    s = generate("burst:eps=1/10:seed=3")
    H = strat.horizon
    prep = strat.prepare(s.prefix(H))
    exact = float(prep.none_probability())
    stats = evaluate(strat, s, H, 4000, seed=1)
    # predictions at index <= H are scored; none covers everything else
    sigma = (exact * (1 - exact) / 4000) ** 0.5
    assert abs(stats.none / 4000 - exact) <= 4 * sigma + 1e-9
    bound = float(prep.incorrect_bound())
    assert stats.incorrect / 4000 <= bound + 4 * (bound / 4000) ** 0.5 + 1e-9


def test_wilson_interval_contains_estimate():
    lo, hi = wilson_interval(30, 100)
    assert lo < 0.3 < hi
    assert wilson_interval(0, 0) == (0.0, 1.0)
