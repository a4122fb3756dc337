import numpy as np
import pytest
from hypothesis import given, strategies as st

from fkburger import matching
from fkburger.matching import (OUTSIDE, Censored, Direction, ancestor_free, compute_matches,
                               flex_records, forward_match, hitting_time, phi_star, resolve_Y)
from fkburger.params import params_from_p
from fkburger.word import Word, reduce, reduced_length

from oracles import naive_matches, naive_phi_star

words = st.lists(st.integers(0, 4), max_size=60)


def W(*labels, start=1):
    return Word.of(labels, start=start)


def test_examples():
    mt = compute_matches(W("b_h", "o_h"))
    assert mt.phi(1) == 2 and mt.phi(2) == 1
    w = W("b_h", "b_c", "o_h", "o_f", "b_h", "o_c")
    mt = compute_matches(w)
    assert [mt.phi(i) for i in range(1, 5)] == [3, 4, 1, 2]
    assert mt.phi(5) is OUTSIDE and mt.phi(6) is OUTSIDE
    mt = compute_matches(W("b_h", "b_h", "b_h"))
    assert all(mt.phi(i) is OUTSIDE for i in (1, 2, 3))


@given(words, st.integers(-20, 20))
def test_matches_tagged_rewrite(w, start):
    mt = compute_matches(Word(start, w))
    ref = naive_matches(w)
    for k, j in enumerate(ref):
        got = mt.phi(k + start)
        assert got is OUTSIDE if j is None else got == j + start


@given(words)
def test_involution_and_nesting(w):
    mt = compute_matches(Word(1, w))
    pairs = []
    for i in range(1, len(w) + 1):
        j = mt.phi(i)
        if j is OUTSIDE:
            continue
        assert mt.phi(j) == i
        if w[i - 1] >= 2:
            assert j < i and w[j - 1] < 2
            pairs.append((j, i))
    for a, b in pairs:
        for c, d in pairs:
            same_kind = w[a - 1] == w[c - 1]
            both_flex = w[b - 1] == 4 and w[d - 1] == 4
            if (a, b) != (c, d) and (same_kind or both_flex):
                assert b < c or d < a or (a < c and d < b) or (c < a and b < d)


def test_different_kinds_can_cross():
    mt = compute_matches(W("b_c", "b_h", "o_c", "o_h"))
    assert (mt.phi(3), mt.phi(4)) == (1, 2)


def test_phi_star_examples():
    w = W("b_h", "b_c", "o_h", "o_f")
    mt = compute_matches(w)
    assert mt.phi(4) == 2 and phi_star(w, mt, 4) == 1
    w = W("b_c", "o_f")
    assert phi_star(w, compute_matches(w), 2) == 1
    w = W("b_c", "b_h", "o_h", "o_f")
    assert phi_star(w, compute_matches(w), 4) == 1
    with pytest.raises(ValueError):
        phi_star(w, compute_matches(w), 1)


@given(words)
def test_phi_star_definition(w):
    ref = naive_matches(w)
    word_ = Word(0, w)
    mt = compute_matches(word_)
    for i, s in enumerate(w):
        if s >= 2 and ref[i] is not None:
            want = naive_phi_star(w, ref, i)
            got = phi_star(word_, mt, i)
            assert got is OUTSIDE if want is None else got == want
            if got is not OUTSIDE:
                assert ref[i] >= got or got == ref[i] or got < ref[i]


def test_resolve_Y():
    assert resolve_Y(W("b_h", "o_f"), compute_matches(W("b_h", "o_f"))) == W("b_h", "o_h")
    assert resolve_Y(W("b_c", "o_f"), compute_matches(W("b_c", "o_f"))) == W("b_c", "o_c")
    w = W("o_f", "b_h")
    with pytest.raises(matching.UnresolvedFlexible) as e:
        resolve_Y(w, compute_matches(w))
    assert "1" in str(e.value)


def test_flex_record_examples():
    w = W("b_c", "o_h", "o_h", "o_f")
    (r,) = flex_records(w, compute_matches(w))
    assert (r.i, r.phi, r.dir, r.reduced_len) == (4, 1, Direction.LEFT, 2)
    assert reduced_length(w.symbols) == 2
    w = W("b_h", "o_f")
    (r,) = flex_records(w, compute_matches(w))
    assert (r.i, r.phi, r.dir, r.phi_star, r.degenerate) == (2, 1, Direction.RIGHT, 1, True)
    assert flex_records(W("b_h", "o_h"), compute_matches(W("b_h", "o_h"))) == []


@given(words)
def test_flex_records_invariants(w):
    word_ = Word(1, w)
    mt = compute_matches(word_)
    for r in flex_records(word_, mt):
        assert (r.dir is Direction.LEFT) == (w[r.phi - 1] == 1)
        assert r.phi_star is OUTSIDE or r.phi_star <= r.phi or r.phi <= r.phi_star <= r.i
        red = reduce(w[r.phi - 1:r.i])
        assert r.reduced_len == len(red)
        if r.i - r.phi >= 2:
            # only orders of the kind opposite to the consumed burger survive
            assert not red.burgers
            want = "o_h" if r.dir is Direction.LEFT else "o_c"
            assert all(s.label == want for s in red.orders)


def test_forward_match_examples():
    assert forward_match(W("o_c", "b_h", "b_c", "o_c", "o_c"), 1) == 5
    # X(1,2) reduces to the empty word, so no order has appeared yet
    assert forward_match(W("b_h", "o_h"), 0) is OUTSIDE
    assert forward_match(W("b_h", "o_h", "o_c"), 0) == 3
    assert forward_match(W("b_h", "b_c"), 0) is OUTSIDE
    with pytest.raises(ValueError):
        forward_match(W("o_h", "b_h"), 0)


@given(words)
def test_forward_match_definition(w):
    word_ = Word(1, w)
    for i in range(0, len(w)):
        if w[i] >= 2:
            continue
        got = forward_match(word_, i)
        want = next((j for j in range(i + 1, len(w) + 1) if reduce(w[i:j]).orders), None)
        assert got is OUTSIDE if want is None else got == want


def test_ancestor_free_examples():
    assert ancestor_free(W("o_h")) == [1]
    # X(1,2) reduces to the empty word, so 2 is not ancestor-free
    assert ancestor_free(W("b_h", "o_h")) == []
    assert ancestor_free(W("b_h", "o_h", "o_c")) == [3]
    assert ancestor_free(W("b_h", "b_c")) == []


def _af_definition(w):
    return [i for i in range(1, len(w) + 1)
            if all(reduce(w[k - 1:i]).orders for k in range(1, i + 1))]


@given(st.lists(st.integers(0, 4), max_size=30))
def test_ancestor_free_definition(w):
    assert ancestor_free(Word(1, w)) == _af_definition(w)


def _af_iterative(w):
    """I_1 is the first i with X(1,i) containing an order; I_m restarts after I_{m-1}."""
    out, start = [], 1
    while True:
        nxt = next((i for i in range(start, len(w) + 1) if reduce(w[start - 1:i]).orders), None)
        if nxt is None:
            return out
        out.append(nxt)
        start = nxt + 1


def test_ancestor_free_iterative_long_words():
    rs = np.random.default_rng(4)
    for _ in range(1000):
        w = [int(x) for x in rs.integers(0, 5, 1000)]
        assert ancestor_free(Word(1, w)) == _af_iterative(w)


def test_hitting_time_examples():
    assert hitting_time(iter(["b_h"]), "J", 10) == 1
    assert hitting_time(iter(["o_h", "b_c"]), "J", 10) == 2
    assert hitting_time(iter(["o_h"]), "I", 10) == 1
    assert isinstance(hitting_time(iter(["o_h"] * 20), "J", 5), Censored)
    with pytest.raises(ValueError):
        hitting_time(iter([]), "Q", 5)


def _backward_definition(stat, xs):
    """xs = (X_{-1}, X_{-2}, ...); direct reductions of X(-j,-1)."""
    for j in range(1, len(xs) + 1):
        r = reduce(list(reversed(xs[:j])))
        if stat == "J" and r.burgers:
            return j
        if stat == "Jtilde" and not any(s.label == "o_f" for s in r.orders):
            return j
        if stat == "P" and not r.orders:
            return j
    return None


def _forward_definition(stat, xs):
    for i in range(1, len(xs) + 1):
        r = reduce(xs[:i])
        if stat == "I" and r.orders:
            return i
        if stat == "KF" and any(s.label == "o_f" for s in r.orders):
            return i
    return None


@given(st.lists(st.integers(0, 4), min_size=1, max_size=40),
       st.sampled_from(["J", "Jtilde", "I", "KF", "P"]))
def test_hitting_time_definition(xs, stat):
    got = hitting_time(iter(xs), stat, len(xs))
    ref = (_backward_definition if matching.BACKWARD[stat] else _forward_definition)(stat, xs)
    assert isinstance(got, Censored) if ref is None else got == ref


@pytest.mark.parametrize("stat", ["J", "Jtilde", "I", "KF", "P"])
def test_batch_hitting_times_match_streams(stat):
    m = params_from_p(1 / 3)
    got = matching.hitting_times(m, stat, 500, seed=3, r0=10, count=40)
    for t in range(40):
        s = matching.replica_stream(m, 3, 10 + t, matching.BACKWARD[stat])
        ref = hitting_time(s, stat, 500)
        assert got[t] == (501 if isinstance(ref, Censored) else ref) or (
            isinstance(ref, Censored) and got[t] > 500)


def test_flex_scan_matches_window():
    m = params_from_p(1 / 3)
    from fkburger.word import sample_word
    n = 300
    nf, last, matched = matching.flex_scan(m, n, 5, 0, 30)
    for t in range(30):
        w = sample_word(m, -5000, n, 5, stream=t)
        mt = compute_matches(w)
        fs = [i for i in range(1, n + 1) if w[i].label == "o_f"]
        early = [i for i in fs if mt.phi(i) is OUTSIDE or mt.phi(i) <= 0]
        assert nf[t] == len(early) == len(reduce(w.segment(1, n).symbols).orders) - sum(
            1 for s in reduce(w.segment(1, n).symbols).orders if s.label != "o_f")
        assert last[t] == (max(early) if early else 0)
        assert matched[t] == len(fs) - len(early)


def test_infinitely_many_flexible_orders():
    m = params_from_p(1 / 3)
    nf, last, matched = matching.flex_scan(m, 10 ** 5, 21, 0, 1000)
    assert np.mean(matched >= 10) >= 0.99


def test_jtilde_renewals_are_last_jtilde_time():
    m = params_from_p(1 / 3)
    n = 200
    last = matching.jtilde_last_renewal(m, n, 8, 0, 20)
    for t in range(20):
        s = matching.replica_stream(m, 8, t, True)
        xs = [next(s) for _ in range(n)]
        ren = [j for j in range(1, n + 1)
               if not any(o.label == "o_f" for o in reduce(list(reversed(xs[:j]))).orders)]
        assert last[t] == (ren[-1] if ren else 0)
