import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fkburger import word
from fkburger.params import params_from_p
from fkburger.word import ReducedWord, Word, counts, reduce, reduce_concat, reduced_length

from oracles import all_normal_forms, naive_reduce

words = st.lists(st.integers(0, 4), max_size=40)


def labels(r):
    return r.to_dict()


def test_displayed_example():
    r = reduce(["b_h", "b_c", "o_h", "o_f", "b_h", "o_c"])
    assert labels(r) == {"orders": ["o_c"], "burgers": ["b_h"]}
    c = counts(r)
    assert (c.d, c.d_star) == (1, -1)


def test_small_examples():
    assert reduce([]).is_empty()
    assert labels(reduce(["o_f", "b_h"])) == {"orders": ["o_f"], "burgers": ["b_h"]}
    c = counts(["b_h", "b_h", "o_c"])
    assert (c.d, c.d_star, c.length) == (2, -1, 3)
    assert counts([]).n == (0, 0, 0, 0, 0)


def test_concat_examples():
    e = ReducedWord()
    assert reduce_concat(e, e).is_empty()
    assert reduce_concat(ReducedWord(burgers=["b_h"]), ReducedWord(orders=["o_h"])).is_empty()
    r = reduce_concat(ReducedWord(burgers=["b_c", "b_h"]), ReducedWord(orders=["o_f"]))
    assert r == ReducedWord(burgers=["b_c"])
    assert r == reduce(["b_c", "b_h", "o_f"])


def test_rewrite_system_confluent_up_to_5():
    for n in range(6):
        for w in itertools.product(range(5), repeat=n):
            forms = all_normal_forms(w)
            assert len(forms) == 1
            assert forms == {tuple(int(s) for s in reduce(w).symbols())}


@given(words)
def test_matches_naive_rewrite(w):
    assert tuple(int(s) for s in reduce(w).symbols()) == naive_reduce(w)


@given(words, words)
def test_homomorphism(x, y):
    assert reduce(x + y) == reduce_concat(reduce(x), reduce(y))


@given(words, words, words)
def test_associative(x, y, z):
    rx, ry, rz = reduce(x), reduce(y), reduce(z)
    assert reduce_concat(reduce_concat(rx, ry), rz) == reduce_concat(rx, reduce_concat(ry, rz))


@given(words)
def test_parity_shape_and_length(w):
    r = reduce(w)
    assert len(r) % 2 == len(w) % 2 and len(r) <= len(w)
    assert reduced_length(w) == len(r)
    syms = r.symbols()
    k = len(r.orders)
    assert all(s.is_order for s in syms[:k]) and all(s.is_burger for s in syms[k:])


def test_reverse_length_inequality():
    rs = np.random.default_rng(2)
    for _ in range(300):
        n = int(rs.integers(1, 40))
        x = [int(s) for s in rs.integers(0, 5, n)]
        whole = reduced_length(x)
        for j in range(1, n + 1):
            assert reduced_length(x[j - 1:]) <= whole + reduced_length(x[:j - 1])


@given(words)
def test_counts_consistent(w):
    c = counts(w)
    assert c.length == len(w)
    assert c.d == c.n[0] - c.n[2] and c.d_star == c.n[1] - c.n[3]


def test_sampling_frequencies():
    w = word.sample_word(params_from_p(0.4), 1, 10 ** 6, seed=11)
    f = np.bincount(w.symbols, minlength=5) / 10 ** 6
    assert abs(f[4] - 0.2) <= 0.002
    w = word.sample_word(params_from_p(1 / 3), 1, 10 ** 6, seed=12)
    assert abs(np.mean(w.symbols == 0) - 0.25) <= 0.002


def test_sampling_deterministic_and_window_consistent():
    m = params_from_p(0.3)
    a = word.sample_word(m, -50, 50, 7, stream=3)
    assert a == word.sample_word(m, -50, 50, 7, stream=3)
    b = word.sample_word(m, 0, 10, 7, stream=3)
    assert np.array_equal(a.segment(0, 10).symbols, b.symbols)
    assert a != word.sample_word(m, -50, 50, 7, stream=4)
    with pytest.raises(ValueError):
        word.sample_word(m, 5, 4, 7)


def test_io_empty_header():
    data = word.serialize(Word(0, np.zeros(0, dtype=np.uint8)))
    assert len(data) == 20 and data[:4] == b"FKW1"
    assert word.deserialize(data) == Word(0, [])


def test_io_round_trip(tmp_path):
    rs = np.random.default_rng(0)
    for k in range(1000):
        w = Word(int(rs.integers(-10 ** 9, 10 ** 9)), rs.integers(0, 5, int(rs.integers(0, 50))))
        assert word.deserialize(word.serialize(w)) == w
    word.write_word(tmp_path / "w.fkw", w)
    assert word.read_word(tmp_path / "w.fkw") == w


def test_io_errors():
    good = word.serialize(Word(1, [0, 2]))
    with pytest.raises(word.WordFormatError):
        word.deserialize(good[:-1] + b"\x05")
    with pytest.raises(word.WordFormatError):
        word.deserialize(b"FKW2" + good[4:])
    with pytest.raises(word.WordFormatError):
        word.deserialize(good[:-1])
    with pytest.raises(word.WordFormatError):
        word.deserialize(good[:10])


def test_word_indexing():
    w = Word.of(["b_h", "o_f"], start=-1)
    assert w.end == 0 and w[0] == word.O_F and -2 not in w
    with pytest.raises(IndexError):
        w[1]
    with pytest.raises(ValueError):
        Word(0, [7])
