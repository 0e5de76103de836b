import itertools
import random

import pytest
from hypothesis import given, strategies as st

from gbs.core import GbsError, spanning_tree
from gbs.hgraph import extract, path_of
from gbs.words import (TypedWord, concat_typed, format_word, inverse, is_reduced_typed,
                       parse_typed, parse_word, simplify, subwords, to_group_word)
from gen import LOOP23, SEG23, THETA, action_preaction, some_bs_action

letters = st.one_of(
    st.tuples(st.just("a"), st.just(0), st.integers(-4, 4)),
    st.tuples(st.just("t"), st.sampled_from([0, 1])),
)


def test_is_reduced_typed_examples():
    g = LOOP23
    assert is_reduced_typed(TypedWord(0, (), (3,)), g)
    assert not is_reduced_typed(TypedWord(0, (0, 1), (0, 3, 0)), g)
    assert is_reduced_typed(TypedWord(0, (0, 1), (0, 2, 0)), g)
    assert is_reduced_typed(TypedWord(0, (0, 0), (1, 3, 1)), g)


def test_concat_examples():
    g = THETA
    w = TypedWord(0, (0,), (1, 1))
    assert concat_typed(w, TypedWord(1, (), (0,)), g) == w
    w2 = TypedWord(1, (3,), (2, 0))
    assert concat_typed(w, w2, g) == TypedWord(0, (0, 3), (1, 3, 0))
    with pytest.raises(GbsError):
        concat_typed(w, w, g)


def test_concat_associative():
    g = LOOP23
    rng = random.Random(0)
    for _ in range(50):
        ws = []
        for _ in range(3):
            path = tuple(rng.choice([0, 1]) for _ in range(rng.randint(0, 3)))
            ws.append(TypedWord(0, path, tuple(rng.randint(-3, 3) for _ in range(len(path) + 1))))
        a, b, c = ws
        assert concat_typed(concat_typed(a, b, g), c, g) == concat_typed(a, concat_typed(b, c, g), g)


def test_to_group_word_examples():
    tree = spanning_tree(SEG23)
    assert to_group_word(TypedWord(0, (0,), (1, 2)), SEG23, tree) == (("a", 0, 1), ("a", 1, 2))
    assert to_group_word(TypedWord(0, (), (5,)), LOOP23, frozenset()) == (("a", 0, 5),)
    assert to_group_word(TypedWord(0, (0,), (1, 0)), LOOP23, frozenset()) == (("a", 0, 1), ("t", 0))


def test_subwords_examples():
    assert subwords(TypedWord(0, (0,), (1, 1))) == []
    w = TypedWord(0, (0, 0, 1), (1, 1, 1, 1))
    subs = subwords(w)
    assert len(subs) == 2
    for s in subs:
        s.check(LOOP23)
        assert w.path[:len(s.path)] == s.path


def test_to_group_word_injective_on_small_words():
    # reduced typed words with nonzero interior powers along non-tree edges
    g = LOOP23
    seen = {}
    for r in range(0, 3):
        for path in itertools.product([0, 1], repeat=r):
            for powers in itertools.product([-2, -1, 1, 2], repeat=r + 1):
                w = TypedWord(0, path, powers)
                if not is_reduced_typed(w, g):
                    continue
                gw = to_group_word(w, g, frozenset())
                assert seen.setdefault(gw, w) == w


@given(st.lists(letters, max_size=12))
def test_simplify_and_inverse(word):
    w = tuple(word)
    s = simplify(w)
    assert simplify(s) == s
    assert simplify(w + inverse(w)) == ()
    assert inverse(inverse(w)) == w


@given(st.lists(letters, max_size=10))
def test_word_text_roundtrip(word):
    w = simplify(tuple(word))
    text = format_word(w, LOOP23)
    back = () if text == "1" else parse_word(text, LOOP23)
    assert simplify(back) == w


def test_parse_typed():
    w = parse_typed("(e0, e0~ | 1, 2, 0)", LOOP23)
    assert w == TypedWord(0, (0, 1), (1, 2, 0))
    assert parse_typed("(|3)", LOOP23, vertex=0) == TypedWord(0, (), (3,))
    for bad in ["(e9|1,1)", "e0|1,1", "(|3)"]:
        with pytest.raises(ValueError):
            parse_typed(bad, LOOP23)
    with pytest.raises(ValueError):
        parse_word("b[v]", LOOP23)


@pytest.mark.parametrize("seed", range(10))
def test_evaluated_path_follows_edge_types(seed):
    rng = random.Random(seed)
    a, t = some_bs_action(rng, 2, 3, 4, 16)
    p, names = action_preaction(LOOP23, a, t)
    ext = extract(p)
    for _ in range(20):
        r = rng.randint(1, 5)
        path = tuple(rng.choice([0, 1]) for _ in range(r))
        w = TypedWord(0, path, tuple(rng.choice([-1, 1, 2]) for _ in range(r + 1)))
        if not is_reduced_typed(w, LOOP23):
            continue
        x = rng.choice(names)
        steps = path_of(p, ext, x, w)
        assert steps is not None and len(steps) == r
        for f, (eid, rev) in zip(path, steps):
            e, _, _ = ext.h.edges[eid]
            assert e == f & ~1 and rev == f % 2
        assert p.evaluate(x, to_group_word(w, LOOP23, p.tree)) is not None
