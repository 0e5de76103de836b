import random

import pytest

from gbs.core import GbsGraph, loop_graph, spanning_tree
from gbs.hgraph import complete_to_depth, gadget, realize_finite
from gbs.merge import (EscapeError, MergeError, MergeRequest, check_backtrack, check_merge,
                       common_escape, escape_word, merge)
from gbs.words import format_word, is_reduced_typed, to_group_word
from gen import (LOOP23, SEG23, THETA, TWO_LOOPS, UNIT_LOOPS, independent_merge_check,
                 matched_sizes, single_orbit)

EXTRA = {
    "loop-seg": GbsGraph.from_list(2, [(0, 0, 2, 3), (0, 1, 2, 2)]),
    "unit-loop-seg": GbsGraph.from_list(2, [(0, 0, 1, 2), (0, 1, 2, 3)]),
    "triangle": GbsGraph.from_list(3, [(0, 1, 2, 3), (1, 2, 2, 2), (2, 0, 3, 2)]),
    "path3": GbsGraph.from_list(3, [(0, 1, 2, 3), (1, 2, 2, 2)]),
}
GRAPHS = {"loop23": LOOP23, "seg23": SEG23, "theta": THETA, "two-loops": TWO_LOOPS,
          "unit-loops": UNIT_LOOPS, **EXTRA}


def run(g, pairs, e0, m=(), m2=()):
    s = g.src(e0)
    req = MergeRequest([single_orbit(g, s, a) for a, _ in pairs],
                       [single_orbit(g, s, b) for _, b in pairs],
                       [(0, 0)] * len(pairs), [(0, 0)] * len(pairs), e0, m, m2)
    return req, merge(req)


def test_loop_sizes_12_and_18():
    req, res = run(LOOP23, [(12, 18)], 0)
    assert independent_merge_check(req, res) == []
    assert check_merge(req, res) == []
    assert res.trace[0].startswith("base loop")


def test_segment_word_shape():
    req, res = run(SEG23, [(6, 6)], 0)
    # b a b a^-1 b^-1 with a, b the two vertex generators
    assert format_word(res.word, SEG23) == "a[1] a[0] a[1] a[0]^-1 a[1]^-1"
    assert independent_merge_check(req, res) == []


def test_two_pairs_on_two_edge_graph():
    req, res = run(THETA, [(4, 8), (6, 2)], 0)
    assert independent_merge_check(req, res) == []


def test_prefix_words():
    g = LOOP23
    req, res = run(g, [(5, 5)], 0, m=(("a", 0, 2),), m2=(("a", 0, 1),))
    assert independent_merge_check(req, res) == []
    assert res.word[0] == ("a", 0, 2)


def test_merge_errors():
    with pytest.raises(MergeError, match="phenotype"):
        run(LOOP23, [(5, 7)], 0)
    with pytest.raises(MergeError):
        run(loop_graph(1, 5), [(1, 1)], 0)
    a = single_orbit(LOOP23, 0, 1)
    a.add_tau(0, (0, 0), (0, 0))
    with pytest.raises(MergeError, match="already defined"):
        merge(MergeRequest([a], [single_orbit(LOOP23, 0, 1)], [(0, 0)], [(0, 0)], 0))
    with pytest.raises(MergeError):
        merge(MergeRequest([], [], [], [], 0))


@pytest.mark.parametrize("name", sorted(GRAPHS))
def test_single_pairs_every_edge(name):
    g = GRAPHS[name]
    rng = random.Random(name)
    for e0 in g.edges():
        for _ in range(4):
            N1, N2 = matched_sizes(rng, g, g.src(e0), top=24)
            req, res = run(g, [(N1, N2)], e0)
            assert independent_merge_check(req, res) == [], (name, e0, N1, N2)


@pytest.mark.parametrize("seed", range(12))
def test_several_pairs(seed):
    rng = random.Random(seed)
    name = rng.choice(sorted(GRAPHS))
    g = GRAPHS[name]
    e0 = rng.choice(g.edges())
    pairs = [matched_sizes(rng, g, g.src(e0), top=20) for _ in range(rng.choice([2, 3]))]
    req, res = run(g, pairs, e0)
    assert independent_merge_check(req, res) == [], (name, e0, pairs)


def test_merge_into_larger_preaction():
    # alpha is a realized gadget; the merge starts at a vertex with a free e-slot
    g = THETA
    tree = spanning_tree(g)
    a = realize_finite(gadget(g, 0, 6), tree)
    b = single_orbit(g, 0, 6)
    free = None
    for j in range(6):
        if not a.in_domain(a.point(0, j), 1):
            free = j
            break
    assert free is not None
    req = MergeRequest([a], [b], [(0, 0)], [(0, 0)], 0, (("a", 0, free),) if free else ())
    res = merge(req)
    assert independent_merge_check(req, res) == []


def test_case_tree_is_used_on_path():
    req, res = run(EXTRA["path3"], [(2, 4)], 0)
    assert any("tree" in line or "leaf" in line for line in res.trace)


# ---------------------------------------------------------------- escape words

def completed(g, e, N, d):
    tree = spanning_tree(g)
    h = complete_to_depth(gadget(g, e, N), d)
    return realize_finite(h, tree)


def test_escape_one_vertex_k():
    p = completed(LOOP23, 0, 5, 1)
    x = p.point(0, 0)
    w = escape_word(p, x, {0}, 1)
    assert 1 <= len(w.path) <= 2
    assert is_reduced_typed(w, LOOP23)
    assert check_backtrack(p, x, w)


def test_escape_first_edge_leaves():
    p = completed(SEG23, 0, 6, 1)
    x = p.point(0, 0)
    w = escape_word(p, x, {0}, 0)
    assert len(w.path) == 1


@pytest.mark.parametrize("seed", range(10))
def test_escape_words_leave_k(seed):
    rng = random.Random(seed)
    g = rng.choice([LOOP23, SEG23, THETA, TWO_LOOPS])
    e = g.positive_edges()[0]
    N = rng.randint(1, 6) * abs(g.ksrc(e))
    p = completed(g, e, N, 2)
    K = set(gadget(g, e, N).vertices)
    x = p.point(0, 0)
    w = escape_word(p, x, K, g.out_edges(g.src(e))[0])
    assert is_reduced_typed(w, g) and check_backtrack(p, x, w)
    end = p.evaluate(x, to_group_word(w, g, p.tree))
    assert end is not None
    assert p.member(end, g.trg(w.path[-1]))[0] not in K


def test_escape_nothing_outside():
    p = completed(LOOP23, 0, 5, 0)
    with pytest.raises(EscapeError):
        escape_word(p, p.point(0, 0), set(p.orbits), 0)


@pytest.mark.parametrize("seed", range(6))
def test_common_escape(seed):
    rng = random.Random(seed)
    g = rng.choice([LOOP23, THETA])
    items = []
    for _ in range(rng.choice([2, 3])):
        N = rng.randint(1, 6) * 2
        p = completed(g, 0, N, 2)
        items.append((p, p.point(0, 0), set(gadget(g, 0, N).vertices)))
    w = common_escape(items)
    for p, x, K in items:
        assert check_backtrack(p, x, w)
        end = p.evaluate(x, to_group_word(w, g, p.tree))
        assert end is not None
        assert p.member(end, g.trg(w.path[-1]))[0] not in K


def test_common_escape_identical_actions():
    p = completed(LOOP23, 0, 4, 2)
    K = set(gadget(LOOP23, 0, 4).vertices)
    w1 = common_escape([(p, p.point(0, 0), K)])
    w2 = common_escape([(p, p.point(0, 0), K), (p, p.point(0, 0), K)])
    assert w1 == w2


def test_check_backtrack_empty():
    from gbs.words import TypedWord
    p = completed(LOOP23, 0, 4, 1)
    assert check_backtrack(p, p.point(0, 0), TypedWord(0, (), (1,)))
