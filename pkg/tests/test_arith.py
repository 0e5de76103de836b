import pickle
import random
from math import gcd

import pytest
from hypothesis import given, strategies as st

from gbs.arith import (INF, drain, egcd, is_attained, parse_extnat, phenotype, phenotype_bs,
                       phenotype_oracle, phenotype_set, phi, propagate, settled, transfer_ok,
                       transfer_targets, val)
from gbs.core import GbsError, loop_graph, segment_graph
from gen import THETA, random_graph, transfer_solutions, vp

LOOP = loop_graph(2, 3)
SEG = segment_graph(2, 3)
nonzero = st.integers(-30, 30).filter(bool)


def test_val_examples():
    assert val(12, 2) == 2
    assert val(INF, 7) is INF
    assert val(-18, 3) == 2
    with pytest.raises(GbsError):
        val(0, 2)


def test_egcd_examples():
    assert egcd(INF, 6) == 6
    assert egcd(6, INF) == 6
    assert egcd(4, 6) == 2
    assert egcd(INF, INF) is INF
    with pytest.raises(GbsError):
        egcd(0, 0)


def test_transfer_ok_examples():
    assert transfer_ok(4, 2, 2, 3)
    assert transfer_ok(4, 2, 6, 3)
    assert not transfer_ok(4, 2, 3, 3)
    assert transfer_ok(INF, 2, INF, 3)
    assert not transfer_ok(INF, 2, 4, 3)


def test_transfer_targets_examples():
    assert transfer_targets(4, 2, 3) == {2, 6}
    assert transfer_targets(INF, 2, 3) == {INF}
    assert transfer_targets(1, 5, 5) == {1, 5}


@given(st.integers(1, 300), nonzero, nonzero)
def test_transfer_targets_brute_force(N, k, l):
    assert transfer_targets(N, k, l) == transfer_solutions(N, k, l, N * abs(l) + 1)


def test_phenotype_examples():
    assert phenotype_set(LOOP, 0, 12) == set()
    assert phenotype_set(LOOP, 0, 5) == {5}
    assert phenotype_set(SEG, 0, 12) == {2, 3}
    assert phenotype(LOOP, 0, 12) == 1
    assert phenotype(SEG, 0, 12) == 12
    assert phenotype(THETA, 1, INF) is INF


def test_phenotype_bs_examples():
    assert phenotype_bs(2, 3, 12) == 1
    assert phenotype_bs(2, 2, 8) == 8
    assert phenotype_bs(2, 3, INF) is INF


def test_is_attained_examples():
    assert is_attained(LOOP, 0, 5)
    assert not is_attained(LOOP, 0, 12)
    assert is_attained(THETA, 0, 1)


def test_phi_examples():
    # |4|_2 = 2 > |2|_2 = 1 so 2^(2 + 0 - 1) survives; no factor 3 appears
    assert phi(3, 2, 4) == 2
    assert phi(5, 7, 1) == 1
    assert phi(2, 3, INF) is INF


def _phi_brute(m, n, N):
    out = 1
    for p in range(2, N + 1):
        if all(p % q for q in range(2, p)) and N % p == 0:
            if vp(N, p) > vp(n, p):
                out *= p ** (vp(N, p) + vp(m, p) - vp(n, p))
    return out


@given(nonzero, nonzero, st.integers(1, 2000))
def test_phi_brute_force(m, n, N):
    assert phi(m, n, N) == _phi_brute(m, n, N)


def test_propagate_examples():
    assert propagate(8, [(2, 3)], 2) == 2
    assert propagate(40, [], 2) == 3
    assert propagate(32, [(2, 2), (2, 2)], 2) == 5
    with pytest.raises(GbsError):
        propagate(2, [(2, 3)], 2)


def test_drain_examples():
    assert drain(2, 3, 1) == [1]
    assert drain(2, 3, INF) == [INF]
    # pushing 12 along (2,3) loses the 2-part and grows the 3-part
    assert drain(2, 3, 12) == [12, 18, 27]
    # the way back along (3,2) then empties the 3-part
    back = drain(3, 2, 27, stop=lambda x: x % 2 and x % 3)
    assert back == [27, 9, 3, 1]


@given(nonzero, nonzero, st.integers(1, 5000))
def test_drain_ends_settled(m, n, N):
    traj = drain(m, n, N)
    assert settled(m, n, traj[-1])
    assert all(not settled(m, n, x) for x in traj[:-1])


@given(st.integers(-30, 30).filter(lambda x: abs(x) >= 2), st.integers(-30, 30).filter(lambda x: abs(x) >= 2),
       st.integers(1, 10 ** 4))
def test_loop_phenotype_is_bs_phenotype(m, n, N):
    assert phenotype(loop_graph(m, n), 0, N) == phenotype_bs(m, n, N)


@pytest.mark.parametrize("seed", range(25))
def test_phenotype_matches_oracle(seed):
    rng = random.Random(seed)
    g = random_graph(rng, max_vertices=3, max_edges=4)
    for v in g.vertices:
        for N in rng.sample(range(1, 400), 12):
            assert phenotype(g, v, N) == phenotype_oracle(g, v, N), (g, v, N)


@given(st.integers(1, 10 ** 4))
def test_phenotype_divides_and_is_idempotent(N):
    for g, v in ((LOOP, 0), (SEG, 0), (SEG, 1), (THETA, 0)):
        P = phenotype(g, v, N)
        assert N % P == 0
        assert phenotype(g, v, P) == P
        assert gcd(P, N // P) == 1


def test_infinity_behaves():
    assert parse_extnat("inf") is INF
    assert parse_extnat("12") == 12
    assert pickle.loads(pickle.dumps(INF)) is INF
    assert 10 ** 30 < INF and not INF < 5
    with pytest.raises(ValueError):
        parse_extnat("-3")
