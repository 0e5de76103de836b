"""Seeded generators and independent oracles shared by the tests."""

from math import gcd

import networkx as nx
from networkx.algorithms.isomorphism import MultiDiGraphMatcher, categorical_multiedge_match

from gbs.arith import INF, phenotype
from gbs.core import GbsError, GbsGraph, classify, is_reduced, loop_graph, segment_graph, spanning_tree
from gbs.hgraph import complete_to_depth, gadget
from gbs.preaction import Preaction, from_action

LOOP23 = loop_graph(2, 3)
SEG23 = segment_graph(2, 3)
THETA = GbsGraph.from_list(2, [(0, 1, 2, 3), (0, 1, 2, 2), (0, 1, 3, 3)])
TWO_LOOPS = GbsGraph.from_list(1, [(0, 0, 2, 4), (0, 0, 3, 3)])
UNIT_LOOPS = GbsGraph.from_list(1, [(0, 0, 1, 2), (0, 0, 1, 3)])
NAMED = {"loop23": LOOP23, "seg23": SEG23, "theta": THETA, "two-loops": TWO_LOOPS}


# ---------------------------------------------------------------- graphs

LABELS = [-3, -2, 2, 3, 4, 6]


def random_graph(rng, max_vertices=4, max_edges=6):
    """A random reduced non-amenable graph (loops may carry a unit label)."""
    while True:
        n = rng.randint(1, max_vertices)
        m = rng.randint(max(1, n - 1), max_edges)
        edges = []
        for i in range(1, n):
            edges.append((rng.randrange(i), i, rng.choice(LABELS), rng.choice(LABELS)))
        while len(edges) < m:
            s, t = rng.randrange(n), rng.randrange(n)
            k, l = rng.choice(LABELS), rng.choice(LABELS)
            if s == t and rng.random() < 0.2:
                k = rng.choice([1, -1])
            edges.append((s, t, k, l))
        try:
            g = GbsGraph.from_list(n, edges)
        except GbsError:
            continue
        if is_reduced(g) and not classify(g).amenable:
            return g


def random_gadget(rng, g, max_size=60):
    """A gadget of g at a random edge, with a size the edge accepts."""
    for _ in range(100):
        e = rng.choice(g.edges())
        k = abs(g.ksrc(e))
        N = rng.randint(1, max_size)
        if not g.is_loop(e):
            N *= k
        try:
            return gadget(g, e, N)
        except GbsError:
            continue
    raise RuntimeError("no gadget found")


def random_completed(rng, g, max_vertices=400):
    """gadget + complete_to_depth with the depth lowered until the graph stays small."""
    h = random_gadget(rng, g)
    depth = rng.randint(0, 3)
    while depth >= 0:
        out = complete_to_depth(h, depth)
        if len(out.vertices) <= max_vertices:
            return out
        depth -= 1
    return h


# ---------------------------------------------------------------- arithmetic oracles

def vp(n, p):
    """p-adic valuation by repeated division."""
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def transfer_solutions(N, k, l, bound):
    return {M for M in range(1, bound + 1) if M // gcd(M, l) == N // gcd(N, k)}


# ---------------------------------------------------------------- actions

def random_bs_action(rng, m, n, size, tries=2000):
    """A random transitive action of BS(m, n) on ``size`` points.

    a is a random permutation; t matches the cycles of a^m with those of a^n
    of equal length so that x a^m t = x t a^n. Returns (a, t) as lists.
    """
    for _ in range(tries):
        # a random cycle type first: a uniform permutation rarely balances
        lengths, left = [], size
        while left:
            lengths.append(rng.randint(1, left))
            left -= lengths[-1]
        pts = list(range(size))
        rng.shuffle(pts)
        a = [0] * size
        i = 0
        for L in lengths:
            cyc = pts[i:i + L]
            for j, x in enumerate(cyc):
                a[x] = cyc[(j + 1) % L]
            i += L
        pm, pn = _power(a, m), _power(a, n)
        cm, cn = _cycles(pm), _cycles(pn)
        by_len = {}
        for c in cn:
            by_len.setdefault(len(c), []).append(c)
        if sorted(map(len, cm)) != sorted(map(len, cn)):
            continue
        for cs in by_len.values():
            rng.shuffle(cs)
        t = [None] * size
        for c in cm:
            d = by_len[len(c)].pop()
            shift = rng.randrange(len(d))
            for i, x in enumerate(c):
                t[x] = d[(i + shift) % len(d)]
        if _transitive(size, [a, t]):
            return a, t
    return None


def _power(perm, k):
    out = list(range(len(perm)))
    if k < 0:
        inv = [0] * len(perm)
        for i, j in enumerate(perm):
            inv[j] = i
        perm, k = inv, -k
    for _ in range(k):
        out = [perm[x] for x in out]
    return out


def _cycles(perm):
    seen, out = set(), []
    for x in range(len(perm)):
        if x in seen:
            continue
        c = [x]
        seen.add(x)
        y = perm[x]
        while y != x:
            c.append(y)
            seen.add(y)
            y = perm[y]
        out.append(c)
    return out


def _transitive(n, perms):
    seen = {0}
    todo = [0]
    while todo:
        x = todo.pop()
        for p in perms:
            for y in (p[x], p.index(x)):
                if y not in seen:
                    seen.add(y)
                    todo.append(y)
    return len(seen) == n


def action_preaction(g, a, t):
    tree = spanning_tree(g)
    return from_action(g, tree, len(a), {("a", 0): a, ("t", 0): t})


def coset_index(m, n, a, t):
    """Index of the stabilizer of point 0, by Todd-Coxeter in sympy.

    The stabilizer is generated by the Schreier generators of a BFS
    transversal, so nothing from the library is involved.
    """
    from sympy.combinatorics.fp_groups import FpGroup
    from sympy.combinatorics.free_groups import free_group

    F, A, T = free_group("a t")
    G = FpGroup(F, [A ** m * T * A ** (-n) * T ** -1])
    size = len(a)
    inv_a = [a.index(x) for x in range(size)]
    inv_t = [t.index(x) for x in range(size)]
    moves = [(a, A), (inv_a, A ** -1), (t, T), (inv_t, T ** -1)]
    rep = {0: F.identity}
    order = [0]
    for x in order:
        for perm, letter in moves:
            y = perm[x]
            if y not in rep:
                rep[y] = rep[x] * letter
                order.append(y)
    gens = []
    for x in range(size):
        for perm, letter in moves[::2]:
            y = perm[x]
            w = rep[x] * letter * rep[y] ** -1
            if w != F.identity:
                gens.append(w)
    return _index(G, gens)


def _index(G, gens):
    C = G.coset_enumeration(gens)
    C.compress()
    return len(C.table)


# ---------------------------------------------------------------- merge inputs

def single_orbit(g, s, N):
    p = Preaction(g, spanning_tree(g))
    p.add_orbit(s, N)
    return p


def matched_sizes(rng, g, s, top=40):
    N = rng.randint(1, top)
    P = phenotype(g, s, N)
    return N, rng.choice([M for M in range(1, 2 * top) if phenotype(g, s, M) == P])


def is_inf(x):
    return x is INF


def some_bs_action(rng, m, n, lo, hi):
    """Like random_bs_action with a random size in [lo, hi], retrying sizes."""
    while True:
        out = random_bs_action(rng, m, n, rng.randint(lo, hi), tries=300)
        if out:
            return out


# ---------------------------------------------------------------- merge postconditions

def _letters_of(g, tree):
    out = [("a", v, s) for v in g.vertices for s in (1, -1)]
    out += [("t", f) for e in g.positive_edges() if e not in tree for f in (e, e ^ 1)]
    return out


def _images(p, z, ren):
    """Each finite point of p, named in z."""
    out = {}
    for o, orb in p.orbits.items():
        for j in range(orb.size):
            out[p.point(o, j)] = z.point(ren[o], j)
    return out


def relations_hold(z):
    """Defining relations and injectivity, wherever they are defined, on a finite carrier."""
    g = z.g
    pts = z.all_points()
    for e in g.positive_edges():
        s, t, k, l = g.src(e), g.trg(e), g.ksrc(e), g.ktrg(e)
        for x in pts:
            if e in z.tree:
                if z.in_domain(x, s) and z.in_domain(x, t):
                    if z.apply(x, ("a", s, k)) != z.apply(x, ("a", t, l)):
                        return f"tree relation fails at {x}"
            else:
                y = z.apply(x, ("t", e))
                if y is None:
                    continue
                if z.apply(y, ("t", e ^ 1)) != x:
                    return f"stable letter not inverted at {x}"
                y2 = z.apply(z.apply(x, ("a", s, k)), ("t", e))
                if y2 is not None and y2 != z.apply(y, ("a", t, l)):
                    return f"conjugation relation fails at {x}"
        if e not in z.tree:
            imgs = [z.apply(x, ("t", e)) for x in pts]
            imgs = [y for y in imgs if y is not None]
            if len(imgs) != len(set(imgs)):
                return f"stable letter of {e} not injective"
    return None


def independent_merge_check(req, res):
    """Postconditions of a merge checked point by point, without the library checker."""
    from gbs.hgraph import extract

    bad = []
    g = req.alphas[0].g
    letters = _letters_of(g, req.alphas[0].tree)
    for i, z in enumerate(res.gammas):
        a, b = req.alphas[i], req.betas[i]
        ia = _images(a, z, {o: o for o in a.orbits})
        ib = _images(b, z, res.y_renames[i])
        x = z.point(*req.x0[i])
        for letter in res.word:
            x = z.apply(x, letter) if x is not None else None
        if x is None or x != z.point(*res.y0[i]):
            bad.append(f"pair {i}: word misses the target")
        for p, img in ((a, ia), (b, ib)):
            for u, v in img.items():
                for L in letters:
                    w = p.apply(u, L)
                    if w is not None and z.apply(v, L) != img[w]:
                        bad.append(f"pair {i}: {L} not extended at {u}")
                        break
        if set(ia.values()) & set(ib.values()):
            bad.append(f"pair {i}: carriers meet")
        err = relations_hold(z)
        if err:
            bad.append(f"pair {i}: {err}")
        h = extract(z).h
        part = {o: "A" for o in a.orbits}
        part.update({o: "B" for o in res.y_renames[i].values()})
        G = nx.MultiGraph()
        G.add_nodes_from({part.get(v, v) for v in h.vertices})
        for e, u, v in h.edges.values():
            pu, pv = part.get(u, u), part.get(v, v)
            if not (pu == pv and pu in ("A", "B")):
                G.add_edge(pu, pv)
        if not nx.is_tree(G):
            bad.append(f"pair {i}: quotient is not a tree")
    return bad


# ---------------------------------------------------------------- isomorphism oracles

def as_nx(h):
    G = nx.MultiDiGraph()
    for v, lab in h.vertices.items():
        G.add_node(v, lab=lab)
    for e, a, b in h.edges.values():
        G.add_edge(a, b, typ=e)
    return G


def nx_iso(h1, h2):
    m = MultiDiGraphMatcher(as_nx(h1), as_nx(h2), node_match=lambda x, y: x["lab"] == y["lab"],
                            edge_match=categorical_multiedge_match("typ", None))
    return m.is_isomorphic()


def ball_nx(b):
    G = nx.MultiDiGraph()
    for x in b.dist:
        G.add_node(x, root=x == b.root)
    for y, gen, z in b.edges:
        G.add_edge(y, z, gen=gen)
    return G


def nx_ball_iso(b1, b2):
    m = MultiDiGraphMatcher(ball_nx(b1), ball_nx(b2), node_match=lambda a, b: a["root"] == b["root"],
                            edge_match=categorical_multiedge_match("gen", None))
    return m.is_isomorphic()
