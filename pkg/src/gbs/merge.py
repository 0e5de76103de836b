"""Joining pointed preactions by one common word, and escape words.

``merge`` takes Σ pairs of pointed preactions whose orbits share a phenotype
and extends each pair to a single preaction in which a common word carries
the first base point to the second. It works by induction on the number of
edges of the graph: a base case for a loop and for a segment, and otherwise
a reduction to a smaller subgraph after walking every base point to an orbit
whose phenotype relative to the subgraph is already matched.

Escape words find reduced typed words whose edge path leaves a finite part
of the graph of a preaction.
"""

import os
from collections import deque
from dataclasses import dataclass, field

from .arith import (INF, egcd, far_size, label_primes, phenotype, phi, prime_factors,
                    settled, transfer_quotient, val)
from .core import GbsError, is_reduced, tree_path
from .hgraph import extract, path_of, quotient
from .preaction import disjoint_union, validate
from .words import TypedWord, concat_typed, inverse, is_reduced_typed, simplify, to_group_word


class MergeError(GbsError):
    pass


@dataclass
class MergeRequest:
    """Σ pairs (alphas[i], x0[i]) and (betas[i], y0[i]) to be joined.

    ``m`` and ``m2`` are group words; the walk starts at x0[i]·m and y0[i]·m2,
    where the generator of src(e0) must be defined and e0 must not be.
    """

    alphas: list
    betas: list
    x0: list
    y0: list
    e0: int
    m: tuple = ()
    m2: tuple = ()


@dataclass
class MergeResult:
    gammas: list
    word: tuple
    y_renames: list
    y0: list
    trace: list = field(default_factory=list)
    before: list = field(default_factory=list, repr=False)


def _degenerate(h):
    pos = h.positive_edges()
    return (len(pos) == 1 and h.is_loop(pos[0])
            and (abs(h.ksrc(pos[0])) == 1 or abs(h.ktrg(pos[0])) == 1))


def _drain_size(N, f, g):
    """Smallest size reachable across f from a size-N orbit at src(f)."""
    return phi(g.ktrg(f), g.ksrc(f), N)


class _Walk:
    """Shared state of one merge: the Σ working preactions and the trace."""

    def __init__(self, zs, g, tree):
        self.zs = zs
        self.g = g
        self.tree = tree
        self.trace = []
        self.depth = 0

    def log(self, text):
        self.trace.append("  " * self.depth + text)

    def sizes(self, pts, v):
        out = []
        for z, x in zip(self.zs, pts):
            n = z.orbit_size(x, v)
            if n is None:
                raise MergeError(f"point {x} has no orbit of type {v}")
            out.append(n)
        return out

    def step(self, pts, v, k, word):
        out = [z.apply(x, ("a", v, k)) for z, x in zip(self.zs, pts)]
        if any(y is None for y in out):
            raise MergeError(f"generator of vertex {v} undefined on the front")
        word.append(("a", v, k))
        return out

    def tau(self, pts, f, sizes, word):
        """Push the points along the non-tree edge f into fresh orbits of the given sizes."""
        out = [z.tau_new(f, x, n) for z, x, n in zip(self.zs, pts, sizes)]
        word.append(("t", f))
        return out

    def glue(self, pts, f, sizes):
        """Glue fresh orbits to the points along the tree edge f; the points do not move."""
        for z, x, n in zip(self.zs, pts, sizes):
            z.glue_new(f, x, n)
        return [z.point(*x) for z, x in zip(self.zs, pts)]

    def chain(self, pts, path, size_rule):
        for f in path:
            ns = [size_rule(N, f, self.g) for N in self.sizes(pts, self.g.src(f))]
            pts = self.glue(pts, f, ns)
        return pts

    def fresh(self, s, sizes):
        return [z.point(z.add_orbit(s, n), 0) for z, n in zip(self.zs, sizes)]


def _far(N, f, g):
    return far_size(N, g.ksrc(f), g.ktrg(f))


def _leave(w, pts, e0, word):
    """Cross e0 to fresh points that carry a single type."""
    g = w.g
    ns = [_far(N, e0, g) for N in w.sizes(pts, g.src(e0))]
    if e0 in w.tree:
        pts = w.glue(pts, e0, ns)
        return w.step(pts, g.trg(e0), 1, word)
    return w.tau(pts, e0, ns, word)


def _prepare(w, sub, pts, e0, e):
    """Move the front to points of type src(e) on which the letter of e is undefined."""
    g = w.g
    s = g.src(e)
    word = []
    if all(z.in_domain(x, s) and z.tau_image(x, e) is None for z, x in zip(w.zs, pts)):
        return pts, word
    pts = _leave(w, pts, e0, word)
    pts = w.chain(pts, tree_path(sub, w.tree, g.trg(e0), s), _far)
    if any(z.tau_image(x, e) is not None for z, x in zip(w.zs, pts)):
        pts = w.step(pts, s, 1, word)
    if any(z.tau_image(x, e) is not None for z, x in zip(w.zs, pts)):
        raise MergeError("could not reach a point free for the stable letter")
    return pts, word


def _check_ph(sub, s, a, b, what):
    for i, (n1, n2) in enumerate(zip(a, b)):
        if phenotype(sub, s, n1) != phenotype(sub, s, n2):
            raise MergeError(f"{what}: phenotypes differ at pair {i}: {n1} vs {n2}")


def _recurse(w, sub, s, xsizes, ysizes):
    """Join fresh orbits of the given sizes over ``sub``; returns the points and word."""
    _check_ph(sub, s, xsizes, ysizes, "subgraph phenotype")
    om1, om2 = w.fresh(s, xsizes), w.fresh(s, ysizes)
    e0 = sub.out_edges(s)[0]
    w.depth += 1
    inner = _rec(w, sub, om1, om2, e0)
    w.depth -= 1
    return om1, om2, inner


# ---------------------------------------------------------------- base cases

def _loop_walk(w, pts, e):
    """Drain forward along the loop e, turn once, drain backward.

    Returns the final points, on which the inverse letter of e is undefined,
    and the word read.
    """
    g = w.g
    k, l, s = g.ksrc(e), g.ktrg(e), g.src(e)
    word = []
    while not all(settled(k, l, N) for N in w.sizes(pts, s)):
        pts = w.tau(pts, e, [phi(l, k, N) for N in w.sizes(pts, s)], word)
    M = w.sizes(pts, s)
    pts = w.tau(pts, e, [far_size(N, k, l) for N in M], word)
    pts = w.step(pts, s, 1, word)
    pts = w.tau(pts, e ^ 1, M, word)
    while not all(settled(l, k, N) for N in w.sizes(pts, s)):
        pts = w.tau(pts, e ^ 1, [phi(k, l, N) for N in w.sizes(pts, s)], word)
    return pts, word


def _base_loop(w, sub, xs, ys, e0):
    g = w.g
    e, s = e0, g.src(e0)
    k, l = g.ksrc(e), g.ktrg(e)
    w.log(f"base loop {g.edge_name(e)} labels ({k},{l})")
    N = w.sizes(xs, s)
    xs, wx = _loop_walk(w, xs, e)
    ys, wy = _loop_walk(w, ys, e)
    P, P2 = w.sizes(xs, s), w.sizes(ys, s)
    for n0, p1, p2 in zip(N, P, P2):
        if p1 != p2 or p1 != phenotype(sub, s, n0):
            raise MergeError(f"loop drain ended at {p1} and {p2}, expected {phenotype(sub, s, n0)}")
    word = list(wx)
    zs = w.tau(xs, e ^ 1, [far_size(n, l, k) for n in P], word)
    zs = w.step(zs, s, 1, word)
    for z, y, t in zip(w.zs, ys, zs):
        z.add_tau(e ^ 1, y, t)
    w.log(f"drains {len(wx)} and {len(wy)} letters, bridge size {P}")
    return word + list(inverse(tuple(wy) + (("t", e ^ 1),)))


def _base_segment(w, sub, xs, ys, e0):
    g = w.g
    e, s, t = e0, g.src(e0), g.trg(e0)
    k, l = g.ksrc(e), g.ktrg(e)
    w.log(f"base segment {g.edge_name(e)} labels ({k},{l})")
    N = w.sizes(xs, s)
    _check_ph(sub, s, N, w.sizes(ys, s), "segment")
    fronts = []
    for pts in (xs, ys):
        pts = w.glue(pts, e, [far_size(n, k, l) for n in w.sizes(pts, s)])
        pts = w.step(pts, t, 1, [])
        pts = w.glue(pts, e ^ 1, [far_size(n, l, k) for n in w.sizes(pts, t)])
        fronts.append(w.step(pts, s, 1, []))
    P = [phenotype(sub, s, n) for n in N]
    tops = w.glue(fronts[0], e, [far_size(p, k, l) for p in P])
    for z, y, x in zip(w.zs, fronts[1], tops):
        z.glue(e, y, z.apply(x, ("a", t, 1)))
    return [("a", t, 1), ("a", s, 1), ("a", t, 1), ("a", s, -1), ("a", t, -1)]


# ---------------------------------------------------------------- induction

def _case_tree(w, sub, xs, ys, e0):
    g = w.g
    deg = {v: 0 for v in sub.vertices}
    for e in sub.positive_edges():
        deg[sub.src(e)] += 1
        deg[sub.trg(e)] += 1
    f = min(v for v in sub.vertices if deg[v] == 1)
    leaf = next(e for e in sub.out_edges(f))
    nb = g.trg(leaf)
    k, l = g.ksrc(leaf), g.ktrg(leaf)
    w.log(f"tree: strip leaf {g.vertex_names[f]} through {g.edge_name(leaf)}")
    path = tree_path(sub, w.tree, g.trg(e0), f)
    fronts, sizes = [], []
    for pts in (xs, ys):
        pts = w.glue(pts, e0, [_far(n, e0, g) for n in w.sizes(pts, g.src(e0))])
        pts = w.step(pts, g.trg(e0), 1, [])
        pts = w.chain(pts, path, _far)
        sizes.append([far_size(n, k, l) for n in w.sizes(pts, f)])
        fronts.append(w.step(pts, f, 1, []) if path else pts)
    rest = sub.without_vertex(f)
    om1, om2, inner = _recurse(w, rest, nb, sizes[0], sizes[1])
    for z, x, y, o1, o2 in zip(w.zs, fronts[0], fronts[1], om1, om2):
        z.glue(leaf, x, o1)
        z.glue(leaf, y, o2)
    kappa = [("a", g.trg(e0), 1)] + ([("a", f, 1)] if path else [])
    return kappa + list(inner) + list(inverse(tuple(kappa)))


def _sweep(N, edges, g):
    for f in edges:
        N = _drain_size(N, f, g)
    return N


def _sweep_settled(N, edges, g):
    if N is INF:
        return True
    M = _sweep(N, edges, g)
    return all(val(M, p) >= val(N, p) for p in prime_factors(N))


def _thresholds(g, e, path):
    """Per label prime: (forward threshold, backward threshold, drift) along the cycle."""
    n, m = g.ksrc(e), g.ktrg(e)
    out = {}
    for p in sorted(label_primes(g)):
        ks = [val(g.ksrc(f), p) for f in path]
        ls = [val(g.ktrg(f), p) for f in path]
        r = len(path)
        drift = sum(ks) - sum(ls) + val(m, p) - val(n, p)
        fwd = max([val(n, p)] + [val(n, p) - val(m, p) + ls[q] + sum(ls[q + 1:]) - sum(ks[q + 1:])
                                 for q in range(r)])
        bwd = max([val(m, p) + sum(ks) - sum(ls)]
                  + [ks[q] + sum(ks[:q]) - sum(ls[:q]) for q in range(r)])
        out[p] = (fwd, bwd, drift)
    return out


def _check_thresholds(g, e, path, th, N):
    """The closed form of one forward sweep must agree with the step-by-step sizes."""
    if N is INF:
        return
    fwd_edges = [e] + [f ^ 1 for f in reversed(path)]
    M = _sweep(N, fwd_edges, g)
    for p in set(prime_factors(N)) | set(th):
        v = val(N, p)
        fwd, _, drift = th.get(p, (0, 0, 0))
        want = v + drift if v > fwd else 0
        if val(M, p) != want:
            raise MergeError(f"sweep threshold mismatch at p={p}: {val(M, p)} vs {want}")


def _case_cycle(w, sub, xs, ys, e0, e):
    """Non-tree edge e between two distinct vertices."""
    g = w.g
    sa, sb = g.src(e), g.trg(e)
    n, m = g.ksrc(e), g.ktrg(e)
    path = tree_path(sub, w.tree, sa, sb)
    th = _thresholds(g, e, path)
    w.log(f"cycle edge {g.edge_name(e)}: thresholds " +
          ", ".join(f"p={p}:C={a},Cbar={b},drift={c}" for p, (a, b, c) in th.items()))
    fwd_edges = [e] + [f ^ 1 for f in reversed(path)]
    back_edges = list(path) + [e ^ 1]
    results = []
    for pts0 in (xs, ys):
        pts, word = _prepare(w, sub, pts0, e0, e)
        while True:
            N = w.sizes(pts, sa)
            for n0 in N:
                _check_thresholds(g, e, path, th, n0)
            if all(_sweep_settled(x, fwd_edges, g) for x in N):
                break
            pts = w.tau(pts, e, [_drain_size(x, e, g) for x in N], word)
            pts = w.chain(pts, [f ^ 1 for f in reversed(path)], _drain_size)
        N = w.sizes(pts, sa)
        pts = w.tau(pts, e, [far_size(x, n, m) for x in N], word)
        pts = w.step(pts, sb, 1, word)
        pts = w.tau(pts, e ^ 1, N, word)
        while not all(_sweep_settled(x, back_edges, g) for x in w.sizes(pts, sa)):
            pts = w.chain(pts, path, _drain_size)
            pts = w.tau(pts, e ^ 1, [_drain_size(x, e ^ 1, g) for x in w.sizes(pts, sb)], word)
        K = w.sizes(pts, sa)
        pts = w.chain(pts, path, _drain_size)
        results.append((pts, word, K))
    (xe, wx, K1), (ye, wy, K2) = results
    rest = sub.without_edge(e)
    om1, om2, inner = _recurse(w, rest, sa, K1, K2)
    for z, x, y, o1, o2 in zip(w.zs, xe, ye, om1, om2):
        z.add_tau(e ^ 1, x, o1)
        z.add_tau(e ^ 1, y, o2)
    return wx + [("t", e ^ 1)] + list(inner) + [("t", e)] + list(inverse(tuple(wy)))


def _case_loop(w, sub, xs, ys, e0, e):
    """Non-tree loop e with both labels different from ±1."""
    g = w.g
    s = g.src(e)
    w.log(f"loop edge {g.edge_name(e)} labels ({g.ksrc(e)},{g.ktrg(e)})")
    ends = []
    for pts0 in (xs, ys):
        pts, kappa = _prepare(w, sub, pts0, e0, e)
        pts, word = _loop_walk(w, pts, e)
        ends.append((pts, kappa + word))
    (xe, wx), (ye, wy) = ends
    rest = sub.without_edge(e)
    om1, om2, inner = _recurse(w, rest, s, w.sizes(xe, s), w.sizes(ye, s))
    for z, x, y, o1, o2 in zip(w.zs, xe, ye, om1, om2):
        z.add_tau(e ^ 1, x, o1)
        z.add_tau(e ^ 1, y, o2)
    return wx + [("t", e ^ 1)] + list(inner) + [("t", e)] + list(inverse(tuple(wy)))


def _unit_drain(w, pts, d, word, at_least=0):
    """Follow d (target label ±1) until the orbit size is prime to its source label."""
    s, n = w.g.src(d), w.g.ksrc(d)
    count = 0
    while count < at_least or not all(N is INF or egcd(N, n) == 1 for N in w.sizes(pts, s)):
        pts = w.tau(pts, d, [transfer_quotient(N, n) for N in w.sizes(pts, s)], word)
        count += 1
    return pts


def _case_unit_loop(w, sub, xs, ys, e0, e):
    """Non-tree loop e carrying a label ±1, oriented so the target label is ±1."""
    g = w.g
    s = g.src(e)
    w.log(f"unit loop {g.edge_name(e)} labels ({g.ksrc(e)},{g.ktrg(e)})")
    ends = []
    for pts0 in (xs, ys):
        pts, word = _prepare(w, sub, pts0, e0, e)
        pts = _unit_drain(w, pts, e, word)
        ends.append((pts, word))
    (xe, wx), (ye, wy) = ends
    rest = sub.without_edge(e)
    om1, om2, inner = _recurse(w, rest, s, w.sizes(xe, s), w.sizes(ye, s))
    for z, x, y, o1, o2 in zip(w.zs, xe, ye, om1, om2):
        z.add_tau(e, x, o1)
        z.add_tau(e, y, o2)
    return wx + [("t", e)] + list(inner) + [("t", e ^ 1)] + list(inverse(tuple(wy)))


def _unit_direction(g, e):
    return e if abs(g.ktrg(e)) == 1 else e ^ 1


def _case_two_unit_loops(w, sub, xs, ys, e0):
    g = w.g
    loops = sub.positive_edges()
    mine = e0 & ~1
    other = next(f for f in loops if f != mine)
    s = g.src(e0)
    if e0 == _unit_direction(g, mine):
        first, second = _unit_direction(g, mine), _unit_direction(g, other)
    else:
        first, second = _unit_direction(g, other), _unit_direction(g, mine)
    w.log(f"two unit loops: drain {g.edge_name(first)} then {g.edge_name(second)}")
    ends = []
    for pts in (xs, ys):
        word = []
        if e0 != first:
            pts = _leave(w, pts, e0, word)
        pts = _unit_drain(w, pts, first, word, at_least=1)
        pts = _unit_drain(w, pts, second, word, at_least=1)
        pts = _unit_drain(w, pts, first, word, at_least=1)
        ends.append((pts, word))
    (xe, wx), (ye, wy) = ends
    C, C2 = w.sizes(xe, s), w.sizes(ye, s)
    if C != C2:
        raise MergeError(f"unit-loop drains ended at {C} and {C2}")
    for z, x, y in zip(w.zs, xe, ye):
        z.add_tau(second, x, y)
    return wx + [("t", second)] + list(inverse(tuple(wy)))


def _rec(w, sub, xs, ys, e0):
    g = w.g
    pos = sub.positive_edges()
    if len(pos) == 1:
        if sub.is_loop(pos[0]):
            return _base_loop(w, sub, xs, ys, e0)
        return _base_segment(w, sub, xs, ys, e0)
    nontree = [e for e in pos if e not in w.tree]
    if not nontree:
        return _case_tree(w, sub, xs, ys, e0)
    for e in nontree:
        if _degenerate(sub.without_edge(e)):
            continue
        e = e0 if e0 & ~1 == e else e
        if not g.is_loop(e):
            return _case_cycle(w, sub, xs, ys, e0, e)
        if min(abs(g.ksrc(e)), abs(g.ktrg(e))) >= 2:
            return _case_loop(w, sub, xs, ys, e0, e)
        return _case_unit_loop(w, sub, xs, ys, e0, _unit_direction(g, e))
    return _case_two_unit_loops(w, sub, xs, ys, e0)


# ---------------------------------------------------------------- checks

def _letters(p):
    g = p.g
    out = []
    for v in g.vertices:
        out += [("a", v, 1), ("a", v, -1)]
    for e in g.positive_edges():
        if e not in p.tree:
            out += [("t", e), ("t", e ^ 1)]
    return out


def _extends(big, small, ren, orbits=None):
    """Every letter defined on ``small`` is defined the same way on ``big``."""
    letters = _letters(small)

    def move(x):
        return big.point(ren[x[0]], x[1])

    for x in small.sample_points(orbits):
        for a in letters:
            y = small.apply(x, a)
            if y is not None and big.apply(move(x), a) != move(y):
                return (x, a)
    for o, orb in small.orbits.items():
        if big.orbits[ren[o]] != orb:
            return (o, "orbit")
    return None


def _touched(z, old):
    """Orbits whose points may have changed: new ones, those in new rules, and
    whatever the identifications reach from them within the graph size."""
    old_orbits, old_idents, old_taus = old
    near = set(z.orbits) - old_orbits
    for r in z.idents:
        if r not in old_idents:
            near |= {r[0], r[3]}
    for e, rules in z.taus.items():
        for r in rules:
            if (e, r) not in old_taus:
                near |= {r[0], r[2]}
    for _ in range(len(z.g.vertices)):
        grow = {r[3] for r in z.idents if r[0] in near} | {r[0] for r in z.idents if r[3] in near}
        if grow <= near:
            break
        near |= grow
    return near


def _snapshot(p):
    return (set(p.orbits), set(p.idents), {(e, r) for e, rules in p.taus.items() for r in rules})


def check_merge(req, res, local=False):
    """All conclusions of a merge, as a list of failure messages (empty when fine).

    With ``local`` the pointwise checks only visit orbits the merge could
    have changed; the unchanged part is the input itself.
    """
    bad = []
    for i, z in enumerate(res.gammas):
        a, b = req.alphas[i], req.betas[i]
        ident = {o: o for o in a.orbits}
        near = _touched(z, res.before[i]) if local else None
        inv = {v: o for o, v in res.y_renames[i].items()}
        if z.evaluate(req.x0[i], res.word) != z.point(*res.y0[i]):
            bad.append(f"pair {i}: word does not carry x0 to y0")
        v = validate(z, near)
        if v is not None:
            bad.append(f"pair {i}: {v}")
        if _extends(z, a, ident, None if near is None else near & set(a.orbits)) is not None:
            bad.append(f"pair {i}: first preaction not extended")
        if _extends(z, b, res.y_renames[i],
                    None if near is None else {inv[o] for o in near if o in inv}) is not None:
            bad.append(f"pair {i}: second preaction not extended")
        ys = set(res.y_renames[i].values())
        for x in a.sample_points(None if near is None else near & set(a.orbits)):
            if any(o in ys for o, _ in z.members(x)):
                bad.append(f"pair {i}: the two carriers meet")
                break
        h = extract(z).h
        if not quotient(h, [set(a.orbits), ys]).is_tree():
            bad.append(f"pair {i}: quotient is not a tree")
    return bad


def merge(req, check=True):
    """Join every pair of the request by one word; see ``MergeRequest``.

    ``check`` is True for the full postcondition check, "local" to examine
    only the orbits the merge touched, False to skip it.
    """
    if not req.alphas or len(req.alphas) != len(req.betas):
        raise MergeError("need the same positive number of first and second preactions")
    p0 = req.alphas[0]
    g, tree = p0.g, p0.tree
    if not is_reduced(g) or _degenerate(g):
        raise MergeError("graph must be reduced and not a loop with a label ±1")
    for p in list(req.alphas) + list(req.betas):
        if p.g != g or p.tree != tree:
            raise MergeError("preactions over different graphs or trees")
    zs, rens, y0 = [], [], []
    for a, b, y in zip(req.alphas, req.betas, req.y0):
        z, ren = disjoint_union(a, b)
        zs.append(z)
        rens.append(ren)
        y0.append(z.point(ren[y[0]], y[1]))
    e0 = req.e0
    s, t = g.src(e0), g.trg(e0)
    xs = [z.evaluate(x, req.m) for z, x in zip(zs, req.x0)]
    ys = [z.evaluate(y, req.m2) for z, y in zip(zs, y0)]
    for i, (z, x, y) in enumerate(zip(zs, xs, ys)):
        for pt in (x, y):
            if pt is None:
                raise MergeError(f"pair {i}: starting word undefined")
            if not z.in_domain(pt, s):
                raise MergeError(f"pair {i}: generator of the source vertex undefined")
            busy = z.in_domain(pt, t) if e0 in tree else z.tau_image(pt, e0) is not None
            if busy:
                raise MergeError(f"pair {i}: the starting edge is already defined")
    _check_ph(g, s, [z.orbit_size(x, s) for z, x in zip(zs, xs)],
              [z.orbit_size(y, s) for z, y in zip(zs, ys)], "phenotype mismatch")
    before = [_snapshot(z) for z in zs]
    w = _Walk(zs, g, tree)
    try:
        inner = _rec(w, g, xs, ys, e0)
    except GbsError as exc:
        if isinstance(exc, MergeError):
            raise
        raise MergeError(f"construction failed: {exc}") from exc
    word = simplify(tuple(req.m) + tuple(inner) + inverse(tuple(req.m2)))
    res = MergeResult(zs, word, rens, y0, w.trace, before)
    if os.environ.get("GBS_TRACE") == "1":
        import sys
        print("\n".join(w.trace), file=sys.stderr)
    if check:
        bad = check_merge(req, res, local=check == "local")
        if bad:
            raise MergeError("postcondition failed: " + "; ".join(bad))
    return res


# ---------------------------------------------------------------- escape words

class EscapeError(GbsError):
    pass


def _oriented_edges(h):
    """Adjacency of oriented graph edges (eid, d): d = 0 follows the stored direction."""
    out = {v: [] for v in h.vertices}
    for eid, (e, a, b) in sorted(h.edges.items()):
        out[a].append((eid, 0))
        out[b].append((eid, 1))
    return out


def _ends(h, E):
    e, a, b = h.edges[E[0]]
    return (a, b) if E[1] == 0 else (b, a)


def _reduced_paths(h, adj, E, limit):
    """Reduced oriented edge paths starting with E, breadth first, up to ``limit`` edges."""
    queue = deque([(E,)])
    while queue:
        path = queue.popleft()
        yield path
        if len(path) >= limit:
            continue
        last = path[-1]
        for F in adj[_ends(h, last)[1]]:
            if F == (last[0], 1 - last[1]):
                continue
            queue.append(path + (F,))


def _shortest_out(h, adj, start, K, first_not=None):
    """A shortest oriented path from start to a vertex outside K."""
    prev = {start: None}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        if v not in K:
            path = []
            while prev[v] is not None:
                F, v = prev[v]
                path.append(F)
            return path[::-1]
        for F in adj[v]:
            if v == start and first_not is not None and F == first_not:
                continue
            u = _ends(h, F)[1]
            if u not in prev:
                prev[u] = (F, v)
                queue.append(u)
    return None


def _is_reduced_path(path):
    return all(b != (a[0], 1 - a[1]) for a, b in zip(path, path[1:]))


def _edge_type(h, E):
    e = h.edges[E[0]][0]
    return e if E[1] == 0 else e ^ 1


def _anchor(p, ext, E):
    """A point on the oriented graph edge E, seen from its source."""
    x = ext.edge_point[E[0]]
    if E[1] == 0:
        return x
    e = ext.h.edges[E[0]][0]
    return x if e in p.tree else p.tau_image(x, e)


def _cross(p, x, f):
    return x if (f & ~1) in p.tree else p.tau_image(x, f)


def _lift(p, ext, x, g0, path):
    """Typed word from x whose edge path is ``path``; the first power is g0."""
    g = p.g
    h = ext.h
    f0 = _edge_type(h, path[0])
    s0 = g.src(f0)
    powers = [g0]
    y = p.apply(x, ("a", s0, g0))
    for i, E in enumerate(path):
        f = _edge_type(h, E)
        if y is None or ext.edge_of(p, y, f) != E:
            raise EscapeError(f"edge path and points disagree at step {i}")
        y = _cross(p, y, f)
        if i + 1 == len(path):
            break
        nxt = path[i + 1]
        f2 = _edge_type(h, nxt)
        s = g.trg(f)
        o, off = p.member(y, s)
        ao, aoff = p.member(_anchor(p, ext, nxt), s)
        if ao != o:
            raise EscapeError("next edge does not leave the current orbit")
        d = egcd(p.orbits[o].size, g.ksrc(f2))
        mu = (aoff - off) % d
        if f2 == f ^ 1:
            # turning back through the same coset type: the power must avoid <a^k>
            k = g.ktrg(f)
            while mu % k == 0:
                mu += d
                if mu > d * abs(k) + d:
                    raise EscapeError("no reduced turn available")
        powers.append(mu)
        y = p.apply(y, ("a", s, mu))
    powers.append(0)
    return TypedWord(s0, tuple(_edge_type(h, E) for E in path), tuple(powers))


def _target(p, ext, x, word):
    path = path_of(p, ext, x, word)
    if path is None:
        return None
    return _ends(ext.h, path[-1])[1]


def escape_word(p, x, K, e, g0=0):
    """Reduced typed word starting (e, g0) from x whose edge path ends outside K.

    ``K`` is a set of vertices of ``extract(p).h`` (orbit ids). The search
    tries a reduced cycle through the first edge, then a reduced path out of
    K, then a dead end, turning around there and leaving along another edge.
    """
    g = p.g
    ext = extract(p)
    h = ext.h
    K = set(K)
    if not set(h.vertices) - K:
        raise EscapeError("nothing outside K")
    y = p.apply(x, ("a", g.src(e), g0))
    if y is None:
        raise EscapeError("starting power undefined")
    E = ext.edge_of(p, y, e)
    if E is None:
        raise EscapeError("first edge undefined at the starting point")
    adj = _oriented_edges(h)
    V0 = _ends(h, E)[0]
    limit = len(h.vertices) + 1
    candidates = []
    if _ends(h, E)[1] not in K:
        candidates.append([E])
    # a reduced cycle through E, then out of K
    out = _shortest_out(h, adj, V0, K)
    for path in _reduced_paths(h, adj, E, limit):
        if _ends(h, path[-1])[1] == V0 and out is not None:
            C, F = list(path), list(out)
            i0 = 0
            while i0 < min(len(C), len(F)) and F[i0] == (C[-1 - i0][0], 1 - C[-1 - i0][1]):
                i0 += 1
            cand = C[:len(C) - i0] + F[i0:]
            if cand and _is_reduced_path(cand):
                candidates.append(cand)
            break
    # a reduced path starting with E that leaves K
    if not candidates:
        for path in _reduced_paths(h, adj, E, limit):
            if _ends(h, path[-1])[1] not in K:
                candidates.append(list(path))
                break
    # a dead end: go there, turn around, come back and leave by another edge
    if not candidates:
        for path in _reduced_paths(h, adj, E, limit):
            end = _ends(h, path[-1])[1]
            if len(adj[end]) == 1:
                back = [(F[0], 1 - F[1]) for F in reversed(path)]
                away = _shortest_out(h, adj, V0, K, first_not=E)
                if away is not None:
                    candidates.append(list(path) + back + away)
                break
    for cand in candidates:
        try:
            word = _lift(p, ext, x, g0, cand)
        except EscapeError:
            continue
        if is_reduced_typed(word, g) and _target(p, ext, x, word) not in K:
            return word
    raise EscapeError("no escape word found")


def common_escape(items):
    """One typed word leaving K_i from x_i for every (preaction, x_i, K_i) in ``items``.

    Built one action at a time: the word found so far is extended by an
    escape word for the next action, starting with the reverse of its last
    edge (or the same loop), so the earlier escapes are not undone.
    """
    p, x, K = items[0]
    g = p.g
    s = p.orbits[p.member(x, p.types(x)[0])[0]].type
    word = escape_word(p, x, K, g.out_edges(s)[0], 0)
    for j in range(1, len(items)):
        p, x, K = items[j]
        ext = extract(p)
        if _target(p, ext, x, word) not in K and _target(p, ext, x, word) is not None:
            continue
        last = word.path[-1]
        e, g0 = (last, 0) if g.is_loop(last) else (last ^ 1, 1)
        start = p.evaluate(x, to_group_word(word, g, p.tree))
        if start is None:
            raise EscapeError(f"escape word undefined on action {j}")
        more = escape_word(p, start, K, e, g0)
        word = concat_typed(word, more, g)
    for j, (p, x, K) in enumerate(items):
        t = _target(p, extract(p), x, word)
        if t is None:
            raise EscapeError(f"escape word undefined on action {j}")
        if t in K:
            raise EscapeError(f"escape word returns into K for action {j}")
    if not is_reduced_typed(word, g):
        raise EscapeError("escape word is not reduced")
    return word


def check_backtrack(p, x, word, first=None):
    """Whether the edge path read from x along the typed word is reduced."""
    if not word.path:
        return True
    ext = extract(p)
    path = path_of(p, ext, x, word)
    if path is None:
        return False
    if first is not None and path[0] != first:
        return False
    return _is_reduced_path(path)
