"""Labeled graphs of orbits: extraction, validation, realization, completion."""

from collections import Counter

from .arith import INF, egcd, transfer_ok, far_size, phenotype, mul, parse_extnat
from .core import GbsError, OrientedGraph, Violation, classify
from .preaction import Preaction, disjoint_union


class HGraph:
    """Vertices carry (type, size); edges carry a positive edge type of the graph.

    An edge ``(e, V, W)`` of type e runs from V to W; its reverse, of type
    ``e ^ 1``, is implicit.
    """

    def __init__(self, g):
        self.g = g
        self.vertices = {}
        self.edges = {}
        self._next = {}

    def copy(self):
        h = HGraph(self.g)
        h.vertices = dict(self.vertices)
        h.edges = dict(self.edges)
        return h

    def _fresh(self, table):
        """Next free id of a table that has only grown since it was last seen."""
        known = self._next.get(id(table))
        if known is not None and known[0] == len(table):
            return known[1]
        return max(table, default=-1) + 1

    def _taken(self, table, i, nxt):
        self._next[id(table)] = (len(table), max(nxt, i + 1))

    def add_vertex(self, s, size, vid=None):
        nxt = self._fresh(self.vertices)
        if vid is None:
            vid = nxt
        self.vertices[vid] = (s, size)
        self._taken(self.vertices, vid, nxt)
        return vid

    def add_edge(self, f, v, w, eid=None):
        """Add an edge of type f (either orientation) from v to w."""
        if f % 2:
            f, v, w = f ^ 1, w, v
        nxt = self._fresh(self.edges)
        if eid is None:
            eid = nxt
        self.edges[eid] = (f, v, w)
        self._taken(self.edges, eid, nxt)
        return eid

    def type(self, v):
        return self.vertices[v][0]

    def size(self, v):
        return self.vertices[v][1]

    def counts(self):
        c = Counter()
        for e, v, w in self.edges.values():
            c[(v, e)] += 1
            c[(w, e ^ 1)] += 1
        return c

    def neighbors(self, v):
        """(oriented edge, other end) pairs leaving v; oriented edge = (eid, 0|1)."""
        out = []
        for eid, (e, a, b) in sorted(self.edges.items()):
            if a == v:
                out.append(((eid, 0), b))
            if b == v:
                out.append(((eid, 1), a))
        return out

    def oriented(self):
        src, trg, rev = {}, {}, {}
        for eid, (_, a, b) in self.edges.items():
            src[2 * eid], trg[2 * eid] = a, b
            src[2 * eid + 1], trg[2 * eid + 1] = b, a
            rev[2 * eid], rev[2 * eid + 1] = 2 * eid + 1, 2 * eid
        return OrientedGraph(self.vertices, src, trg, rev, {2 * e for e in self.edges})

    def is_connected(self):
        return self.oriented().is_connected()

    def betti(self):
        return self.oriented().betti()

    def induced(self, vids):
        vids = set(vids)
        h = HGraph(self.g)
        h.vertices = {v: self.vertices[v] for v in vids}
        h.edges = {i: x for i, x in self.edges.items() if x[1] in vids and x[2] in vids}
        return h

    def __repr__(self):
        return f"HGraph({len(self.vertices)} vertices, {len(self.edges)} edges)"


def validate_hgraph(h):
    g = h.g
    for v, (s, n) in sorted(h.vertices.items()):
        if s not in g.vertices:
            return Violation("unknown-type", v)
        if n is not INF and n < 1:
            return Violation("size", v)
    for eid, (e, a, b) in sorted(h.edges.items()):
        if e % 2 or e not in g.positive_edges():
            return Violation("edge-type", eid)
        if a not in h.vertices or b not in h.vertices:
            return Violation("unknown-endpoint", eid)
        if h.type(a) != g.src(e) or h.type(b) != g.trg(e):
            return Violation("endpoint-types", eid)
        if not transfer_ok(h.size(a), g.ksrc(e), h.size(b), g.ktrg(e)):
            return Violation("transfer", eid)
    for (v, f), c in sorted(h.counts().items()):
        if c > egcd(h.size(v), g.ksrc(f)):
            return Violation("count", (v, f))
    return None


def saturation(h):
    """Deficit per (vertex, edge leaving its type), both orientations."""
    g = h.g
    c = h.counts()
    out = {}
    for v, (s, n) in sorted(h.vertices.items()):
        for f in g.out_edges(s):
            out[(v, f)] = egcd(n, g.ksrc(f)) - c[(v, f)]
    return out


def is_saturated(h):
    return all(d == 0 for d in saturation(h).values())


# ---------------------------------------------------------------- extraction

def edge_key(p, x, f):
    """Key of the graph edge of type f deriving from x, and whether it is reversed."""
    g = p.g
    e = f & ~1
    if f % 2:
        z = x if e in p.tree else p.tau_image(x, f)
        if z is None:
            return None
    else:
        z = x
    m = p.member(z, g.src(e))
    if m is None:
        return None
    if e in p.tree and not p.in_domain(z, g.trg(e)):
        return None
    if e not in p.tree and p.tau_image(z, e) is None:
        return None
    o, off = m
    return (e, o, off % egcd(p.orbits[o].size, g.ksrc(e))), f % 2


class Extraction:
    """The graph of a preaction plus where each vertex and edge comes from."""

    def __init__(self, h, vertex_point, edge_point, edge_ids):
        self.h = h
        self.vertex_point = vertex_point
        self.edge_point = edge_point
        self.edge_ids = edge_ids

    def vertex_of(self, p, x, s):
        m = p.member(x, s)
        return None if m is None else m[0]

    def edge_of(self, p, x, f):
        key = edge_key(p, x, f)
        if key is None:
            return None
        return self.edge_ids[key[0]], key[1]


def extract(p):
    g = p.g
    h = HGraph(g)
    vpt, ept, ids = {}, {}, {}
    for o in sorted(p.orbits):
        h.add_vertex(p.orbits[o].type, p.orbits[o].size, o)
        vpt[o] = p.point(o, 0)
    for e in g.positive_edges():
        k = g.ksrc(e)
        if e in p.tree:
            for o in sorted(p.orbits):
                if p.orbits[o].type != g.src(e):
                    continue
                for r in range(egcd(p.orbits[o].size, k)):
                    m = p.member((o, r), g.trg(e))
                    if m is not None:
                        eid = h.add_edge(e, o, m[0])
                        ids[(e, o, r)] = eid
                        ept[eid] = p.point(o, r)
        else:
            for o1, a, o2, b in p.taus[e]:
                r = a % egcd(p.orbits[o1].size, k)
                eid = h.add_edge(e, o1, o2)
                ids[(e, o1, r)] = eid
                ept[eid] = p.point(o1, a)
    return Extraction(h, vpt, ept, ids)


def path_of(p, ext, x, word):
    """Oriented graph edges crossed while reading a typed word from x."""
    g = p.g
    out = []
    x = p.apply(x, ("a", word.vertex, word.powers[0]))
    for i, f in enumerate(word.path):
        if x is None:
            return None
        step = ext.edge_of(p, x, f)
        if step is None:
            return None
        out.append(step)
        if f & ~1 not in p.tree:
            x = p.tau_image(x, f)
        x = p.apply(x, ("a", g.trg(f), word.powers[i + 1]))
    return out


# ---------------------------------------------------------------- realization

def _free_offset(p, o, f):
    """Smallest offset of orbit o where the edge type f can still be attached."""
    g = p.g
    n = p.orbits[o].size
    e = f & ~1
    for r in range(egcd(n, g.ksrc(f))):
        x = p.point(o, r)
        if e in p.tree:
            if not p.in_domain(x, g.trg(f)):
                return x
        elif p.tau_image(x, f) is None:
            return x
    raise GbsError(f"orbit {o} has no room for an edge of type {f}")


def attach(p, e, o1, o2):
    """Add one graph edge of type e between orbits o1 and o2 (a stable letter or a gluing)."""
    x = _free_offset(p, o1, e)
    y = _free_offset(p, o2, e ^ 1)
    if e & ~1 in p.tree:
        p.glue(e, x, y)
    else:
        p.add_tau(e, x, y)


def realize_finite(h, tree):
    err = validate_hgraph(h)
    if err:
        raise GbsError(f"invalid graph: {err}")
    p = Preaction(h.g, tree)
    for v in sorted(h.vertices):
        p.add_orbit(h.type(v), h.size(v), v)
    for eid in sorted(h.edges):
        e, a, b = h.edges[eid]
        attach(p, e, a, b)
    return p


def quotient(h, parts):
    """Collapse each vertex set of ``parts`` to one vertex (named ('part', i))."""
    where = {}
    for i, part in enumerate(parts):
        for v in part:
            if v in where:
                raise GbsError("overlapping parts")
            where[v] = ("part", i)
    og = h.oriented() if isinstance(h, HGraph) else h
    verts = {where.get(v, v) for v in og.vertices}
    src, trg, rev, pos = {}, {}, {}, set()
    for e in og.src:
        a, b = og.src[e], og.trg[e]
        if a in where and b in where and where[a] == where[b]:
            continue
        src[e], trg[e], rev[e] = where.get(a, a), where.get(b, b), og.rev[e]
        if e in og.positive:
            pos.add(e)
    return OrientedGraph(verts, src, trg, rev, pos)


def realize_extending(h, tree, parts):
    """Realize h so that it extends the given preactions.

    ``parts`` is a list of ``(preaction, vmap)`` where vmap sends each orbit of
    the preaction to the vertex of h it becomes; the edges of the part's own
    graph are matched by type and endpoints. Returns the preaction and, per
    part, the orbit renaming into it.
    """
    used = set()
    for _, vmap in parts:
        if len(set(vmap.values())) != len(vmap) or used & set(vmap.values()):
            raise GbsError("embedding not injective")
        used |= set(vmap.values())
    q = quotient(h, [set(vmap.values()) for _, vmap in parts])
    if not q.is_tree():
        raise GbsError("quotient is not a tree")
    p = Preaction(h.g, tree)
    renames = []
    for part, vmap in parts:
        p, ren = disjoint_union(p, part)
        renames.append(ren)
    orbit_of = {}
    covered = Counter()
    for (part, vmap), ren in zip(parts, renames):
        for o, v in vmap.items():
            orbit_of[v] = ren[o]
        sub = extract(part).h
        for e, a, b in sub.edges.values():
            covered[(e, vmap[a], vmap[b])] += 1
    for v in sorted(h.vertices):
        if v not in orbit_of:
            orbit_of[v] = p.add_orbit(h.type(v), h.size(v))
        elif (p.orbits[orbit_of[v]].type, p.orbits[orbit_of[v]].size) != h.vertices[v]:
            raise GbsError(f"vertex {v} label does not match the embedded orbit")
    for eid in sorted(h.edges):
        e, a, b = h.edges[eid]
        if covered[(e, a, b)]:
            covered[(e, a, b)] -= 1
            continue
        attach(p, e, orbit_of[a], orbit_of[b])
    return p, renames, orbit_of


# ---------------------------------------------------------------- completion

def complete_to_depth(h, d, only=None):
    """Fill every deficit for ``d`` rounds with fresh vertices of canonical size.

    With ``only``, the first round fills just those vertices; later rounds
    fill the vertices added since.
    """
    g = h.g
    h = h.copy()
    for _ in range(d):
        frontier = sorted(h.vertices) if only is None else sorted(only)
        before = set(h.vertices)
        c = h.counts()
        for v in frontier:
            s, n = h.vertices[v]
            for f in g.out_edges(s):
                for _ in range(egcd(n, g.ksrc(f)) - c[(v, f)]):
                    w = h.add_vertex(g.trg(f), far_size(n, g.ksrc(f), g.ktrg(f)))
                    h.add_edge(f, v, w)
        if only is not None:
            only = set(h.vertices) - before
    return h


def hgraph_phenotype(h, s):
    for _ in range(len(h.g.vertices) + 1):
        for v in sorted(h.vertices):
            if h.type(v) == s:
                return phenotype(h.g, s, h.size(v))
        h = complete_to_depth(h, 1)
    raise GbsError(f"no vertex of type {s}")


# ---------------------------------------------------------------- gadgets

def _other_edge(g, e, at):
    """Another edge leaving ``at`` (not e or its reverse), loops first."""
    cands = [f for f in g.out_edges(at) if f & ~1 != e & ~1]
    cands.sort(key=lambda f: (not g.is_loop(f), f))
    return cands[0] if cands else None


def gadget(g, e, N):
    """A small non-simply-connected graph around a vertex (src(e), N).

    Vertex 0 of the result is that vertex; it and at least one other vertex
    are not saturated.
    """
    if classify(g).amenable:
        raise GbsError("amenable group")
    k, l = g.ksrc(e), g.ktrg(e)
    s, t = g.src(e), g.trg(e)
    h = HGraph(g)

    def vx(typ, size):
        return h.add_vertex(typ, size)

    if not g.is_loop(e):
        if N is not INF and N % k:
            raise GbsError("divisibility: the source label must divide N")
        if abs(l) > 2:
            # the two extra source vertices have size N|k|/(N^k), divisible by k
            V, W, X, Y, Z = (vx(s, N), vx(t, far_size(N, k, l)), vx(s, far_size(N, k, k)),
                             vx(s, far_size(N, k, k)), vx(t, far_size(N, k, l)))
            for a, b in ((V, W), (X, W), (Y, W), (X, Z), (Y, Z)):
                h.add_edge(e, a, b)
            return h
        if abs(k) > 2:
            M = far_size(N, k, l)
            V, X, Y, Z = vx(s, N), vx(t, M), vx(t, M), vx(s, N)
            for a, b in ((V, X), (V, Y), (Z, X), (Z, Y)):
                h.add_edge(e, a, b)
            return h
        f = _other_edge(g, e, s)
        if f is not None:
            m, n = g.ksrc(f), g.ktrg(f)
            if not g.is_loop(f):
                V, W = vx(s, N), vx(t, far_size(N, k, l))
                X, Y = vx(g.trg(f), far_size(N, m, n)), vx(s, N)
                h.add_edge(e, V, W)
                h.add_edge(f, V, X)
                h.add_edge(e, Y, W)
                h.add_edge(f, Y, X)
                return h
            M = far_size(N, m, n)
            U, V = vx(s, N), vx(s, M)
            X, W = vx(t, far_size(M, k, l)), vx(t, far_size(N, k, l))
            Y, Z = vx(s, N), vx(s, M)
            h.add_edge(f, U, V)
            h.add_edge(e, V, X)
            h.add_edge(e, U, W)
            h.add_edge(f, Y, Z)
            h.add_edge(e, Z, X)
            h.add_edge(e, Y, W)
            return h
        f = _other_edge(g, e, t)
        if f is None:
            raise GbsError("no auxiliary edge")
        M = far_size(N, k, l)
        m, n = g.ksrc(f), g.ktrg(f)
        if not g.is_loop(f):
            V, A, C, B = vx(s, N), vx(t, M), vx(t, M), vx(s, N)
            X = vx(g.trg(f), far_size(M, m, n))
            h.add_edge(e, V, A)
            h.add_edge(e, B, A)
            h.add_edge(e, B, C)
            h.add_edge(f, A, X)
            h.add_edge(f, C, X)
            return h
        M2 = far_size(M, m, n)
        V0, U, V1 = vx(s, N), vx(t, M), vx(t, M2)
        X, W = vx(s, far_size(M2, l, k)), vx(s, far_size(M, l, k))
        Y, Z = vx(t, M), vx(t, M2)
        h.add_edge(e, V0, U)
        h.add_edge(f, U, V1)
        h.add_edge(e, X, V1)
        h.add_edge(e, W, U)
        h.add_edge(f, Y, Z)
        h.add_edge(e, X, Z)
        h.add_edge(e, W, Y)
        return h
    if min(abs(k), abs(l)) >= 2:
        M = far_size(N, k, l)
        V, W, Y, X, Z = vx(s, N), vx(s, M), vx(s, far_size(M, k, l)), vx(s, far_size(N, k, k)), vx(s, M)
        for a, b in ((V, W), (W, Y), (X, W), (X, Z), (Z, Y)):
            h.add_edge(e, a, b)
        return h
    if abs(k) != 1:
        e, k, l = e ^ 1, l, k
    f = _other_edge(g, e, s)
    if f is None:
        raise GbsError("no auxiliary edge")
    if not g.is_loop(f) or min(abs(g.ksrc(f)), abs(g.ktrg(f))) >= 2:
        return gadget(g, f, N)
    if abs(g.ksrc(f)) != 1:
        f ^= 1
    n = g.ktrg(f)
    V, W, X, Y = vx(s, N), vx(s, mul(N, abs(l))), vx(s, mul(N, abs(n))), vx(s, mul(N, abs(l * n)))
    h.add_edge(e, V, W)
    h.add_edge(f, V, X)
    h.add_edge(f, W, Y)
    h.add_edge(e, X, Y)
    return h


# ---------------------------------------------------------------- isomorphism

def _refine(h):
    color = {v: (h.vertices[v][0], repr(h.vertices[v][1])) for v in h.vertices}
    nb = {v: [] for v in h.vertices}
    for e, a, b in h.edges.values():
        nb[a].append((e, 0, b))
        nb[b].append((e, 1, a))
    for _ in range(len(h.vertices)):
        new = {v: (color[v], tuple(sorted((e, d, color[w]) for e, d, w in nb[v])))
               for v in h.vertices}
        names = {c: i for i, c in enumerate(sorted(set(new.values()), key=repr))}
        new = {v: names[new[v]] for v in h.vertices}
        if len(set(new.values())) == len(set(color.values())):
            color = new
            break
        color = new
    return color


def labeled_iso(h1, h2):
    """A label- and orientation-preserving isomorphism h1 -> h2, or None.

    Returns ``(vertex map, edge map)``.
    """
    if len(h1.vertices) != len(h2.vertices) or len(h1.edges) != len(h2.edges):
        return None
    if Counter(h1.vertices.values()) != Counter(h2.vertices.values()):
        return None
    if Counter(x[0] for x in h1.edges.values()) != Counter(x[0] for x in h2.edges.values()):
        return None
    # refine both graphs jointly so colors are comparable
    joint = HGraph(h1.g)
    for v, lab in h1.vertices.items():
        joint.vertices[(1, v)] = lab
    for v, lab in h2.vertices.items():
        joint.vertices[(2, v)] = lab
    for i, (e, a, b) in h1.edges.items():
        joint.edges[(1, i)] = (e, (1, a), (1, b))
    for i, (e, a, b) in h2.edges.items():
        joint.edges[(2, i)] = (e, (2, a), (2, b))
    color = _refine(joint)
    c1 = Counter(color[(1, v)] for v in h1.vertices)
    c2 = Counter(color[(2, v)] for v in h2.vertices)
    if c1 != c2:
        return None
    mult1, mult2 = Counter(), Counter()
    for e, a, b in h1.edges.values():
        mult1[(a, b, e)] += 1
    for e, a, b in h2.edges.values():
        mult2[(a, b, e)] += 1
    adj1 = {v: set() for v in h1.vertices}
    for e, a, b in h1.edges.values():
        adj1[a].add(b)
        adj1[b].add(a)
    # visit vertices so that each one has an already-mapped neighbor if possible
    order = []
    seen = set()
    for start in sorted(h1.vertices, key=lambda v: (c1[color[(1, v)]], v)):
        if start in seen:
            continue
        stack = [start]
        seen.add(start)
        while stack:
            v = stack.pop(0)
            order.append(v)
            for w in sorted(adj1[v]):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
    by_color = {}
    for v in sorted(h2.vertices):
        by_color.setdefault(color[(2, v)], []).append(v)
    loops1 = {v: Counter(e for e, a, b in h1.edges.values() if a == b == v) for v in h1.vertices}
    loops2 = {v: Counter(e for e, a, b in h2.edges.values() if a == b == v) for v in h2.vertices}
    vmap, used = {}, set()

    def consistent(v, w):
        if loops1[v] != loops2[w]:
            return False
        for u in adj1[v]:
            if u in vmap and u != v:
                x = vmap[u]
                for e in {t for t, a, b in h1.edges.values()}:
                    if mult1[(v, u, e)] != mult2[(w, x, e)] or mult1[(u, v, e)] != mult2[(x, w, e)]:
                        return False
        return True

    def search(i):
        if i == len(order):
            return True
        v = order[i]
        for w in by_color[color[(1, v)]]:
            if w in used or not consistent(v, w):
                continue
            vmap[v] = w
            used.add(w)
            if search(i + 1):
                return True
            del vmap[v]
            used.discard(w)
        return False

    if not search(0):
        return None
    # also make sure no edge of h2 between mapped vertices is missing in h1
    img = Counter((vmap[a], vmap[b], e) for e, a, b in h1.edges.values())
    if img != mult2:
        return None
    pool = {}
    for i, (e, a, b) in sorted(h2.edges.items()):
        pool.setdefault((e, a, b), []).append(i)
    emap = {}
    for i, (e, a, b) in sorted(h1.edges.items()):
        emap[i] = pool[(e, vmap[a], vmap[b])].pop(0)
    return vmap, emap


# ---------------------------------------------------------------- text formats

def dumps(h):
    g = h.g
    lines = [f"hvertex {v} {g.vertex_names[s]} {n}" for v, (s, n) in sorted(h.vertices.items())]
    lines += [f"hedge {i} {g.edge_names[e]} {a} {b}" for i, (e, a, b) in sorted(h.edges.items())]
    return "\n".join(lines) + "\n"


def loads(text, g):
    vnames = {name: v for v, name in g.vertex_names.items()}
    enames = {name: e for e, name in g.edge_names.items()}
    h = HGraph(g)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#")[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "hvertex" and len(tok) == 4:
                vid = int(tok[1])
                if vid in h.vertices:
                    raise ValueError(f"duplicate vertex {vid}")
                h.add_vertex(vnames[tok[2]], parse_extnat(tok[3]), vid)
            elif tok[0] == "hedge" and len(tok) == 5:
                eid = int(tok[1])
                if eid in h.edges:
                    raise ValueError(f"duplicate edge {eid}")
                a, b = int(tok[3]), int(tok[4])
                if a not in h.vertices or b not in h.vertices:
                    raise ValueError("edge endpoint must be declared first")
                h.add_edge(enames[tok[2]], a, b, eid)
            elif tok[0] in ("vertex", "edge"):
                continue
            else:
                raise ValueError(f"unrecognized line {line!r}")
        except (KeyError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return h


def to_dot(h, name="H"):
    g = h.g
    out = [f"digraph {name} {{"]
    for v, (s, n) in sorted(h.vertices.items()):
        out.append(f'  v{v} [label="({g.vertex_names[s]},{n})"];')
    for i, (e, a, b) in sorted(h.edges.items()):
        out.append(f'  v{a} -> v{b} [label="{g.edge_names[e]}"];')
    out.append("}")
    return "\n".join(out) + "\n"
