"""Oriented graphs with an edge involution, and labeled graphs of cyclic groups.

Positive edge number i gets id 2*i and its reverse gets 2*i + 1, so the
involution is ``e ^ 1`` everywhere in the package.
"""

from collections import deque
from dataclasses import dataclass
from fractions import Fraction


class GbsError(Exception):
    """Domain error (bad input to an operation, violated precondition)."""


def bar(e):
    return e ^ 1


def is_positive(e):
    return e % 2 == 0


class OrientedGraph:
    """Plain oriented graph where the involution is stored explicitly.

    Only used where a graph may be malformed (validation) or where it does not
    come with labels (quotients).
    """

    def __init__(self, vertices, src, trg, rev, positive):
        self.vertices = set(vertices)
        self.src = dict(src)
        self.trg = dict(trg)
        self.rev = dict(rev)
        self.positive = set(positive)

    @property
    def edges(self):
        return sorted(self.src)

    def is_forest(self):
        parent = {v: v for v in self.vertices}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in sorted(self.positive):
            a, b = find(self.src[e]), find(self.trg[e])
            if a == b:
                return False
            parent[a] = b
        return True

    def is_connected(self):
        if not self.vertices:
            return False
        adj = {v: [] for v in self.vertices}
        for e in self.src:
            adj[self.src[e]].append(self.trg[e])
        start = min(self.vertices, key=repr)
        seen = {start}
        todo = [start]
        while todo:
            v = todo.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return len(seen) == len(self.vertices)

    def is_tree(self):
        return self.is_connected() and self.is_forest()

    def betti(self):
        """First Betti number of the underlying graph, counting components."""
        parent = {v: v for v in self.vertices}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        comps = len(self.vertices)
        for e in self.positive:
            a, b = find(self.src[e]), find(self.trg[e])
            if a != b:
                parent[a] = b
                comps -= 1
        return len(self.positive) - len(self.vertices) + comps


@dataclass(frozen=True)
class Violation:
    kind: str
    witness: object

    def __str__(self):
        return f"{self.kind} at {self.witness!r}"


def validate_graph(g):
    """Return None if ``g`` is a legal oriented graph, else the first Violation."""
    for e in sorted(g.src, key=repr):
        if e not in g.trg or e not in g.rev:
            return Violation("incomplete-edge", e)
        if g.src[e] not in g.vertices or g.trg[e] not in g.vertices:
            return Violation("unknown-vertex", e)
        r = g.rev[e]
        if r == e:
            return Violation("fixed-point", e)
        if r not in g.rev or g.rev[r] != e:
            return Violation("involution", e)
        if g.src[r] != g.trg[e] or g.trg[r] != g.src[e]:
            return Violation("involution-endpoints", e)
        if (e in g.positive) == (r in g.positive):
            return Violation("orientation", e)
    return None


class GbsGraph:
    """Finite connected graph with nonzero integer labels on half-edges.

    ``edges`` maps a positive edge id (even) to ``(src, trg, k_src, k_trg)``.
    Vertex and edge ids need not be dense: sub-graphs keep the ids of the
    ambient graph so that words and preactions can be shared between them.
    """

    def __init__(self, vertices, edges, vertex_names=None, edge_names=None):
        self.vertices = tuple(sorted(vertices))
        if not self.vertices:
            raise GbsError("empty graph")
        self._pos = {}
        for e, (s, t, k, l) in edges.items():
            if e % 2:
                raise GbsError(f"positive edge ids must be even, got {e}")
            if s not in self.vertices or t not in self.vertices:
                raise GbsError(f"edge {e} has an unknown endpoint")
            if k == 0 or l == 0:
                raise GbsError(f"edge {e} has a zero label")
            self._pos[e] = (s, t, int(k), int(l))
        self.vertex_names = dict(vertex_names or {v: str(v) for v in self.vertices})
        self.edge_names = dict(edge_names or {e: f"e{e // 2}" for e in self._pos})
        self._out = {v: [] for v in self.vertices}
        for e in self.edges():
            self._out[self.src(e)].append(e)
        self.cache = {}
        if not self.oriented().is_connected():
            raise GbsError("graph is not connected")

    @classmethod
    def from_list(cls, n, edge_list):
        """Build from ``n`` vertices and a list of ``(src, trg, k_src, k_trg)``."""
        return cls(range(n), {2 * i: tuple(x) for i, x in enumerate(edge_list)})

    def positive_edges(self):
        return sorted(self._pos)

    def edges(self):
        out = []
        for e in sorted(self._pos):
            out += [e, e + 1]
        return out

    def src(self, e):
        s, t, _, _ = self._pos[e & ~1]
        return t if e & 1 else s

    def trg(self, e):
        s, t, _, _ = self._pos[e & ~1]
        return s if e & 1 else t

    def ksrc(self, e):
        _, _, k, l = self._pos[e & ~1]
        return l if e & 1 else k

    def ktrg(self, e):
        _, _, k, l = self._pos[e & ~1]
        return k if e & 1 else l

    def is_loop(self, e):
        return self.src(e) == self.trg(e)

    def out_edges(self, v):
        """All edges (both orientations) whose source is v, by id."""
        return self._out[v]

    def edge_name(self, e):
        name = self.edge_names[e & ~1]
        return name + "~" if e & 1 else name

    def oriented(self):
        src = {e: self.src(e) for e in self.edges()}
        trg = {e: self.trg(e) for e in self.edges()}
        rev = {e: e ^ 1 for e in self.edges()}
        return OrientedGraph(self.vertices, src, trg, rev, self._pos)

    def subgraph(self, vertices, positive_edges):
        vertices = set(vertices)
        edges = {e: self._pos[e] for e in positive_edges}
        return GbsGraph(vertices, edges,
                        {v: self.vertex_names[v] for v in vertices},
                        {e: self.edge_names[e] for e in edges})

    def without_edge(self, e):
        e &= ~1
        return self.subgraph(self.vertices, [f for f in self._pos if f != e])

    def without_vertex(self, v):
        keep = [f for f in self._pos if v not in self._pos[f][:2]]
        return self.subgraph([w for w in self.vertices if w != v], keep)

    def __eq__(self, other):
        return (isinstance(other, GbsGraph) and self.vertices == other.vertices
                and self._pos == other._pos)

    def __hash__(self):
        return hash((self.vertices, tuple(sorted(self._pos.items()))))

    def __repr__(self):
        return f"GbsGraph({list(self.vertices)}, {self._pos})"


def loop_graph(k, l):
    return GbsGraph.from_list(1, [(0, 0, k, l)])


def segment_graph(k, l):
    return GbsGraph.from_list(2, [(0, 1, k, l)])


def spanning_tree(g, root=None):
    """Breadth-first spanning tree, ties broken by smallest edge id.

    Returned as a frozenset containing both orientations of each tree edge.
    """
    if root is None:
        root = g.vertices[0]
    seen = {root}
    tree = set()
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for e in g.out_edges(v):
            w = g.trg(e)
            if w not in seen:
                seen.add(w)
                tree.update((e, e ^ 1))
                queue.append(w)
    if len(seen) != len(g.vertices):
        raise GbsError("graph is not connected")
    return frozenset(tree)


def tree_path(g, tree, u, v):
    """The unique reduced path from u to v using only edges of ``tree``."""
    prev = {u: None}
    queue = deque([u])
    while queue:
        x = queue.popleft()
        if x == v:
            break
        for e in g.out_edges(x):
            if e in tree and g.trg(e) not in prev:
                prev[g.trg(e)] = e
                queue.append(g.trg(e))
    if v not in prev:
        raise GbsError(f"no tree path from {u} to {v}")
    path = []
    while v != u:
        e = prev[v]
        path.append(e)
        v = g.src(e)
    return path[::-1]


def is_reduced(g):
    return all(g.is_loop(e) for e in g.positive_edges()
               if abs(g.ksrc(e)) == 1 or abs(g.ktrg(e)) == 1)


def simple_paths_from(g, v):
    """Every simple edge path based at v, as tuples of edge ids.

    A path is simple when it has length 1, or when it is reduced, its sources
    are pairwise distinct and its endpoint is not the source of any edge but
    possibly the first.
    """
    out = []

    def extend(path, sources):
        end = g.trg(path[-1])
        if end in sources:
            return
        for e in g.out_edges(end):
            if e == path[-1] ^ 1:
                continue
            t = g.trg(e)
            if t in sources[1:] or t == end:
                continue
            p = path + (e,)
            out.append(p)
            extend(p, sources + (end,))

    for e in g.out_edges(v):
        out.append((e,))
        if not g.is_loop(e):
            extend((e,), (v,))
    return out


def is_cycle(g, path):
    return len(path) > 0 and g.trg(path[-1]) == g.src(path[0])


def simple_cycles(g):
    return [p for v in g.vertices for p in simple_paths_from(g, v) if is_cycle(g, p)]


def modular_value(g, cycle):
    cycle = list(cycle)
    if cycle:
        for a, b in zip(cycle, cycle[1:]):
            if g.trg(a) != g.src(b):
                raise GbsError("not an edge path")
        if not is_cycle(g, cycle):
            raise GbsError("path is not a cycle")
    value = Fraction(1)
    for e in cycle:
        value *= Fraction(g.ksrc(e), g.ktrg(e))
    return value


def is_unimodular(g):
    for c in simple_cycles(g):
        num = den = 1
        for e in c:
            num *= g.ksrc(e)
            den *= g.ktrg(e)
        if abs(num) != abs(den):
            return False
    return True


@dataclass(frozen=True)
class GroupClass:
    kind: str
    n: int | None = None

    def __str__(self):
        return f"{self.kind} n={self.n}" if self.n is not None else self.kind

    @property
    def amenable(self):
        return self.kind == "AmenableBS1n"


def classify(g):
    if not is_reduced(g):
        raise GbsError("graph is not reduced")
    pos = g.positive_edges()
    if len(pos) == 0:
        # a single vertex group: Z = BS(1,1)
        return GroupClass("AmenableBS1n", 1)
    if len(pos) == 1:
        e = pos[0]
        k, l = g.ksrc(e), g.ktrg(e)
        if g.is_loop(e) and (abs(k) == 1 or abs(l) == 1):
            return GroupClass("AmenableBS1n", k * l)
        if not g.is_loop(e) and abs(k) == 2 and abs(l) == 2:
            return GroupClass("AmenableBS1n", -1)
    if is_unimodular(g):
        return GroupClass("UnimodularNonAmenable")
    return GroupClass("NonUnimodularNonAmenable")


# ---------------------------------------------------------------- text format

def parse_graph(text):
    """Read ``vertex <name>`` and ``edge <name> <src> <trg> <k_src> <k_trg>`` lines.

    Blank lines and ``#`` comments are ignored. Raises ValueError on any
    malformed line, duplicate name or zero label.
    """
    vids, edges, enames = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#")[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "vertex" and len(tok) == 2:
            if tok[1] in vids:
                raise ValueError(f"line {lineno}: duplicate vertex {tok[1]!r}")
            vids[tok[1]] = len(vids)
        elif tok[0] == "edge" and len(tok) == 6:
            name, s, t = tok[1:4]
            if name in enames.values():
                raise ValueError(f"line {lineno}: duplicate edge {name!r}")
            if s not in vids or t not in vids:
                raise ValueError(f"line {lineno}: unknown endpoint")
            try:
                k, l = int(tok[4]), int(tok[5])
            except ValueError:
                raise ValueError(f"line {lineno}: labels must be integers") from None
            if k == 0 or l == 0:
                raise ValueError(f"line {lineno}: zero label")
            e = 2 * len(edges)
            edges[e] = (vids[s], vids[t], k, l)
            enames[e] = name
        else:
            raise ValueError(f"line {lineno}: unrecognized line {line!r}")
    if not vids:
        raise ValueError("no vertices")
    try:
        return GbsGraph(vids.values(), edges, {v: n for n, v in vids.items()}, enames)
    except GbsError as exc:
        raise ValueError(str(exc)) from None


def dump_graph(g):
    lines = [f"vertex {g.vertex_names[v]}" for v in g.vertices]
    for e in g.positive_edges():
        lines.append(f"edge {g.edge_names[e]} {g.vertex_names[g.src(e)]} "
                     f"{g.vertex_names[g.trg(e)]} {g.ksrc(e)} {g.ktrg(e)}")
    return "\n".join(lines) + "\n"
