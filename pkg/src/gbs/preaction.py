"""Partial actions of a GBS group built from cyclic orbits glued by rules.

Every vertex generator a_s acts as +1 on each of its orbits, so the carrier
is a set of named orbits ``(orbit id, offset)`` modulo identifications.
Two kinds of rules describe the rest:

* an identification ``(O1, a, p, O2, b, q)`` says that ``(O1, a + p*j)`` and
  ``(O2, b + q*j)`` are the same point for every integer j (``p = q = 0``
  glues a single pair of points);
* a stable-letter rule ``(O1, a, O2, b)`` for a positive non-tree edge e
  sends ``(O1, a + k*j)`` to ``(O2, b + l*j)`` where (k, l) are the labels
  of e; the reverse edge uses the same rule backwards.

A point is named by the smallest ``(orbit, offset)`` of its class.
"""

from collections import deque
from dataclasses import dataclass

from .arith import INF, egcd, transfer_ok
from .core import GbsError, tree_path

VALIDATION_CAP = 512
RULE_WINDOW = 12


@dataclass(frozen=True)
class Orbit:
    type: int
    size: object


class Preaction:
    def __init__(self, g, tree):
        self.g = g
        self.tree = frozenset(tree)
        self.orbits = {}
        self.idents = []
        self.taus = {e: [] for e in g.positive_edges() if e not in self.tree}
        self._ident_at = {}
        self._tau_at = {}
        self._classes = {}

    # ------------------------------------------------------------ building

    def copy(self):
        q = Preaction(self.g, self.tree)
        q.orbits = dict(self.orbits)
        q.idents = list(self.idents)
        q.taus = {e: list(r) for e, r in self.taus.items()}
        q._ident_at = {o: list(r) for o, r in self._ident_at.items()}
        q._tau_at = {k: list(r) for k, r in self._tau_at.items()}
        return q

    def _touch(self):
        self._classes.clear()

    def add_orbit(self, s, size, oid=None):
        if size is not INF and size < 1:
            raise GbsError(f"orbit size must be positive, got {size}")
        if s not in self.g.vertices:
            raise GbsError(f"unknown vertex {s}")
        if oid is None:
            oid = max(self.orbits, default=-1) + 1
        if oid in self.orbits:
            raise GbsError(f"orbit {oid} already exists")
        self.orbits[oid] = Orbit(s, size)
        self._touch()
        return oid

    def _add_ident(self, rule):
        i = len(self.idents)
        self.idents.append(rule)
        self._ident_at.setdefault(rule[0], []).append((i, 0))
        self._ident_at.setdefault(rule[3], []).append((i, 1))
        self._touch()

    def _add_tau(self, e, rule):
        self.taus[e].append(rule)
        o1, a, o2, b = rule
        self._tau_at.setdefault((e, o1), []).append((a, o2, b))
        self._tau_at.setdefault((e ^ 1, o2), []).append((b, o1, a))
        self._touch()

    # ------------------------------------------------------------ points

    def norm(self, o, x):
        n = self.orbits[o].size
        return (o, x) if n is INF else (o, x % n)

    def _partner(self, o, x, a, p, o2, b, q):
        """Image of (o, x) under the affine correspondence a+p*j -> b+q*j."""
        n = self.orbits[o].size
        if p == 0:
            hit = (x == a) if n is INF else (x - a) % n == 0
            return self.norm(o2, b) if hit else None
        if n is INF:
            if (x - a) % p:
                return None
            j = (x - a) // p
        else:
            d = egcd(n, p)
            if (x - a) % d:
                return None
            m = n // d
            j = ((x - a) // d * pow(p // d, -1, m)) % m if m > 1 else 0
        return self.norm(o2, b + q * j)

    def members(self, x):
        """All (orbit, offset) names of the point x, as a sorted tuple."""
        x = self.norm(*x)
        if x in self._classes:
            return self._classes[x]
        seen = {x}
        todo = deque([x])
        while todo:
            o, off = todo.popleft()
            for i, side in self._ident_at.get(o, ()):
                r = self.idents[i]
                y = (self._partner(o, off, r[1], r[2], r[3], r[4], r[5]) if side == 0
                     else self._partner(o, off, r[4], r[5], r[0], r[1], r[2]))
                if y is not None and y not in seen:
                    seen.add(y)
                    todo.append(y)
                    if len(seen) > 4 * len(self.g.vertices) + 4:
                        todo.clear()
                        break
        out = tuple(sorted(seen))
        for y in out:
            self._classes[y] = out
        return out

    def point(self, o, off=0):
        return self.members((o, off))[0]

    def member(self, x, s):
        """The name of x inside an orbit of type s, or None."""
        for o, off in self.members(x):
            if self.orbits[o].type == s:
                return (o, off)
        return None

    def types(self, x):
        return [self.orbits[o].type for o, _ in self.members(x)]

    def in_domain(self, x, s):
        return self.member(x, s) is not None

    def orbit_size(self, x, s):
        m = self.member(x, s)
        return None if m is None else self.orbits[m[0]].size

    def tau_image(self, x, e):
        """Where the stable letter of e sends x, or None."""
        m = self.member(x, self.g.src(e))
        if m is None:
            return None
        o, off = m
        k, l = self.g.ksrc(e), self.g.ktrg(e)
        for a, o2, b in self._tau_at.get((e, o), ()):
            y = self._partner(o, off, a, k, o2, b, l)
            if y is not None:
                return self.point(*y)
        return None

    def apply(self, x, letter):
        if letter[0] == "a":
            m = self.member(x, letter[1])
            if m is None:
                return None
            return self.point(m[0], m[1] + letter[2])
        e = letter[1]
        if e in self.tree or (e ^ 1) in self.tree:
            raise GbsError(f"edge {e} is in the tree and has no stable letter")
        return self.tau_image(x, e)

    def evaluate(self, x, word):
        x = self.point(*x)
        for letter in word:
            x = self.apply(x, letter)
            if x is None:
                return None
        return x

    def letter_defined(self, x, letter):
        if letter[0] == "a":
            return self.in_domain(x, letter[1])
        return self.tau_image(x, letter[1]) is not None

    # ------------------------------------------------------------ constructions

    def add_tau(self, e, x, y):
        """Extend the stable letter of the non-tree edge e so that x goes to y."""
        g = self.g
        if e in self.tree or (e ^ 1) in self.tree:
            raise GbsError("edge is in the tree")
        mx, my = self.member(x, g.src(e)), self.member(y, g.trg(e))
        if mx is None:
            raise GbsError("source point outside the domain of the source generator")
        if my is None:
            raise GbsError("target point outside the domain of the target generator")
        if self.tau_image(x, e) is not None:
            raise GbsError("stable letter already defined at the source point")
        if self.tau_image(y, e ^ 1) is not None:
            raise GbsError("target point already in the range of the stable letter")
        n, m = self.orbits[mx[0]].size, self.orbits[my[0]].size
        if not transfer_ok(n, g.ksrc(e), m, g.ktrg(e)):
            raise GbsError("transfer")
        if e % 2 == 0:
            self._add_tau(e, (mx[0], mx[1], my[0], my[1]))
        else:
            self._add_tau(e ^ 1, (my[0], my[1], mx[0], mx[1]))
        return self

    def glue(self, e, x, y):
        """Identify x * a_src^(k j) with y * a_trg^(l j) for the tree edge e."""
        g = self.g
        if e not in self.tree:
            raise GbsError("edge is not in the tree")
        s, t = g.src(e), g.trg(e)
        mx, my = self.member(x, s), self.member(y, t)
        if mx is None or self.in_domain(x, t):
            raise GbsError("source point must lie in the source domain only")
        if my is None or self.in_domain(y, s):
            raise GbsError("target point must lie in the target domain only")
        k, l = g.ksrc(e), g.ktrg(e)
        n, m = self.orbits[mx[0]].size, self.orbits[my[0]].size
        if not transfer_ok(n, k, m, l):
            raise GbsError("transfer")
        period = RULE_WINDOW if n is INF else min(n // egcd(n, k), 4 * RULE_WINDOW)
        for j in range(period):
            tx = set(self.types((mx[0], mx[1] + k * j)))
            ty = set(self.types((my[0], my[1] + l * j)))
            if tx & ty:
                raise GbsError("not disjoint")
        self._add_ident((mx[0], mx[1], k, my[0], my[1], l))
        return self

    def glue_points(self, x, y):
        """Identify two single points (only used to build raw configurations)."""
        self._add_ident((x[0], x[1], 0, y[0], y[1], 0))
        return self

    def tau_new(self, e, x, size):
        """Send x along the non-tree edge e into a fresh orbit of the given size."""
        o = self.add_orbit(self.g.trg(e), size)
        try:
            self.add_tau(e, x, (o, 0))
        except GbsError:
            del self.orbits[o]
            self._touch()
            raise
        return self.point(o, 0)

    def glue_new(self, e, x, size):
        """Glue x along the tree edge e to a fresh orbit of the target type."""
        o = self.add_orbit(self.g.trg(e), size)
        try:
            self.glue(e, x, (o, 0))
        except GbsError:
            del self.orbits[o]
            self._touch()
            raise
        return self.point(o, 0)

    # ------------------------------------------------------------ inspection

    def sample_points(self, orbits=None):
        """Finite set of names covering every orbit and every rule anchor.

        With ``orbits``, only those orbits and the rules touching them.
        """
        keep = set(self.orbits) if orbits is None else set(orbits)
        pts = set()
        for o in keep:
            n = self.orbits[o].size
            top = VALIDATION_CAP if n is INF else min(n, VALIDATION_CAP)
            lo = -RULE_WINDOW if n is INF else 0
            pts.update(self.norm(o, x) for x in range(lo, top))
        for o1, a, p, o2, b, q in self.idents:
            if o1 in keep or o2 in keep:
                for j in range(-RULE_WINDOW, RULE_WINDOW + 1):
                    pts.add(self.norm(o1, a + p * j))
                    pts.add(self.norm(o2, b + q * j))
        for e, rules in self.taus.items():
            k, l = self.g.ksrc(e), self.g.ktrg(e)
            for o1, a, o2, b in rules:
                if o1 in keep or o2 in keep:
                    for j in range(-RULE_WINDOW, RULE_WINDOW + 1):
                        pts.add(self.norm(o1, a + k * j))
                        pts.add(self.norm(o2, b + l * j))
        return sorted(pts)

    def is_finite(self):
        return all(o.size is not INF for o in self.orbits.values())

    def all_points(self):
        if not self.is_finite():
            raise GbsError("infinite carrier")
        return sorted({self.point(o, x) for o, orb in self.orbits.items()
                       for x in range(orb.size)})

    def validate(self):
        return validate(self)

    def __repr__(self):
        return f"Preaction({len(self.orbits)} orbits, {len(self.idents)} identifications)"


@dataclass(frozen=True)
class PreactionViolation:
    condition: int
    kind: str
    witness: object

    def __str__(self):
        return f"condition {self.condition} ({self.kind}) at {self.witness}"


def _convex_ok(p, types):
    """Tree paths between any two types of the set stay inside the set."""
    types = set(types)
    for u in types:
        for v in types:
            if u < v:
                for e in tree_path(p.g, p.tree, u, v):
                    if p.g.trg(e) not in types:
                        return False
    return True


def validate(p, orbits=None):
    """First violated condition, or None; ``orbits`` limits the points examined."""
    g = p.g
    for o, orb in p.orbits.items():
        if orb.size is not INF and orb.size < 1:
            return PreactionViolation(1, "empty-orbit", o)
    for pt in p.sample_points(orbits):
        mem = p.members(pt)
        types = [p.orbits[o].type for o, _ in mem]
        if len(types) != len(set(types)):
            return PreactionViolation(1, "two-orbits-of-one-type", mem)
        for e in g.positive_edges():
            s, t = g.src(e), g.trg(e)
            if e in p.tree:
                ms, mt = p.member(pt, s), p.member(pt, t)
                if ms and mt and p.point(ms[0], ms[1] + g.ksrc(e)) != p.point(mt[0], mt[1] + g.ktrg(e)):
                    return PreactionViolation(2, "tree-relation", pt)
                continue
            for f in (e, e ^ 1):
                ms = p.member(pt, g.src(f))
                if ms is None:
                    continue
                hits = [p._partner(ms[0], ms[1], a, g.ksrc(f), o2, b, g.ktrg(f))
                        for a, o2, b in p._tau_at.get((f, ms[0]), ())]
                hits = [h for h in hits if h is not None]
                if len({p.point(*h) for h in hits}) > 1:
                    return PreactionViolation(3, "stable-letter-not-a-map", pt)
                if hits:
                    y = p.point(*hits[0])
                    back = p.tau_image(y, f ^ 1)
                    if back != p.point(*ms):
                        return PreactionViolation(3, "stable-letter-inverse", pt)
                    if p.tau_image(p.point(ms[0], ms[1] + g.ksrc(f)), f) != \
                            p.apply(y, ("a", g.trg(f), g.ktrg(f))):
                        return PreactionViolation(3, "equivariance", pt)
                    # condition 4: tree path from every other type to src(f)
                    for s2 in types:
                        for te in tree_path(g, p.tree, s2, g.src(f)):
                            if g.src(te) not in types or g.trg(te) not in types:
                                return PreactionViolation(4, "path-domain", pt)
        if not _convex_ok(p, types):
            return PreactionViolation(5, "path-domain", pt)
    return None


def new_orbit(g, tree, s, size):
    p = Preaction(g, tree)
    p.add_orbit(s, size)
    return p


def disjoint_union(p, q):
    """Union on disjoint carriers; returns (union, orbit renaming of q)."""
    if p.g != q.g or p.tree != q.tree:
        raise GbsError("preactions over different graphs")
    u = p.copy()
    shift = max(p.orbits, default=-1) + 1
    ren = {o: o + shift for o in q.orbits}
    for o in sorted(q.orbits):
        u.add_orbit(q.orbits[o].type, q.orbits[o].size, ren[o])
    for o1, a, pp, o2, b, qq in q.idents:
        u._add_ident((ren[o1], a, pp, ren[o2], b, qq))
    for e, rules in q.taus.items():
        for o1, a, o2, b in rules:
            u._add_tau(e, (ren[o1], a, ren[o2], b))
    return u, ren


def restrict(p, orbit_ids):
    """The preaction carried by the given orbits and the rules among them."""
    keep = set(orbit_ids)
    q = Preaction(p.g, p.tree)
    for o in sorted(keep):
        q.add_orbit(p.orbits[o].type, p.orbits[o].size, o)
    for r in p.idents:
        if r[0] in keep and r[3] in keep:
            q._add_ident(r)
    for e, rules in p.taus.items():
        for r in rules:
            if r[0] in keep and r[2] in keep:
                q._add_tau(e, r)
    return q


def from_action(g, tree, n, gens):
    """Preaction of a genuine finite action given by permutations.

    ``gens`` maps ``('a', v)`` to a list giving the image of each point under
    a_v, and ``('t', e)`` (e positive, not in the tree) likewise. Returns the
    preaction and the name of each point 0..n-1.
    """
    p = Preaction(g, tree)
    where = {}
    for v in g.vertices:
        perm = gens[("a", v)]
        seen = set()
        for x0 in range(n):
            if x0 in seen:
                continue
            cyc = [x0]
            seen.add(x0)
            y = perm[x0]
            while y != x0:
                cyc.append(y)
                seen.add(y)
                y = perm[y]
            o = p.add_orbit(v, len(cyc))
            for i, y in enumerate(cyc):
                where[(v, y)] = (o, i)
    for e in g.positive_edges():
        s, t = g.src(e), g.trg(e)
        k = g.ksrc(e)
        done = set()
        for x in range(n):
            o, i = where[(s, x)]
            size = p.orbits[o].size
            key = (o, i % egcd(size, k))
            if key in done:
                continue
            done.add(key)
            if e in tree:
                p._add_ident((o, i, k, *where[(t, x)], g.ktrg(e)))
            else:
                y = gens[("t", e)][x]
                p._add_tau(e, (o, i, *where[(t, y)]))
    names = [p.point(*where[(g.vertices[0], x)]) for x in range(n)]
    return p, names


# ---------------------------------------------------------------- text format

def dumps(p):
    g = p.g
    lines = []
    for o in sorted(p.orbits):
        orb = p.orbits[o]
        lines.append(f"orbit {o} {g.vertex_names[orb.type]} {orb.size}")
    for r in p.idents:
        lines.append("ident " + " ".join(str(x) for x in r))
    for e in sorted(p.taus):
        for r in p.taus[e]:
            lines.append(f"tau {g.edge_names[e]} " + " ".join(str(x) for x in r))
    return "\n".join(lines) + "\n"


def loads(text, g, tree):
    from .arith import parse_extnat

    vnames = {name: v for v, name in g.vertex_names.items()}
    enames = {name: e for e, name in g.edge_names.items()}
    p = Preaction(g, tree)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#")[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "orbit" and len(tok) == 4:
                p.add_orbit(vnames[tok[2]], parse_extnat(tok[3]), int(tok[1]))
            elif tok[0] == "ident" and len(tok) == 7:
                r = tuple(int(x) for x in tok[1:])
                if r[0] not in p.orbits or r[3] not in p.orbits:
                    raise KeyError(r)
                p._add_ident(r)
            elif tok[0] == "tau" and len(tok) == 6:
                e = enames[tok[1]]
                if e not in p.taus:
                    raise ValueError(f"edge {tok[1]} is in the tree")
                r = tuple(int(x) for x in tok[2:])
                if r[0] not in p.orbits or r[2] not in p.orbits:
                    raise KeyError(r)
                p._add_tau(e, r)
            else:
                raise ValueError(f"unrecognized line {line!r}")
        except (KeyError, ValueError, GbsError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return p


def parse_point(text):
    o, _, off = text.partition(":")
    return (int(o), int(off or 0))


def format_point(x):
    return f"{x[0]}:{x[1]}"
