"""Schreier balls, the perfect kernel and its pieces, and transitivity witnesses."""

from collections import deque
from dataclasses import dataclass, field

from .arith import INF, is_attained, phenotype, prime_factors, val
from .core import GbsError, classify, is_unimodular, simple_cycles
from .hgraph import (complete_to_depth, extract, hgraph_phenotype, is_saturated,
                     path_of, realize_extending, realize_finite, saturation)
from .merge import EscapeError, MergeRequest, common_escape, merge
from .preaction import Preaction, restrict
from .words import simplify, to_group_word


def generators(g, tree):
    """Generator labels of the Schreier graph: vertex generators, then stable letters."""
    out = [("a", v) for v in g.vertices]
    out += [("t", e) for e in g.positive_edges() if e not in tree]
    return out


def _letter(gen, sign):
    if gen[0] == "a":
        return ("a", gen[1], sign)
    return ("t", gen[1] if sign > 0 else gen[1] ^ 1)


@dataclass
class SchreierBall:
    radius: int
    root: object
    dist: dict
    edges: set = field(default_factory=set)

    def __len__(self):
        return len(self.dist)


def schreier_ball(p, x, R):
    """Points within distance R of x and the labeled edges among them."""
    gens = generators(p.g, p.tree)
    x = p.point(*x)
    dist = {x: 0}
    queue = deque([x])
    while queue:
        y = queue.popleft()
        if dist[y] == R:
            continue
        for gen in gens:
            for sign in (1, -1):
                z = p.apply(y, _letter(gen, sign))
                if z is not None and z not in dist:
                    dist[z] = dist[y] + 1
                    queue.append(z)
    edges = set()
    for y in dist:
        for gen in gens:
            z = p.apply(y, _letter(gen, 1))
            if z is not None and z in dist:
                edges.add((y, gen, z))
    return SchreierBall(R, x, dist, edges)


def ball_determined(p, x, R):
    """Every generator and its inverse is defined at every point within distance R."""
    gens = generators(p.g, p.tree)
    ball = schreier_ball(p, x, R)
    return all(p.apply(y, _letter(gen, s)) is not None
               for y in ball.dist for gen in gens for s in (1, -1))


def _undefined_orbits(p, ball):
    gens = generators(p.g, p.tree)
    out = set()
    for y in ball.dist:
        if any(p.apply(y, _letter(gen, s)) is None for gen in gens for s in (1, -1)):
            out |= {o for o, _ in p.members(y)}
    return out


def grow_ball(h, tree, R, root=0, max_rounds=50):
    """A pointed preaction whose R-ball at (root, 0) is determined.

    Realizes h, then fills the deficits of just those vertices that carry a
    point of the ball with an undefined letter, until there are none. The
    result keeps only the orbits meeting the (R+1)-ball.
    """
    for _ in range(max_rounds):
        p = realize_finite(h, tree)
        x = p.point(root, 0)
        need = _undefined_orbits(p, schreier_ball(p, x, R))
        if not need:
            return restrict(p, _ball_orbits(p, x, R + 1)), x
        h = complete_to_depth(h, 1, only=need)
    raise GbsError(f"ball not determined after {max_rounds} rounds")


def ball_iso(b1, b2):
    """Rooted isomorphism of labeled balls.

    Generators act injectively, so the map is forced from the root; this
    follows it and compares the edge sets.
    """
    if b1.radius != b2.radius or len(b1.dist) != len(b2.dist) or len(b1.edges) != len(b2.edges):
        return False
    adj1, out2 = {}, {}
    for y, gen, z in b1.edges:
        adj1.setdefault(y, []).append((gen, 1, z))
        adj1.setdefault(z, []).append((gen, -1, y))
    for y, gen, z in b2.edges:
        out2[(y, gen, 1)] = z
        out2[(z, gen, -1)] = y
    f = {b1.root: b2.root}
    queue = deque([b1.root])
    while queue:
        y = queue.popleft()
        for gen, sign, z in adj1.get(y, ()):
            w = out2.get((f[y], gen, sign))
            if w is None:
                return False
            if z in f:
                if f[z] != w:
                    return False
            else:
                f[z] = w
                queue.append(z)
    if len(f) != len(b1.dist) or len(set(f.values())) != len(f):
        return False
    return {(f[y], gen, f[z]) for y, gen, z in b1.edges} == b2.edges


def subgroup_phenotype(p, x, s):
    """Phenotype of the stabilizer of x at the vertex s."""
    n = p.orbit_size(x, s)
    if n is not None:
        return phenotype(p.g, s, n)
    ext = extract(p)
    here = ext.vertex_of(p, x, p.types(x)[0])
    comp = _component(ext.h, here)
    return hgraph_phenotype(ext.h.induced(comp), s)


def _component(h, v):
    seen = {v}
    todo = [v]
    while todo:
        u = todo.pop()
        for _, w in h.neighbors(u):
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


# ---------------------------------------------------------------- the kernel

@dataclass
class KernelReport:
    group: object
    kernel: str
    normal_power: tuple | None = None

    def lines(self):
        out = [f"class={self.group}", f"kernel={self.kernel}"]
        if self.normal_power is not None:
            v, c = self.normal_power
            out.append(f"C=<a[{v}]^{c}>")
        return out


def normal_power(g):
    """A power of the first vertex generator spanning a normal cyclic subgroup.

    The product of all labels works for a unimodular graph: along every path
    the exponent stays integral and every cycle returns it up to sign.
    """
    c = 1
    for e in g.positive_edges():
        c *= abs(g.ksrc(e) * g.ktrg(e))
    return g.vertices[0], c


def kernel_description(g):
    cls = classify(g)
    if cls.amenable:
        return KernelReport(cls, "K(G) = empty")
    if cls.kind == "NonUnimodularNonAmenable":
        return KernelReport(cls, "K(G) = Sub_[inf](G)")
    v, c = normal_power(g)
    return KernelReport(cls, "K(G) = pi^-1(Sub_[inf](G/C))", (g.vertex_names[v], c))


def in_perfect_kernel(desc):
    """Whether the subgroup described by a preaction or an H-graph lies in the kernel.

    A finite saturated preaction is a finite action, hence a finite index
    subgroup: not in the kernel. Anything with room left or an infinite
    orbit completes to an infinite graph: in the kernel.
    """
    g = desc.g
    if classify(g).amenable:
        raise GbsError("the kernel of an amenable group is empty")
    h = extract(desc).h if isinstance(desc, Preaction) else desc
    if any(n is INF for _, n in h.vertices.values()):
        return True
    return not is_saturated(h)


def subgroup_index(p):
    """Number of points of a finite transitive action."""
    if not p.is_finite():
        raise GbsError("infinite carrier")
    h = extract(p).h
    if not is_saturated(h):
        raise GbsError("not a genuine action: some letters are undefined")
    if not h.is_connected():
        raise GbsError("action is not transitive")
    n = len(p.all_points())
    for s in p.g.vertices:
        total = sum(orb.size for orb in p.orbits.values() if orb.type == s)
        if total != n:
            raise GbsError(f"orbits of type {s} cover {total} points out of {n}")
    return n


def piece_topology(g, s, N):
    cls = classify(g)
    if cls.amenable:
        raise GbsError("amenable group")
    if N is INF:
        return "closed, non-empty"
    if is_attained(g, s, N):
        return "clopen" if is_unimodular(g) else "open, not closed"
    return "empty piece"


def unbalanced_prime(g):
    """Smallest prime whose valuations differ along some cycle, or None."""
    found = set()
    for c in simple_cycles(g):
        ks = [g.ksrc(e) for e in c]
        ls = [g.ktrg(e) for e in c]
        for p in set().union(*(prime_factors(x) for x in ks + ls)):
            if sum(val(k, p) for k in ks) != sum(val(l, p) for l in ls):
                found.add(p)
    return min(found) if found else None


def _free_start(p, s, e0):
    """Smallest (orbit, offset) of type s where the letter of e0 is undefined."""
    g = p.g
    for o in sorted(p.orbits):
        orb = p.orbits[o]
        if orb.type != s:
            continue
        for j in range(orb.size if orb.size is not INF else 64):
            x = p.point(o, j)
            busy = p.in_domain(x, g.trg(e0)) if e0 in p.tree else p.tau_image(x, e0) is not None
            if not busy:
                return o, j
    return None


def phenotype_escape_sequence(g, s, N, n_max, tree=None):
    """A tree H-graph holding type-s vertices of sizes N, N p, N p^2, ... N p^n_max.

    p is the smallest prime unbalanced on a cycle. Each new vertex is joined
    to the graph built so far by one merge. Returns the graph and the ids of
    those vertices.
    """
    from .core import spanning_tree

    if is_unimodular(g):
        raise GbsError("graph is unimodular")
    if not is_attained(g, s, N):
        raise GbsError(f"size {N} is not attained at this vertex")
    tree = tree or spanning_tree(g)
    p0 = unbalanced_prime(g)
    acc = Preaction(g, tree)
    acc.add_orbit(s, N)
    ids = [0]
    for k in range(1, n_max + 1):
        beta = Preaction(g, tree)
        beta.add_orbit(s, N * p0 ** k)
        for e0 in g.out_edges(s):
            start = _free_start(acc, s, e0)
            if start is None:
                continue
            o, j = start
            res = merge(MergeRequest([acc], [beta], [(o, 0)], [(0, 0)], e0, (("a", s, j),) if j else ()))
            break
        else:
            raise GbsError("no free edge left in the accumulated graph")
        acc = res.gammas[0]
        ids.append(res.y_renames[0][0])
    return extract(acc).h, ids


# ---------------------------------------------------------------- witnesses

@dataclass
class Witness:
    word: tuple
    actions: list
    starts: list
    ends: list
    escape: object
    depth: int


def _ball_orbits(p, x, R):
    return {o for y in schreier_ball(p, x, R).dist for o, _ in p.members(y)}


def _pick_exit(acts, ends, word, g):
    """A power j and an edge e0 leaving every end point x·a^j through a free slot."""
    last = word.path[-1]
    s = g.trg(last)
    first = [(0, last)] if g.is_loop(last) else [(1, last ^ 1)]
    for j, e0 in first + [(j, f) for j in range(12) for f in g.out_edges(s)]:
        ok = True
        for p, z in zip(acts, ends):
            y = p.apply(z, ("a", s, j))
            busy = p.in_domain(y, g.trg(e0)) if (e0 & ~1) in p.tree else p.tau_image(y, e0) is not None
            if busy:
                ok = False
                break
        if ok:
            return j, e0
    raise GbsError("no common free edge after the escape word")


def transitivity_witness(balls, R, max_depth=4):
    """One word carrying each of the first S pointed balls to the matching later one.

    ``balls`` lists 2S pairs (preaction, base point) whose R-balls are fully
    determined. Returns extensions of the i-th and (S+i)-th inputs, one per
    i, where the base point of the first has the input R-ball and its image
    under the word has the R-ball of the second.
    """
    if len(balls) % 2 or not balls:
        raise GbsError("need an even positive number of balls")
    S = len(balls) // 2
    g, tree = balls[0][0].g, balls[0][0].tree
    for i, (p, x) in enumerate(balls):
        if not ball_determined(p, x, R):
            raise GbsError(f"ball {i} is not determined at radius {R}")
    for i in range(S):
        for s in g.vertices:
            a = subgroup_phenotype(*balls[i], s)
            b = subgroup_phenotype(*balls[S + i], s)
            if a != b:
                raise GbsError(f"phenotype mismatch for pair {i} at vertex {s}: {a} vs {b}")
    keep = [_ball_orbits(p, x, R + 1) for p, x in balls]
    last_err = None
    for depth in range(1, max_depth + 1):
        big = []
        for p, x in balls:
            h = complete_to_depth(extract(p).h, depth)
            q, _, _ = realize_extending(h, tree, [(p, {o: o for o in p.orbits})])
            big.append(q)
        items = [(q, x, K) for q, (_, x), K in zip(big, balls, keep)]
        order = list(range(len(items)))
        word = None
        for shift in range(len(items)):
            rot = order[shift:] + order[:shift]
            try:
                word = common_escape([items[i] for i in rot])
                break
            except EscapeError as exc:
                last_err = exc
        if word is None:
            continue
        gw = to_group_word(word, g, tree)
        cut = []
        for q, (_, x), K in zip(big, balls, keep):
            path = path_of(q, extract(q), x, word)
            ext = extract(q)
            verts = set()
            for eid, _ in path:
                _, a, b = ext.h.edges[eid]
                verts |= {a, b}
            cut.append(restrict(q, K | verts))
        ends = [c.evaluate(x, gw) for c, (_, x) in zip(cut, balls)]
        if any(z is None for z in ends):
            last_err = GbsError("escape word undefined after restriction")
            continue
        j, e0 = _pick_exit(cut, ends, word, g)
        m = simplify(gw + ((("a", g.trg(word.path[-1]), j),) if j else ()))
        req = MergeRequest(cut[:S], cut[S:], [x for _, x in balls[:S]],
                           [x for _, x in balls[S:]], e0, m, m)
        res = merge(req, check="local")
        starts = [x for _, x in balls[:S]]
        wit = Witness(res.word, res.gammas, starts, res.y0, word, depth)
        bad = check_witness(wit, balls, R)
        if bad:
            raise GbsError("witness check failed: " + "; ".join(bad))
        return wit
    raise GbsError(f"no common escape up to depth {max_depth}: {last_err}")


def check_witness(wit, balls, R):
    S = len(balls) // 2
    bad = []
    for i in range(S):
        z = wit.actions[i]
        p1, x1 = balls[i]
        p2, x2 = balls[S + i]
        if not ball_iso(schreier_ball(z, wit.starts[i], R), schreier_ball(p1, x1, R)):
            bad.append(f"pair {i}: ball at the start changed")
        end = z.evaluate(wit.starts[i], wit.word)
        if end != z.point(*wit.ends[i]):
            bad.append(f"pair {i}: word does not reach the second base point")
        elif not ball_iso(schreier_ball(z, end, R), schreier_ball(p2, x2, R)):
            bad.append(f"pair {i}: ball at the end differs from the second input")
    return bad


def saturation_deficit(h):
    return sum(d for d in saturation(h).values() if d > 0)
