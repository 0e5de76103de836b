"""Words in the vertex and edge generators, and typed words along edge paths.

A letter is ``('a', v, k)`` for the k-th power of the generator of vertex v, or
``('t', e)`` for the stable letter of a non-tree edge e. For a negative edge e
the letter ``('t', e)`` stands for the inverse of the letter of ``e ^ 1``.
Words act on the right and are read left to right.
"""

import re
from dataclasses import dataclass

from .core import GbsError


def inverse_letter(x):
    if x[0] == "a":
        return ("a", x[1], -x[2])
    return ("t", x[1] ^ 1)


def inverse(word):
    return tuple(inverse_letter(x) for x in reversed(word))


def simplify(word):
    """Merge adjacent powers of the same vertex generator and cancel t t^-1."""
    out = []
    for x in word:
        if x[0] == "a" and x[2] == 0:
            continue
        if out and x[0] == "a" and out[-1][0] == "a" and out[-1][1] == x[1]:
            k = out[-1][2] + x[2]
            out.pop()
            if k:
                out.append(("a", x[1], k))
            continue
        if out and x[0] == "t" and out[-1] == ("t", x[1] ^ 1):
            out.pop()
            continue
        out.append(x)
    return tuple(out)


@dataclass(frozen=True)
class TypedWord:
    """An edge path ``path`` starting at ``vertex`` with one power per vertex visited."""

    vertex: int
    path: tuple
    powers: tuple

    def __post_init__(self):
        if len(self.powers) != len(self.path) + 1:
            raise GbsError("a typed word needs one more power than edges")

    def end(self, g):
        return g.trg(self.path[-1]) if self.path else self.vertex

    def check(self, g):
        here = self.vertex
        for e in self.path:
            if g.src(e) != here:
                raise GbsError(f"edge {e} does not start at {here}")
            here = g.trg(e)
        return self


def is_reduced_typed(w, g):
    if not w.path:
        return w.powers[0] != 0
    for i in range(len(w.path) - 1):
        e, f = w.path[i], w.path[i + 1]
        if f == e ^ 1 and w.powers[i + 1] % g.ktrg(e) == 0:
            return False
    return True


def concat_typed(w1, w2, g):
    if w1.end(g) != w2.vertex:
        raise GbsError("typed words do not meet")
    powers = w1.powers[:-1] + (w1.powers[-1] + w2.powers[0],) + w2.powers[1:]
    return TypedWord(w1.vertex, w1.path + w2.path, powers)


def to_group_word(w, g, tree):
    out = []
    here = w.vertex
    for i, e in enumerate(w.path):
        if w.powers[i]:
            out.append(("a", here, w.powers[i]))
        if e not in tree:
            out.append(("t", e))
        here = g.trg(e)
    if w.powers[-1]:
        out.append(("a", here, w.powers[-1]))
    return tuple(out)


def subwords(w):
    """Proper prefixes along the path, keeping the power reached after each edge."""
    return [TypedWord(w.vertex, w.path[:i], w.powers[:i + 1])
            for i in range(1, len(w.path))]


_TOKEN = re.compile(r"^(a|t)\[([^\]]+)\](?:\^(-?\d+))?$")


def parse_word(text, g):
    """Parse ``a[v]^k t[e] t[e]^-1 ...`` using the graph's vertex and edge names."""
    vnames = {name: v for v, name in g.vertex_names.items()}
    enames = {name: e for e, name in g.edge_names.items()}
    out = []
    for tok in text.split():
        m = _TOKEN.match(tok)
        if not m:
            raise ValueError(f"bad word token {tok!r}")
        kind, name, power = m.group(1), m.group(2), int(m.group(3) or 1)
        if kind == "a":
            if name not in vnames:
                raise ValueError(f"unknown vertex {name!r}")
            out.append(("a", vnames[name], power))
        else:
            flip = name.endswith("~")
            name = name.rstrip("~")
            if name not in enames:
                raise ValueError(f"unknown edge {name!r}")
            e = enames[name] ^ int(flip)
            if power < 0:
                e ^= 1
            out += [("t", e)] * abs(power)
    return tuple(out)


def format_word(word, g):
    toks = []
    for x in word:
        if x[0] == "a":
            name = g.vertex_names[x[1]]
            toks.append(f"a[{name}]" if x[2] == 1 else f"a[{name}]^{x[2]}")
        else:
            name = g.edge_names[x[1] & ~1]
            toks.append(f"t[{name}]^-1" if x[1] & 1 else f"t[{name}]")
    return " ".join(toks) if toks else "1"


def parse_typed(text, g, vertex=None):
    """Parse ``(e1,...,er | k1,...,k_{r+1})``; r = 0 words need ``vertex``."""
    m = re.match(r"^\(\s*([^|]*)\|\s*([^)]*)\)$", text.strip())
    if not m:
        raise ValueError(f"bad typed word {text!r}")
    enames = {name: e for e, name in g.edge_names.items()}
    path = []
    for name in filter(None, (x.strip() for x in m.group(1).split(","))):
        flip = name.endswith("~")
        if name.rstrip("~") not in enames:
            raise ValueError(f"unknown edge {name!r}")
        path.append(enames[name.rstrip("~")] ^ int(flip))
    powers = tuple(int(x) for x in m.group(2).split(","))
    if path:
        vertex = g.src(path[0])
    elif vertex is None:
        raise ValueError("an empty typed word needs a base vertex")
    return TypedWord(vertex, tuple(path), powers).check(g)
