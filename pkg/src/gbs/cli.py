"""Command line front end.

Exit status: 0 on success, 1 when the inputs parse but the operation fails
(the error is one ``error: ...`` line on stderr), 2 on unreadable input.
"""

import argparse
import os
import sys
from pathlib import Path

from . import hgraph as hg
from . import preaction as pa
from .arith import INF, parse_extnat, phenotype, phenotype_oracle, phenotype_set
from .core import GbsError, classify, is_reduced, parse_graph, spanning_tree
from .kernel import (ball_determined, in_perfect_kernel, kernel_description, phenotype_escape_sequence,
                     piece_topology, schreier_ball, subgroup_index, transitivity_witness)
from .merge import MergeRequest, merge
from .words import format_word, parse_word


class InputError(Exception):
    pass


def _read(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _parse(fn, *args, what=""):
    try:
        return fn(*args)
    except (ValueError, KeyError) as exc:
        raise InputError(f"{what}: {exc}") from None


def _graph(path):
    return _parse(parse_graph, _read(path), what=path)


def _vertex(g, name):
    for v, n in g.vertex_names.items():
        if n == name:
            return v
    raise InputError(f"unknown vertex {name!r}")


def _edge(g, name):
    flip = name.endswith("~")
    for e, n in g.edge_names.items():
        if n == name.rstrip("~"):
            return e ^ int(flip)
    raise InputError(f"unknown edge {name!r}")


def _size(text):
    return _parse(parse_extnat, text, what="size")


def _preaction(g, tree, path):
    return _parse(pa.loads, _read(path), g, tree, what=path)


def _hgraph(g, path):
    return _parse(hg.loads, _read(path), g, what=path)


def _point(text):
    return _parse(pa.parse_point, text, what="point")


def _report_dir(args):
    if not getattr(args, "report", None):
        return None
    d = Path(args.report)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_tsv(path, header, rows):
    with open(path, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for r in rows:
            fh.write("\t".join(str(x) for x in r) + "\n")


def _emit_hgraph(h, args, out):
    out.write(hg.to_dot(h) if getattr(args, "dot", False) else hg.dumps(h))
    d = _report_dir(args)
    if d is not None:
        from .figures import plot_hgraph

        g = h.g
        _write_tsv(d / "hgraph.tsv", ["id", "type", "size", "deficit"],
                   [(v, g.vertex_names[s], n, sum(x for (w, _), x in hg.saturation(h).items() if w == v))
                    for v, (s, n) in sorted(h.vertices.items())])
        plot_hgraph(h, d / "hgraph.png")


# ---------------------------------------------------------------- commands

def cmd_phenotype(args, out):
    g = _graph(args.graph)
    s = _vertex(g, args.vertex)
    N = _size(args.N)
    ph = phenotype(g, s, N)
    out.write(f"Ph={ph}\n")
    if N is not INF:
        out.write("primes=" + ",".join(str(p) for p in sorted(phenotype_set(g, s, N))) + "\n")
    if args.oracle:
        ref = phenotype_oracle(g, s, N)
        out.write(f"oracle={ref}\n")
        if ref != ph:
            raise GbsError(f"oracle disagrees: {ref} != {ph}")
    d = _report_dir(args)
    if d is not None:
        from .figures import plot_phenotype

        top = args.upto or (N if isinstance(N, int) else 100)
        rows = plot_phenotype(g, s, top, d / "phenotype.png")
        _write_tsv(d / "phenotype.tsv", ["N", "Ph", "attained"], rows)


def cmd_classify(args, out):
    out.write(f"{classify(_graph(args.graph))}\n")


def cmd_validate_graph(args, out):
    g = _graph(args.graph)
    out.write(f"ok vertices={len(g.vertices)} edges={len(g.positive_edges())} "
              f"reduced={'yes' if is_reduced(g) else 'no'}\n")


def _tree(g, args):
    return spanning_tree(g)


def cmd_validate_preaction(args, out):
    g = _graph(args.graph)
    p = _preaction(g, _tree(g, args), args.preaction)
    bad = pa.validate(p)
    if bad is not None:
        raise GbsError(f"invalid condition={bad.condition} kind={bad.kind} at={bad.witness}")
    out.write(f"ok orbits={len(p.orbits)}\n")


def cmd_extract(args, out):
    g = _graph(args.graph)
    p = _preaction(g, _tree(g, args), args.preaction)
    _emit_hgraph(hg.extract(p).h, args, out)


def cmd_validate_hgraph(args, out):
    g = _graph(args.graph)
    h = _hgraph(g, args.hgraph)
    bad = hg.validate_hgraph(h)
    if bad is not None:
        raise GbsError(f"invalid {bad}")
    deficit = sum(hg.saturation(h).values())
    out.write(f"ok vertices={len(h.vertices)} edges={len(h.edges)} deficit={deficit}\n")


def cmd_saturate(args, out):
    g = _graph(args.graph)
    h = _hgraph(g, args.hgraph)
    _emit_hgraph(hg.complete_to_depth(h, args.depth), args, out)


def cmd_realize(args, out):
    g = _graph(args.graph)
    h = _hgraph(g, args.hgraph)
    out.write(pa.dumps(hg.realize_finite(h, _tree(g, args))))


def cmd_gadget(args, out):
    g = _graph(args.graph)
    _emit_hgraph(hg.gadget(g, _edge(g, args.edge), _size(args.N)), args, out)


def cmd_merge(args, out):
    g = _graph(args.graph)
    tree = _tree(g, args)
    a = _preaction(g, tree, args.first)
    b = _preaction(g, tree, args.second)
    m = _parse(parse_word, args.m, g, what="word") if args.m != "1" else ()
    m2 = _parse(parse_word, args.m2, g, what="word") if args.m2 != "1" else ()
    req = MergeRequest([a], [b], [_point(args.x0)], [_point(args.y0)], _edge(g, args.e0), m, m2)
    res = merge(req)
    out.write(f"word={format_word(res.word, g)}\n")
    out.write(f"target={pa.format_point(res.y0[0])}\n")
    if args.trace and os.environ.get("GBS_TRACE") != "1":
        # with the variable set, merge prints the trace itself
        for line in res.trace:
            sys.stderr.write(line + "\n")
    if args.output:
        Path(args.output).write_text(pa.dumps(res.gammas[0]))
    else:
        out.write(pa.dumps(res.gammas[0]))
    d = _report_dir(args)
    if d is not None:
        from .figures import plot_hgraph

        h = hg.extract(res.gammas[0]).h
        plot_hgraph(h, d / "merge.png", highlight=set(a.orbits))
        _write_tsv(d / "merge.tsv", ["id", "type", "size", "side"],
                   [(v, g.vertex_names[s], n,
                     "first" if v in a.orbits else "second" if v in res.y_renames[0].values() else "new")
                    for v, (s, n) in sorted(h.vertices.items())])


def cmd_ball(args, out):
    g = _graph(args.graph)
    p = _preaction(g, _tree(g, args), args.preaction)
    x = p.point(*_point(args.point))
    ball = schreier_ball(p, x, args.R)
    names = {y: i for i, y in enumerate(sorted(ball.dist, key=lambda y: (ball.dist[y], y)))}

    def label(gen):
        return f"a[{g.vertex_names[gen[1]]}]" if gen[0] == "a" else f"t[{g.edge_names[gen[1]]}]"

    if args.dot:
        out.write("digraph ball {\n")
        for y, i in names.items():
            shape = "doublecircle" if y == x else "circle"
            out.write(f'  p{i} [label="{pa.format_point(y)}", shape={shape}];\n')
        for y, gen, z in sorted(ball.edges):
            out.write(f'  p{names[y]} -> p{names[z]} [label="{label(gen)}"];\n')
        out.write("}\n")
        return
    out.write(f"points={len(ball.dist)} edges={len(ball.edges)} "
              f"determined={'yes' if ball_determined(p, x, args.R) else 'no'}\n")
    for y, gen, z in sorted(ball.edges):
        out.write(f"{pa.format_point(y)}\t{label(gen)}\t{pa.format_point(z)}\n")


def cmd_witness(args, out):
    g = _graph(args.graph)
    tree = _tree(g, args)
    if len(args.inputs) < 3 or len(args.inputs) % 2 == 0:
        raise InputError("need an even number of ball files and a radius")
    files, R = args.inputs[:-1], args.inputs[-1]
    try:
        R = int(R)
    except ValueError:
        raise InputError(f"radius must be an integer, got {R!r}") from None
    balls = []
    for f in files:
        path, _, pt = f.partition("@")
        balls.append((_preaction(g, tree, path), _point(pt or "0:0")))
    wit = transitivity_witness(balls, R)
    out.write(f"word={format_word(wit.word, g)}\n")
    for i, (z, y) in enumerate(zip(wit.actions, wit.ends)):
        out.write(f"pair={i} orbits={len(z.orbits)} end={pa.format_point(y)}\n")
    if args.output:
        d = Path(args.output)
        d.mkdir(parents=True, exist_ok=True)
        for i, z in enumerate(wit.actions):
            (d / f"pair{i}.pa").write_text(pa.dumps(z))


def cmd_piece(args, out):
    g = _graph(args.graph)
    s = _vertex(g, args.vertex)
    N = _size(args.N)
    out.write(f"piece={piece_topology(g, s, N)}\n")
    d = _report_dir(args)
    if d is not None and classify(g).kind == "NonUnimodularNonAmenable" and N == phenotype(g, s, N):
        from .figures import plot_hgraph, plot_sizes

        h, ids = phenotype_escape_sequence(g, s, N, args.steps)
        sizes = [h.size(v) for v in ids]
        phenos = [phenotype(g, s, n) for n in sizes]
        _write_tsv(d / "sequence.tsv", ["step", "vertex", "size", "phenotype"],
                   [(k, v, n, q) for k, (v, n, q) in enumerate(zip(ids, sizes, phenos))])
        plot_sizes(sizes, phenos, d / "sequence.png", title=f"vertex {args.vertex}, N={N}")
        plot_hgraph(h, d / "sequence-graph.png", highlight=set(ids))


def cmd_kernel(args, out):
    g = _graph(args.graph)
    rep = kernel_description(g)
    for line in rep.lines():
        out.write(line + "\n")
    if args.preaction:
        p = _preaction(g, _tree(g, args), args.preaction)
        out.write(f"in_kernel={'yes' if in_perfect_kernel(p) else 'no'}\n")
        if p.is_finite() and hg.is_saturated(hg.extract(p).h):
            out.write(f"index={subgroup_index(p)}\n")


# ---------------------------------------------------------------- parser

def build_parser():
    ap = argparse.ArgumentParser(prog="gbs", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, *params, report=False, dot=False):
        sp = sub.add_parser(name)
        for p in params:
            if isinstance(p, tuple):
                sp.add_argument(p[0], **p[1])
            else:
                sp.add_argument(p)
        if report:
            sp.add_argument("--report", metavar="DIR", help="write a table and a figure into DIR")
        if dot:
            sp.add_argument("--dot", action="store_true", help="print Graphviz instead of text")
        sp.set_defaults(fn=fn)
        return sp

    sp = add("phenotype", cmd_phenotype, "graph", "vertex", "N", report=True)
    sp.add_argument("--oracle", action="store_true", help="cross-check by exhaustive enumeration")
    sp.add_argument("--upto", type=int, help="largest N tabulated in the report")
    add("classify", cmd_classify, "graph")
    add("validate-graph", cmd_validate_graph, "graph")
    add("validate-preaction", cmd_validate_preaction, "graph", "preaction")
    add("extract", cmd_extract, "graph", "preaction", report=True, dot=True)
    add("validate-hgraph", cmd_validate_hgraph, "graph", "hgraph")
    add("saturate", cmd_saturate, "graph", "hgraph", ("depth", {"type": int}), report=True, dot=True)
    add("realize", cmd_realize, "graph", "hgraph")
    add("gadget", cmd_gadget, "graph", "edge", "N", report=True, dot=True)
    sp = add("merge", cmd_merge, "graph", "first", "second", "e0", "m", "m2", report=True)
    sp.add_argument("--x0", default="0:0")
    sp.add_argument("--y0", default="0:0")
    sp.add_argument("--trace", action="store_true")
    sp.add_argument("-o", "--output", help="write the joined preaction here")
    sp = add("ball", cmd_ball, "graph", "preaction", ("R", {"type": int}), dot=True)
    sp.add_argument("--point", default="0:0")
    sp = add("witness", cmd_witness, ("inputs", {"nargs": "+", "metavar": "BALL[@POINT]... R"}))
    sp.add_argument("-o", "--output", metavar="DIR")
    sp = add("piece", cmd_piece, "graph", "vertex", "N", report=True)
    sp.add_argument("--steps", type=int, default=4, help="length of the sequence drawn in the report")
    sp = add("kernel", cmd_kernel, "graph")
    sp.add_argument("--preaction", help="also decide membership of this finite subgroup")
    return ap


def main(argv=None, out=None):
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "witness":
        args.graph, args.inputs = args.inputs[0], args.inputs[1:]
    try:
        args.fn(args, out)
    except InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except GbsError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
