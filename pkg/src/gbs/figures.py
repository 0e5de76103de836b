"""Figures written next to the tab-separated reports of the command line."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .arith import INF, is_attained, phenotype  # noqa: E402


def phenotype_rows(g, s, n_max):
    return [(N, phenotype(g, s, N), is_attained(g, s, N)) for N in range(1, n_max + 1)]


def plot_phenotype(g, s, n_max, path):
    rows = phenotype_rows(g, s, n_max)
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [r[0] for r in rows]
    ax.scatter(xs, [r[1] for r in rows], s=8, color="0.5", label="Ph(N)")
    hit = [r for r in rows if r[2]]
    ax.scatter([r[0] for r in hit], [r[1] for r in hit], s=14, color="C3", label="attained")
    ax.set_xlabel("N")
    ax.set_ylabel("phenotype")
    ax.set_title(f"vertex {g.vertex_names[s]}")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return rows


def plot_hgraph(h, path, highlight=()):
    """Vertices on a circle, colored by type; edges drawn as chords."""
    g = h.g
    vids = sorted(h.vertices)
    n = max(len(vids), 1)
    pos = {v: (math.cos(2 * math.pi * i / n), math.sin(2 * math.pi * i / n))
           for i, v in enumerate(vids)}
    fig, ax = plt.subplots(figsize=(6, 6))
    for e, a, b in h.edges.values():
        (x1, y1), (x2, y2) = pos[a], pos[b]
        if a == b:
            ax.add_patch(plt.Circle((x1 * 1.08, y1 * 1.08), 0.08, fill=False, color="0.6"))
        else:
            ax.plot([x1, x2], [y1, y2], color="0.6", lw=0.8, zorder=1)
    types = sorted(g.vertices)
    for v in vids:
        s, size = h.vertices[v]
        x, y = pos[v]
        ax.scatter([x], [y], s=60 if v in highlight else 30,
                   color=f"C{types.index(s) % 10}", edgecolor="k" if v in highlight else None, zorder=2)
        if len(vids) <= 40:
            label = "inf" if size is INF else str(size)
            ax.annotate(f"{g.vertex_names[s]}:{label}", (x, y), fontsize=7,
                        xytext=(4, 4), textcoords="offset points")
    ax.set_aspect("equal")
    ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sizes(labels, phenos, path, title=""):
    fig, ax = plt.subplots(figsize=(6, 4))
    ks = range(len(labels))
    ax.semilogy(ks, labels, "o-", label="size")
    ax.semilogy(ks, phenos, "s--", label="phenotype")
    ax.set_xlabel("step")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
