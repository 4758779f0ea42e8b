"""SVG renderings and the report index."""

from __future__ import annotations

import json

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy.stats import gaussian_kde  # noqa: E402

from . import pipeline as pl  # noqa: E402

plt.rcParams["svg.hashsalt"] = "infoaccess"
plt.rcParams["svg.fonttype"] = "none"


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def histogram_svg(path, hist: dict, alpha: float):
    edges = np.asarray(hist["bin_edges"])
    counts = np.asarray(hist["counts"], dtype=float)
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.bar(edges[:-1], counts / max(counts.sum(), 1), width=np.diff(edges), align="edge",
           edgecolor="black")
    ax.set_xlabel("p_ij")
    ax.set_ylabel("fraction of entries")
    ax.set_title(f"alpha = {alpha:g}")
    return _save(fig, path)


def clamp_for_display(matrix) -> np.ndarray:
    return np.maximum(np.asarray(matrix, dtype=float), 0.0)


def heatmap_svg(path, matrix, labels):
    shown = clamp_for_display(matrix)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(shown, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(len(labels)), labels, rotation=90)
    ax.set_yticks(range(len(labels)), labels)
    for i in range(len(labels)):
        for j in range(len(labels)):
            ax.text(j, i, f"{shown[i, j]:.2f}", ha="center", va="center", fontsize=6, color="w")
    ax.set_xlabel("alpha")
    ax.set_ylabel("alpha")
    fig.colorbar(im, ax=ax, label="ARI (negatives shown as 0)")
    return _save(fig, path)


def density_curves(values, labels, k):
    """Per-cluster Gaussian KDE (Silverman bandwidth) on a shared grid.

    Clusters with fewer than two observed values, or no spread, get no
    curve; the note says why.
    """
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    ok = ~np.isnan(values)
    lo, hi = np.nanmin(values), np.nanmax(values)
    pad = 0.05 * (hi - lo) if hi > lo else 1.0
    grid = np.linspace(lo - pad, hi + pad, 200)
    curves = []
    for j in range(k):
        v = values[ok & (labels == j)]
        entry = {"cluster": j, "count": int(len(v)), "curve": None, "note": ""}
        if len(v) < 2:
            entry["note"] = f"no density estimate: {len(v)} observed value(s)"
        elif np.ptp(v) == 0:
            entry["note"] = "no density estimate: all observed values equal"
        else:
            entry["curve"] = gaussian_kde(v, bw_method="silverman")(grid)
        curves.append(entry)
    return grid, curves


def density_svg(path, name, grid, curves, title):
    fig, ax = plt.subplots(figsize=(4.5, 3))
    for entry in curves:
        label = f"cluster {entry['cluster']} (n={entry['count']})"
        if entry["curve"] is None:
            ax.plot([], [], label=label + " - " + entry["note"])
        else:
            ax.plot(grid, entry["curve"], label=label)
    ax.set_xlabel(name)
    ax.set_ylabel("density")
    ax.set_title(title)
    ax.legend(fontsize=6)
    return _save(fig, path)


def composition_svg(path, name, table, categories, title):
    table = np.asarray(table, dtype=float)
    frac = table / np.maximum(table.sum(axis=1, keepdims=True), 1)
    fig, ax = plt.subplots(figsize=(4.5, 3))
    bottom = np.zeros(len(table))
    for j, cat in enumerate(categories):
        ax.bar(range(len(table)), frac[:, j], bottom=bottom, label=str(cat))
        bottom += frac[:, j]
    ax.set_xticks(range(len(table)),
                  [f"cluster {i}\n(n={int(t)})" for i, t in enumerate(table.sum(axis=1))])
    ax.set_ylabel(f"share of {name}")
    ax.set_title(title)
    ax.legend(fontsize=6)
    return _save(fig, path)


def build_report(ws: pl.Workspace) -> dict:
    c = ws.config
    out = ws.out
    rel = lambda p: p.relative_to(out).as_posix()  # noqa: E731
    index = {"histograms": [], "spectral_ari": None, "consistency": None,
             "attributes": []}

    for alpha in c.alphas:
        hpath = ws.require(ws.rep_prefix(alpha).parent / "histogram.json", "signatures")
        hist = json.loads(hpath.read_text())
        svg = histogram_svg(ws.path("report", f"histogram_{pl.alpha_tag(alpha)}.svg"), hist, alpha)
        index["histograms"].append({"alpha": alpha, "data": rel(hpath), "svg": rel(svg)})

    k = pl._load_analysis_k(ws)
    ari = out / "spectral" / "ari.csv"
    if ari.exists():
        header, rows = pl.read_csv(ari)
        index["spectral_ari"] = {"data": rel(ari), "rows": [dict(zip(header, r)) for r in rows]}

    cons = out / "consistency" / "ari_matrix.csv"
    if cons.exists():
        header, rows = pl.read_csv(cons)
        raw = np.array([[float(v) for v in r[1:]] for r in rows])
        svg = heatmap_svg(ws.path("report", "consistency_heatmap.svg"), raw, header[1:])
        index["consistency"] = {"data": rel(cons), "svg": rel(svg), "k": k,
                                "displayed": clamp_for_display(raw).tolist()}

    if c.attributes:
        clusterings = pl._info_clusterings(ws, k)
        spectral = out / "spectral" / f"k_{k}.csv"
        if spectral.exists():
            clusterings["spectral"] = pl.load_clustering(spectral, ws.graph)
        for table in pl.load_all_attributes(ws):
            for name, kind in table.kinds.items():
                for key, clus in clusterings.items():
                    tag = key if key == "spectral" else pl.alpha_tag(key)
                    title = f"{name}, {tag}"
                    svg_path = ws.path("report", f"{name}_{tag}.svg")
                    entry = {"attribute": name, "clustering": str(key), "kind": kind,
                             "svg": rel(svg_path)}
                    if kind == "numeric":
                        grid, curves = density_curves(table.columns[name], clus.labels, k)
                        density_svg(svg_path, name, grid, curves, title)
                        entry["clusters"] = [{"cluster": e["cluster"], "count": e["count"],
                                              "note": e["note"]} for e in curves]
                    else:
                        keep = ~table.missing(name)
                        ctab, cats = pl.st.attribute_table(
                            clus.labels[keep], list(table.columns[name][keep]), k)
                        composition_svg(svg_path, name, ctab, cats, title)
                        entry["composition"] = {"categories": [str(x) for x in cats],
                                                "counts": ctab.tolist()}
                    index["attributes"].append(entry)
        tests = out / "attribute_tests" / "results.json"
        if tests.exists():
            index["attribute_tests"] = rel(tests)
    pl.write_json(ws.path("report", "index.json"), index)
    return index
