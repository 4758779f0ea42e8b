"""Experiment orchestration behind the command-line interface.

Every command reads an :class:`ExperimentConfig`, consumes artifacts of
earlier commands from ``config.out`` (building representations on demand)
and writes its own artifacts there. Data artifacts are deterministic in
the config and master seed; ``manifest.json`` records their hashes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
from collections import Counter
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import clustering as cl
from . import graph as gr
from . import signature as sg
from . import stats as st
from .cascade import DEFAULT_TRIALS, CascadeParams

log = logging.getLogger(__name__)

SEED_EVAL_STRATEGIES = ("random", "pagerank", "betweenness", "degree")


class ConfigError(ValueError):
    """Invalid experiment configuration (exit code 2)."""


class DataError(RuntimeError):
    """Unusable input data or missing upstream artifacts (exit code 3)."""


@dataclass
class ExperimentConfig:
    graph: str = ""
    directed: bool = False
    alphas: list = field(default_factory=lambda: [0.5])
    trials: int = DEFAULT_TRIALS
    k: object = 2
    analysis_k: int | None = None
    strategy: str = "all"
    num_seeds: object = None
    master_seed: int = 0
    attributes: list = field(default_factory=list)
    correction: int = 10
    out: str = "out"
    workers: int = 0
    restarts: int = 10
    mc_trials: int = 10_000
    bins: int = 10
    lcc: bool = True
    seed_eval_strategies: list = field(default_factory=lambda: list(SEED_EVAL_STRATEGIES))
    seed_eval_m: list = field(default_factory=lambda: ["sqrt"])

    @classmethod
    def from_dict(cls, data: dict, base_dir=None) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        cfg = cls(**data)
        if base_dir is not None:
            cfg.resolve_paths(Path(base_dir))
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        return cls.from_dict(data, base_dir=path.parent)

    def resolve_paths(self, base: Path) -> None:
        def fix(p):
            return str(p) if not p or Path(p).is_absolute() else str(base / p)
        self.graph = fix(self.graph)
        self.out = fix(self.out)
        self.attributes = [dict(a, path=fix(a.get("path", ""))) for a in self.attributes]

    # -- validation -----------------------------------------------------

    def validate(self) -> None:
        if not self.graph:
            raise ConfigError("graph path is required")
        if not Path(self.graph).is_file():
            raise ConfigError(f"graph file not found: {self.graph}")
        try:
            alphas = [float(a) for a in self.alphas]
        except (TypeError, ValueError):
            raise ConfigError(f"alphas must be numbers: {self.alphas!r}") from None
        if not alphas:
            raise ConfigError("at least one alpha is required")
        if any(not 0.0 <= a <= 1.0 for a in alphas):
            raise ConfigError(f"alphas must lie in [0, 1]: {alphas}")
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ConfigError(f"alphas must be distinct and ascending: {alphas}")
        self.alphas = alphas
        if int(self.trials) < 1:
            raise ConfigError("trials must be >= 1")
        ks = self.k_values()
        if min(ks) < 2:
            raise ConfigError("k must be >= 2")
        if self.analysis_k is not None and self.analysis_k not in ks:
            raise ConfigError("analysis_k must be one of the k values")
        if self.strategy not in sg.STRATEGIES:
            raise ConfigError(f"strategy must be one of {sg.STRATEGIES}")
        self._seed_count_spec(self.num_seeds)
        for m in self.seed_eval_m:
            self._seed_count_spec(m)
        bad = set(self.seed_eval_strategies) - set(SEED_EVAL_STRATEGIES)
        if bad:
            raise ConfigError(f"unknown seed-eval strategies: {sorted(bad)}")
        for name in ("correction", "restarts", "mc_trials", "bins"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if int(self.workers) < 0:
            raise ConfigError("workers must be >= 0")
        if not -(2**63) <= int(self.master_seed) < 2**63:
            raise ConfigError("master_seed must fit in a signed 64-bit integer")
        for spec in self.attributes:
            if not isinstance(spec, dict) or "path" not in spec:
                raise ConfigError("each attributes entry needs a 'path'")
            if not Path(spec["path"]).is_file():
                raise ConfigError(f"attribute file not found: {spec['path']}")
            for name, kind in spec.get("types", {}).items():
                if kind not in ("numeric", "categorical"):
                    raise ConfigError(f"attribute {name!r}: type must be numeric or categorical")

    @staticmethod
    def _seed_count_spec(value):
        if value is None or value == "sqrt" or value == "all":
            return
        try:
            m = int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"seed count must be an integer, 'sqrt' or 'all': {value!r}") from None
        if m < 1 or m != value and str(m) != str(value):
            raise ConfigError(f"seed count must be a positive integer: {value!r}")

    def k_values(self) -> list[int]:
        return parse_k(self.k)

    def worker_count(self) -> int:
        return int(self.workers) or (os.cpu_count() or 1)

    def seed_count(self, n: int, value=None) -> int:
        value = self.num_seeds if value is None else value
        if self.strategy == "all" and value is None:
            return n
        if value is None or value == "sqrt":
            return sg.default_sample_size(n)
        if value == "all":
            return n
        m = int(value)
        if m > n:
            raise ConfigError(f"number of seeds {m} exceeds node count {n}")
        return m


def parse_k(value) -> list[int]:
    try:
        if isinstance(value, int):
            return [value]
        if isinstance(value, (list, tuple)):
            ks = sorted({int(v) for v in value})
        else:
            text = str(value).strip()
            if "-" in text or ".." in text:
                lo, hi = text.replace("..", "-").split("-", 1)
                ks = list(range(int(lo), int(hi) + 1))
            else:
                ks = [int(text)]
    except (TypeError, ValueError):
        raise ConfigError(f"k must be an integer or a range like 2-10: {value!r}") from None
    if not ks:
        raise ConfigError(f"empty k range: {value!r}")
    return ks


def parse_alphas(text: str) -> list[float]:
    try:
        return [float(a) for a in text.split(",") if a.strip()]
    except ValueError:
        raise ConfigError(f"alpha list must be comma-separated numbers: {text!r}") from None


# -- workspace ----------------------------------------------------------------

def alpha_tag(alpha: float) -> str:
    return f"alpha_{alpha:.6g}"


class Workspace:
    """Loaded inputs plus path helpers for one configured run."""

    def __init__(self, config: ExperimentConfig):
        config.validate()
        self.config = config
        self.out = Path(config.out)
        try:
            raw = gr.load_edge_list(config.graph, config.directed)
        except (gr.GraphFormatError, OSError, UnicodeDecodeError) as exc:
            raise DataError(str(exc)) from exc
        self.raw_graph = raw
        self.graph = gr.largest_connected_component(raw) if config.lcc else raw
        n = self.graph.node_count
        if config.strategy == "all" and config.num_seeds not in (None, "all", n):
            raise ConfigError("strategy 'all' uses every node; drop num_seeds")
        self.m = config.seed_count(n)
        self._seed_set = None

    def path(self, *parts) -> Path:
        p = self.out.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def params(self, alpha: float) -> CascadeParams:
        c = self.config
        return CascadeParams(alpha, int(c.trials), int(c.master_seed))

    def rep_prefix(self, alpha: float) -> Path:
        return self.path("signatures", alpha_tag(alpha), "representation")

    def cluster_path(self, alpha: float, k: int) -> Path:
        return self.path("clusters", alpha_tag(alpha), f"k_{k}.csv")

    def require(self, path: Path, command: str) -> Path:
        if not path.exists():
            raise DataError(f"missing artifact {path}; run `infoaccess {command}` first")
        return path

    # shared seed set --------------------------------------------------------

    def seed_set(self) -> sg.SeedSet:
        if self._seed_set is not None:
            return self._seed_set
        c, g = self.config, self.graph
        path = self.path("seeds.json")
        if path.exists():
            data = json.loads(path.read_text())
            if (data["strategy"] == c.strategy and data["m"] == self.m
                    and data["master_seed"] == c.master_seed
                    and data["graph_hash"] == g.content_hash()):
                self._seed_set = sg.SeedSet(tuple(g.index_of(s) for s in data["seeds"]), c.strategy)
                return self._seed_set
        seeds = sg.select_seeds(g, c.strategy, self.m, c.master_seed)
        write_json(path, {
            "strategy": seeds.strategy,
            "m": seeds.m,
            "n": g.node_count,
            "master_seed": c.master_seed,
            "graph_hash": g.content_hash(),
            "seeds": [g.node_ids[s] for s in seeds.seeds],
            "sample_size_rule": sg.SAMPLE_SIZE_RULE,
            "sample_size_note": sg.SAMPLE_SIZE_NOTE,
        })
        self._seed_set = seeds
        return seeds

    def representation(self, alpha: float, build: bool = True) -> sg.Representation:
        prefix = self.rep_prefix(alpha)
        if prefix.with_suffix(".csv").exists():
            rep = sg.load_representation(prefix)
            if (rep.graph_hash == self.graph.content_hash() and rep.trials == self.config.trials
                    and rep.master_seed == self.config.master_seed
                    and rep.seed_set.seeds == self.seed_set().seeds):
                return rep
        if not build:
            self.require(prefix.with_suffix(".csv"), "signatures")
        return self._build_representation(alpha)

    def _build_representation(self, alpha: float) -> sg.Representation:
        prefix = self.rep_prefix(alpha)
        seeds = self.seed_set()
        log.info("building representation alpha=%g (n=%d, m=%d, trials=%d)",
                 alpha, self.graph.node_count, seeds.m, self.config.trials)
        rep = sg.build_representation(
            self.graph, seeds, self.params(alpha), workers=self.config.worker_count(),
            checkpoint_dir=prefix.parent / "checkpoint",
        )
        sg.save_representation(rep, prefix)
        hist = sg.p_histogram(rep, self.config.bins)
        write_json(prefix.parent / "histogram.json", dict(hist.to_dict(), alpha=alpha))
        return rep


# -- io helpers ------------------------------------------------------------------

def write_json(path: Path, data) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def save_clustering(path: Path, c: cl.Clustering, node_ids) -> None:
    write_csv(path, ["node_id", "label"], zip(node_ids, c.labels.tolist()))
    write_json(path.with_suffix(".json"), c.metadata())


def load_clustering(path: Path, g: gr.Graph) -> cl.Clustering:
    _, rows = read_csv(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    labels = np.empty(g.node_count, dtype=np.int64)
    for node, lab in rows:
        labels[g.index_of(node)] = int(lab)
    return cl.Clustering(labels, meta["k"], meta["inertia"], meta["method"],
                         meta["alpha"], meta["master_seed"])


def update_manifest(out: Path) -> Path:
    """Hash every artifact under ``out`` (checkpoints excluded)."""
    entries = {}
    for p in sorted(out.rglob("*")):
        rel = p.relative_to(out).as_posix()
        if not p.is_file() or rel == "manifest.json" or "/checkpoint/" in f"/{rel}":
            continue
        entries[rel] = hashlib.sha256(p.read_bytes()).hexdigest()
    return write_json(out / "manifest.json", {"sha256": entries})


def _fmt(x) -> str:
    return repr(float(x))


# -- commands ------------------------------------------------------------------

def cmd_validate(config: ExperimentConfig) -> dict:
    ws = Workspace(config)
    for spec in config.attributes:
        _load_attribute_spec(ws, spec)
    return {
        "nodes": ws.graph.node_count,
        "edges": ws.graph.edge_count,
        "nodes_before_component_extraction": ws.raw_graph.node_count,
        "directed": ws.graph.directed,
        "m": ws.m,
        "alphas": config.alphas,
        "k": config.k_values(),
    }


def cmd_signatures(config: ExperimentConfig, ws: Workspace | None = None) -> list[Path]:
    ws = ws or Workspace(config)
    write_json(ws.path("graph.json"), {
        "nodes": ws.graph.node_count,
        "edges": ws.graph.edge_count,
        "directed": ws.graph.directed,
        "graph_hash": ws.graph.content_hash(),
        "largest_component": config.lcc,
        "nodes_before_component_extraction": ws.raw_graph.node_count,
    })
    ws.seed_set()
    written = []
    for alpha in config.alphas:
        ws.representation(alpha)
        written.append(ws.rep_prefix(alpha).with_suffix(".csv"))
    update_manifest(ws.out)
    return written


def cmd_cluster(config: ExperimentConfig, ws: Workspace | None = None) -> dict:
    ws = ws or Workspace(config)
    c = config
    ks = c.k_values()
    n = ws.graph.node_count
    if max(ks) > n:
        raise ConfigError(f"k={max(ks)} exceeds node count {n}")
    sil_rows, elbow_rows, selected = [], [], {}
    previous: dict[int, cl.Clustering] = {}
    for alpha in c.alphas:
        x = ws.representation(alpha).matrix
        best = None
        for k in ks:
            km = cl.kmeans(x, k, restarts=c.restarts, master_seed=c.master_seed, alpha=alpha)
            if k in previous:
                km = cl.align_cluster_labels(previous[k], km)
            previous[k] = km
            save_clustering(ws.cluster_path(alpha, k), km, ws.graph.node_ids)
            elbow_rows.append([f"{alpha:g}", k, _fmt(km.inertia)])
            try:
                s = cl.silhouette(x, km.labels)
            except ValueError as exc:
                log.warning("alpha=%g k=%d: %s", alpha, k, exc)
                sil_rows.append([f"{alpha:g}", k, "", str(exc)])
                continue
            sil_rows.append([f"{alpha:g}", k, _fmt(s), ""])
            if best is None or s > best[0]:
                best = (s, k)
        selected[f"{alpha:g}"] = None if best is None else best[1]
    write_csv(ws.path("clusters", "silhouette.csv"), ["alpha", "k", "silhouette", "error"], sil_rows)
    write_csv(ws.path("clusters", "elbow.csv"), ["alpha", "k", "inertia"], elbow_rows)
    analysis_k = _analysis_k(c, selected)
    result = {"per_alpha": selected, "analysis_k": analysis_k}
    write_json(ws.path("clusters", "selected_k.json"), result)
    update_manifest(ws.out)
    return result


def _analysis_k(c: ExperimentConfig, selected: dict) -> int:
    ks = c.k_values()
    if c.analysis_k is not None:
        return int(c.analysis_k)
    if len(ks) == 1:
        return ks[0]
    votes = Counter(k for k in selected.values() if k is not None)
    if not votes:
        return ks[0]
    return min(votes, key=lambda k: (-votes[k], k))


def _load_analysis_k(ws: Workspace) -> int:
    path = ws.require(ws.out / "clusters" / "selected_k.json", "cluster")
    return int(json.loads(path.read_text())["analysis_k"])


def _info_clusterings(ws: Workspace, k: int) -> dict[float, cl.Clustering]:
    return {
        a: load_clustering(ws.require(ws.cluster_path(a, k), "cluster"), ws.graph)
        for a in ws.config.alphas
    }


def cmd_compare_spectral(config: ExperimentConfig, ws: Workspace | None = None) -> list[list]:
    ws = ws or Workspace(config)
    ws.require(ws.out / "clusters" / "selected_k.json", "cluster")
    rows = []
    for k in config.k_values():
        try:
            spec = cl.spectral_clustering(ws.graph, k, config.master_seed, config.restarts)
        except ValueError as exc:
            raise DataError(str(exc)) from exc
        save_clustering(ws.path("spectral", f"k_{k}.csv"), spec, ws.graph.node_ids)
        for alpha, info in _info_clusterings(ws, k).items():
            rows.append([f"{alpha:g}", k, _fmt(cl.adjusted_rand_index(info, spec))])
            if alpha == config.alphas[0]:
                rows.append([f"self:{alpha:g}", k, _fmt(cl.adjusted_rand_index(info, info))])
    write_csv(ws.path("spectral", "ari.csv"), ["alpha", "k", "ari"], rows)
    update_manifest(ws.out)
    return rows


def cmd_consistency(config: ExperimentConfig, ws: Workspace | None = None) -> np.ndarray:
    ws = ws or Workspace(config)
    if len(config.alphas) < 2:
        raise ConfigError("consistency needs at least two alpha values")
    k = _load_analysis_k(ws)
    cs = list(_info_clusterings(ws, k).values())
    m = np.array([[cl.adjusted_rand_index(a, b) for b in cs] for a in cs])
    np.fill_diagonal(m, 1.0)
    labels = [f"{a:g}" for a in config.alphas]
    write_csv(ws.path("consistency", "ari_matrix.csv"), ["alpha", *labels],
              [[lab, *[_fmt(v) for v in row]] for lab, row in zip(labels, m)])
    write_json(ws.path("consistency", "meta.json"), {"k": k, "alphas": config.alphas})
    update_manifest(ws.out)
    return m


def _load_attribute_spec(ws: Workspace, spec: dict) -> gr.AttributeTable:
    try:
        table = gr.load_attributes(spec["path"], ws.raw_graph, spec.get("types"))
    except (gr.GraphFormatError, TypeError, OSError) as exc:
        raise DataError(str(exc)) from exc
    return table.restrict(ws.graph)


def load_all_attributes(ws: Workspace) -> list[gr.AttributeTable]:
    return [_load_attribute_spec(ws, spec) for spec in ws.config.attributes]


def attribute_tests(labels, k, table: gr.AttributeTable, name: str,
                    mc_trials: int, master_seed: int) -> list[st.TestResult]:
    """Tests of one attribute against one clustering."""
    missing = table.missing(name)
    col = table.columns[name]
    n_missing = int(missing.sum())
    if n_missing == len(col):
        raise DataError(f"attribute {name!r} is missing for every node")
    keep = ~missing
    lab = np.asarray(labels)[keep]
    out = []
    if table.kinds[name] == "numeric":
        vals = col[keep]
        groups = [vals[lab == j] for j in range(k) if (lab == j).any()]
        if len(groups) >= 2 and len(vals) >= 3:
            r = st.kruskal_wallis(groups)
            out.append(_with_counts(r, len(vals), n_missing))
    else:
        ctab, _ = st.attribute_table(lab, list(col[keep]), k)
        ctab = ctab[ctab.sum(axis=1) > 0][:, ctab.sum(axis=0) > 0]
        if ctab.shape[0] >= 2 and ctab.shape[1] >= 2:
            r = st.fisher_exact_rxc(ctab, mc_trials, master_seed)
            out.append(_with_counts(r, int(ctab.sum()), n_missing))
    if n_missing:
        avail = np.zeros((k, 2), dtype=np.int64)
        np.add.at(avail, (np.asarray(labels), missing.astype(int)), 1)
        avail = avail[avail.sum(axis=1) > 0]
        if avail.shape[0] >= 2:
            r = st.chi_squared_independence(avail)
            out.append(_with_counts(r, len(col), 0))
    return out


def _with_counts(r: st.TestResult, n_used, n_missing) -> st.TestResult:
    return st.TestResult(r.test_name, float(r.statistic), r.p_value, r.correction_factor,
                         r.df, n_used, n_missing)


def cmd_attribute_tests(config: ExperimentConfig, ws: Workspace | None = None) -> dict:
    ws = ws or Workspace(config)
    if not config.attributes:
        raise ConfigError("no attribute files configured")
    k = _load_analysis_k(ws)
    tables = load_all_attributes(ws)
    methods = [("info_access", a, c) for a, c in _info_clusterings(ws, k).items()]
    spectral = ws.out / "spectral" / f"k_{k}.csv"
    if spectral.exists():
        methods.append(("spectral", None, load_clustering(spectral, ws.graph)))
    records = []
    for method, alpha, clus in methods:
        for table in tables:
            for name in table.columns:
                for r in attribute_tests(clus.labels, k, table, name,
                                         config.mc_trials, config.master_seed):
                    r = r.with_correction(config.correction)
                    records.append(dict(r.to_json(), method=method, alpha=alpha,
                                        k=k, attribute=name))
    summary = {}
    for rec in records:
        key = f"{rec['method']}|{rec['attribute']}|{rec['test']}"
        cur = summary.get(key)
        if cur is None or rec["p"] < cur["min_p"]:
            summary[key] = {
                "method": rec["method"], "attribute": rec["attribute"], "test": rec["test"],
                "min_p": rec["p"], "alpha": rec["alpha"],
                "corrected_min_p": st.bonferroni(rec["p"], config.correction),
                "rendered": st.format_corrected(st.bonferroni(rec["p"], config.correction)),
            }
    result = {"k": k, "correction": config.correction, "results": records,
              "summary": [summary[key] for key in sorted(summary)]}
    write_json(ws.path("attribute_tests", "results.json"), result)
    update_manifest(ws.out)
    return result


def cmd_seed_eval(config: ExperimentConfig, ws: Workspace | None = None) -> list[list]:
    """ARI of sampled-seed clusterings against the full-representation one.

    Sampled representations are column restrictions of the full one; with
    seed-independent coins this is exactly what a separate sampled run
    would produce.
    """
    ws = ws or Workspace(config)
    g = ws.graph
    ks = config.k_values()
    k = config.analysis_k or ks[0]
    full_seeds = sg.all_seeds(g)
    rows = []
    for alpha in config.alphas:
        prefix = ws.path("seed_eval", alpha_tag(alpha), "full")
        if ws.config.strategy == "all":
            full = ws.representation(alpha)
        elif prefix.with_suffix(".csv").exists():
            full = sg.load_representation(prefix)
        else:
            full = sg.build_representation(g, full_seeds, ws.params(alpha),
                                           workers=config.worker_count(),
                                           checkpoint_dir=prefix.parent / "checkpoint")
            sg.save_representation(full, prefix, binary=False)
        ref = cl.kmeans(full.matrix, k, config.restarts, master_seed=config.master_seed)
        for strategy in config.seed_eval_strategies:
            for m_spec in config.seed_eval_m:
                m = config.seed_count(g.node_count, m_spec)
                seeds = sg.select_seeds(g, strategy, m, config.master_seed)
                x = sg.restrict_columns(full, seeds)
                sub = cl.kmeans(x, k, config.restarts, master_seed=config.master_seed)
                rows.append([f"{alpha:g}", strategy, m, _fmt(cl.adjusted_rand_index(ref, sub))])
    write_csv(ws.path("seed_eval", "ari.csv"), ["alpha", "strategy", "m", "ari"], rows)
    update_manifest(ws.out)
    return rows


def cmd_report(config: ExperimentConfig, ws: Workspace | None = None) -> dict:
    from . import report

    ws = ws or Workspace(config)
    index = report.build_report(ws)
    update_manifest(ws.out)
    return index


def run_all(config: ExperimentConfig) -> None:
    ws = Workspace(config)
    cmd_signatures(config, ws)
    cmd_cluster(config, ws)
    cmd_compare_spectral(config, ws)
    if len(config.alphas) >= 2:
        cmd_consistency(config, ws)
    if config.attributes:
        cmd_attribute_tests(config, ws)
    cmd_report(config, ws)
