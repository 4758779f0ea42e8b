"""Information access representations and seed-set selection.

Orientation: ``matrix[v, j]`` is the probability that node ``v`` receives
information seeded at ``seed_set.seeds[j]``. Row ``v`` is node ``v``'s
signature. On undirected graphs this coincides with the outgoing
orientation because receipt probabilities are symmetric.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import graph as gr
from .cascade import CascadeParams, receipt_counts, trial_blocks

STRATEGIES = ("random", "pagerank", "betweenness", "degree", "all")
SAMPLE_SIZE_RULE = "ceil(sqrt(n))"
SAMPLE_SIZE_NOTE = (
    "default m is the ceiling of sqrt(n); e.g. n=391642 gives 626, not 632"
)
IARP_MAGIC = b"IARP"
IARP_VERSION = 1


@dataclass(frozen=True)
class SeedSet:
    seeds: tuple[int, ...]
    strategy: str

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if not self.seeds:
            raise ValueError("seed set is empty")

    @property
    def m(self) -> int:
        return len(self.seeds)

    def validate_for(self, g: gr.Graph) -> None:
        if min(self.seeds) < 0 or max(self.seeds) >= g.node_count:
            raise ValueError("seed outside graph")
        if (self.strategy == "all") != (self.m == g.node_count):
            raise ValueError("strategy 'all' requires m == n (and only then)")


@dataclass
class Representation:
    matrix: np.ndarray
    seed_set: SeedSet
    alpha: float
    trials: int
    master_seed: int
    node_ids: tuple[str, ...] = ()
    graph_hash: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def seed_ids(self) -> list[str]:
        return [self.node_ids[s] for s in self.seed_set.seeds]

    def metadata(self) -> dict:
        meta = {
            "alpha": self.alpha,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "strategy": self.seed_set.strategy,
            "m": self.seed_set.m,
            "n": int(self.matrix.shape[0]),
            "seeds": self.seed_ids,
            "graph_hash": self.graph_hash,
            "orientation": "row v, column s = P(v receives information seeded at s)",
            "sample_size_rule": SAMPLE_SIZE_RULE,
            "sample_size_note": SAMPLE_SIZE_NOTE,
        }
        meta.update(self.extra)
        return meta


def default_sample_size(n: int) -> int:
    if n < 1:
        raise ValueError("n must be positive")
    r = math.isqrt(n)
    return r if r * r == n else r + 1


def _top_m(score: np.ndarray, m: int) -> tuple[int, ...]:
    # quantize so float noise cannot break exact ties; ties go to lower index
    top = score.max()
    key = np.round(score / top, 9) if top > 0 else np.zeros_like(score)
    order = np.lexsort((np.arange(len(score)), -key))
    return tuple(int(i) for i in order[:m])


def select_seeds(g: gr.Graph, strategy: str, m: int, master_seed: int = 0) -> SeedSet:
    n = g.node_count
    if not 1 <= m <= n:
        raise ValueError(f"m must lie in [1, {n}], got {m}")
    if strategy == "all":
        if m != n:
            raise ValueError("strategy 'all' uses every node (m == n)")
        return SeedSet(tuple(range(n)), "all")
    if strategy == "random":
        rng = np.random.default_rng(int(master_seed) & 0xFFFFFFFFFFFFFFFF)
        return SeedSet(tuple(int(i) for i in rng.choice(n, size=m, replace=False)), "random")
    if strategy == "pagerank":
        score = gr.pagerank(g)
    elif strategy == "betweenness":
        score = gr.betweenness(g)
    elif strategy == "degree":
        score = gr.degree_centrality(g)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return SeedSet(_top_m(score, m), strategy)


def all_seeds(g: gr.Graph) -> SeedSet:
    return select_seeds(g, "all", g.node_count)


def build_representation(g: gr.Graph, seed_set: SeedSet, params: CascadeParams,
                         workers: int = 1, checkpoint_dir=None,
                         block: int = 500) -> Representation:
    """Estimate receipt probabilities for every node from every seed.

    With ``checkpoint_dir`` set, integer counts of each finished trial block
    are saved there and reused on the next call, so interrupted runs resume.
    """
    seed_set.validate_for(g)
    sources = np.asarray(seed_set.seeds, dtype=np.int64)
    m = seed_set.m
    if checkpoint_dir is None:
        counts = receipt_counts(g, sources, params, workers=workers, block=block)
    else:
        counts = _checkpointed_counts(g, sources, params, workers, block, Path(checkpoint_dir))
    matrix = counts / float(params.trials)
    matrix[sources, np.arange(m)] = 1.0
    return Representation(
        matrix=matrix,
        seed_set=seed_set,
        alpha=float(params.alpha),
        trials=int(params.trials),
        master_seed=int(params.master_seed),
        node_ids=g.node_ids,
        graph_hash=g.content_hash(),
    )


def _checkpointed_counts(g, sources, params, workers, block, ckpt: Path):
    ckpt.mkdir(parents=True, exist_ok=True)
    stamp = {
        "graph_hash": g.content_hash(),
        "alpha": float(params.alpha),
        "master_seed": int(params.master_seed),
        "sources": [int(s) for s in sources],
    }
    stamp_path = ckpt / "stamp.json"
    if stamp_path.exists():
        if json.loads(stamp_path.read_text()) != stamp:
            for f in ckpt.glob("block_*.npy"):
                f.unlink()
    stamp_path.write_text(json.dumps(stamp))
    total = np.zeros((g.node_count, len(sources)), dtype=np.int64)
    for t0, t1 in trial_blocks(params.trials, block):
        f = ckpt / f"block_{t0:09d}_{t1:09d}.npy"
        if f.exists():
            part = np.load(f)
        else:
            part = receipt_counts(g, sources, params, t0, t1, workers=workers, block=max(1, block // max(workers, 1)))
            tmp = f.with_suffix(".tmp.npy")
            np.save(tmp, part)
            tmp.replace(f)
        total += part
    return total


def restrict_columns(rep: Representation, seed_set: SeedSet) -> np.ndarray:
    """Columns of a full representation matching ``seed_set``'s seeds."""
    if rep.seed_set.strategy != "all":
        raise ValueError("column restriction needs a full representation")
    return rep.matrix[:, list(seed_set.seeds)]


@dataclass(frozen=True)
class PHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    def to_dict(self) -> dict:
        return {"bin_edges": self.bin_edges.tolist(), "counts": self.counts.tolist()}


def p_histogram(rep: Representation | np.ndarray, num_bins: int = 10) -> PHistogram:
    if num_bins < 1:
        raise ValueError("num_bins must be >= 1")
    matrix = rep.matrix if isinstance(rep, Representation) else np.asarray(rep)
    edges = np.linspace(0.0, 1.0, num_bins + 1)
    counts, _ = np.histogram(matrix.ravel(), bins=edges)  # last bin right-closed
    return PHistogram(edges, counts.astype(np.int64))


# -- persistence -------------------------------------------------------------

def save_representation(rep: Representation, prefix, binary: bool = True) -> list[Path]:
    """Write ``prefix.csv`` + ``prefix.json`` (and ``prefix.iarp``)."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path = prefix.with_suffix(".csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["node_id", *rep.seed_ids]) + "\n")
        for node, row in zip(rep.node_ids, rep.matrix):
            fh.write(node + "," + ",".join(repr(float(x)) for x in row) + "\n")
    json_path = prefix.with_suffix(".json")
    json_path.write_text(json.dumps(rep.metadata(), indent=2, sort_keys=True) + "\n")
    out = [csv_path, json_path]
    if binary:
        out.append(write_iarp(prefix.with_suffix(".iarp"), rep.matrix))
    return out


def load_representation(prefix) -> Representation:
    prefix = Path(prefix)
    meta = json.loads(prefix.with_suffix(".json").read_text())
    with open(prefix.with_suffix(".csv"), encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        node_ids, rows = [], []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            node_ids.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    index = {v: i for i, v in enumerate(node_ids)}
    seeds = tuple(index[s] for s in header[1:])
    known = {"alpha", "trials", "master_seed", "strategy", "m", "n", "seeds",
             "graph_hash", "orientation", "sample_size_rule", "sample_size_note"}
    return Representation(
        matrix=np.array(rows, dtype=np.float64).reshape(len(node_ids), len(seeds)),
        seed_set=SeedSet(seeds, meta["strategy"]),
        alpha=meta["alpha"],
        trials=meta["trials"],
        master_seed=meta["master_seed"],
        node_ids=tuple(node_ids),
        graph_hash=meta.get("graph_hash", ""),
        extra={k: v for k, v in meta.items() if k not in known},
    )


def write_iarp(path, matrix) -> Path:
    """Binary layout: b"IARP", version byte, little-endian uint64 rows and
    columns, then row-major little-endian float32 values."""
    path = Path(path)
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(IARP_MAGIC)
        fh.write(struct.pack("<BQQ", IARP_VERSION, *matrix.shape))
        fh.write(matrix.tobytes())
    return path


def read_iarp(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != IARP_MAGIC:
            raise ValueError(f"{path}: not an IARP file")
        version, n, m = struct.unpack("<BQQ", fh.read(17))
        if version != IARP_VERSION:
            raise ValueError(f"{path}: unsupported IARP version {version}")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != n * m:
        raise ValueError(f"{path}: truncated payload")
    return data.reshape(n, m).astype(np.float32)
