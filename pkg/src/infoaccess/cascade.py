"""Independent cascade simulation and its bond-percolation counterparts.

Randomness
----------
Every edge coin is a counter-based draw: ``u = H(stream_key(seed, trial), edge_id)``
with a splitmix64-style mixer, and the edge is live when ``u < alpha``.
Consequences the rest of the package relies on:

* results never depend on scheduling, worker count or call order;
* an undirected edge has one coin per trial, so a cascade started anywhere
  in trial ``t`` activates exactly the component of its seeds in the
  live-edge graph of trial ``t``;
* coins do not depend on the seed node, so a single union-find pass per
  trial yields the cascade outcome for every possible source at once
  (``receipt_counts`` uses this), and raising ``alpha`` only adds live
  edges (coin-threshold coupling).

``percolation_cooccurrence_sample`` draws from a separate stream so that
it is an independent estimator of the same expectation.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .graph import Graph

CASCADE_STREAM = 0x43415343  # "CASC"
PERCOLATION_STREAM = 0x50455243  # "PERC"
DEFAULT_TRIALS = 10_000
MAX_EXACT_EDGES = 24
_BIG_COMPONENT = 48
_GEMM_BATCH = 512


@dataclass(frozen=True)
class CascadeParams:
    alpha: float
    trials: int = DEFAULT_TRIALS
    master_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if int(self.trials) < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not -(2**63) <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must fit in 64 bits")


# -- counter-based coins ---------------------------------------------------

@numba.njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, inline="always")
def _trial_key(seed, stream, trial):
    golden = np.uint64(0x9E3779B97F4A7C15)
    k = _mix(seed + golden * np.uint64(stream))
    return _mix(k + golden * (np.uint64(trial) + np.uint64(1)))


@numba.njit(cache=True, inline="always")
def _live(key, edge, alpha):
    h = _mix(key ^ (np.uint64(edge) * np.uint64(0xD6E8FEB86659FD93)))
    u = np.float64(h >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    return u < alpha


def _seed64(master_seed: int) -> np.uint64:
    return np.uint64(int(master_seed) & 0xFFFFFFFFFFFFFFFF)


def _key(master_seed: int, stream: int, trial: int) -> np.uint64:
    return np.uint64(_trial_key(_seed64(master_seed), stream, trial))


# -- independent cascade (breadth-first, lazily revealed coins) -------------

@numba.njit(cache=True, nogil=True)
def _cascade(indptr, indices, arc_edge, seeds, alpha, key, active, queue):
    """Run one cascade; ``active`` must be all-False on entry.

    Returns the number of activated nodes, which sit in ``queue[:count]``.
    """
    tail = 0
    for s in seeds:
        if not active[s]:
            active[s] = True
            queue[tail] = s
            tail += 1
    head = 0
    while head < tail:
        v = queue[head]
        head += 1
        for a in range(indptr[v], indptr[v + 1]):
            w = indices[a]
            if not active[w] and _live(key, arc_edge[a], alpha):
                active[w] = True
                queue[tail] = w
                tail += 1
    return tail


@numba.njit(cache=True, nogil=True)
def _cascade_counts(n, indptr, indices, arc_edge, seeds, alpha, seed, t0, t1):
    counts = np.zeros(n, dtype=np.int64)
    active = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    for t in range(t0, t1):
        key = _trial_key(seed, CASCADE_STREAM, t)
        m = _cascade(indptr, indices, arc_edge, seeds, alpha, key, active, queue)
        for i in range(m):
            v = queue[i]
            counts[v] += 1
            active[v] = False
    return counts


def _check_trial(params: CascadeParams, trial_index: int):
    if not 0 <= trial_index < params.trials:
        raise ValueError(f"trial_index {trial_index} outside [0, {params.trials})")


def simulate_cascade(g: Graph, seeds, params: CascadeParams, trial_index: int) -> np.ndarray:
    """Sorted indices of the nodes activated in one cascade run."""
    seeds = np.unique(np.asarray(list(seeds), dtype=np.int64))
    if len(seeds) == 0:
        raise ValueError("seed set is empty")
    if seeds[0] < 0 or seeds[-1] >= g.node_count:
        raise ValueError("seed outside graph")
    _check_trial(params, trial_index)
    n = g.node_count
    active = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    key = _key(params.master_seed, CASCADE_STREAM, trial_index)
    m = _cascade(g.indptr, g.indices, g.arc_edge, seeds, float(params.alpha), key, active, queue)
    return np.sort(queue[:m])


def estimate_receipt_probabilities(g: Graph, source: int, params: CascadeParams) -> np.ndarray:
    """Fraction of trials in which each node received a cascade seeded at ``source``."""
    if not 0 <= source < g.node_count:
        raise ValueError(f"source {source} outside graph")
    counts = _cascade_counts(
        g.node_count, g.indptr, g.indices, g.arc_edge,
        np.array([source], dtype=np.int64), float(params.alpha),
        _seed64(params.master_seed), 0, int(params.trials),
    )
    probs = counts / params.trials
    probs[source] = 1.0
    return probs


# -- bond percolation -------------------------------------------------------

@numba.njit(cache=True, inline="always")
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True, nogil=True)
def _live_labels(n, edges, alpha, key, parent):
    for i in range(n):
        parent[i] = i
    for e in range(edges.shape[0]):
        if _live(key, e, alpha):
            ru = _find(parent, edges[e, 0])
            rv = _find(parent, edges[e, 1])
            if ru != rv:
                if ru < rv:
                    parent[rv] = ru
                else:
                    parent[ru] = rv
    for i in range(n):
        parent[i] = _find(parent, i)


@numba.njit(cache=True, nogil=True)
def _labels_batch(n, edges, alpha, seed, stream, t0, t1):
    out = np.empty((t1 - t0, n), dtype=np.int64)
    for t in range(t0, t1):
        key = _trial_key(seed, stream, t)
        _live_labels(n, edges, alpha, key, out[t - t0])
    return out


@numba.njit(cache=True, nogil=True)
def _reach_matrix(n, indptr, indices, arc_edge, alpha, key):
    """Directed live-edge reachability: out[i, j] = 1 iff j reachable from i."""
    out = np.zeros((n, n), dtype=np.float64)
    active = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    seed = np.empty(1, dtype=np.int64)
    for i in range(n):
        seed[0] = i
        m = _cascade(indptr, indices, arc_edge, seed, alpha, key, active, queue)
        for q in range(m):
            out[i, queue[q]] = 1.0
            active[queue[q]] = False
    return out


def percolation_cooccurrence_sample(g: Graph, params: CascadeParams, trial_index: int) -> np.ndarray:
    """One draw of the co-membership matrix of a bond-percolated graph.

    Each edge survives with probability ``alpha``. Undirected graphs give
    the symmetric same-component indicator; directed graphs give live-edge
    reachability (row i, column j set when j is reachable from i).
    """
    _check_trial(params, trial_index)
    n = g.node_count
    key = _key(params.master_seed, PERCOLATION_STREAM, trial_index)
    if g.directed:
        return _reach_matrix(n, g.indptr, g.indices, g.arc_edge, float(params.alpha), key)
    labels = np.empty(n, dtype=np.int64)
    _live_labels(n, g.edges, float(params.alpha), key, labels)
    return (labels[:, None] == labels[None, :]).astype(np.float64)


@numba.njit(cache=True, nogil=True)
def _cooccurrence_sum(n, edges, alpha, seed, trials):
    total = np.zeros((n, n), dtype=np.int64)
    labels = np.empty(n, dtype=np.int64)
    for t in range(trials):
        key = _trial_key(seed, PERCOLATION_STREAM, t)
        _live_labels(n, edges, alpha, key, labels)
        for i in range(n):
            for j in range(n):
                if labels[i] == labels[j]:
                    total[i, j] += 1
    return total


def percolation_cooccurrence_mean(g: Graph, params: CascadeParams) -> np.ndarray:
    """Average of ``percolation_cooccurrence_sample`` over trials ``0..trials-1``."""
    n = g.node_count
    alpha = float(params.alpha)
    if g.directed:
        total = np.zeros((n, n))
        for t in range(params.trials):
            key = _key(params.master_seed, PERCOLATION_STREAM, t)
            total += _reach_matrix(n, g.indptr, g.indices, g.arc_edge, alpha, key)
        return total / params.trials
    total = _cooccurrence_sum(n, g.edges, alpha, _seed64(params.master_seed), int(params.trials))
    return total / params.trials


# -- exact expectation by subset enumeration --------------------------------

@numba.njit(cache=True)
def _subset_counts(n, edges, directed):
    """agg[k, i, j] = number of edge subsets with k kept edges where j is
    reached from i (same component when undirected)."""
    ne = edges.shape[0]
    agg = np.zeros((ne + 1, n, n), dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    adj = np.zeros((n, n), dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    seen = np.zeros(n, dtype=np.bool_)
    for mask in range(1 << ne):
        kept = 0
        if directed:
            adj[:, :] = False
            for e in range(ne):
                if (mask >> e) & 1:
                    adj[edges[e, 0], edges[e, 1]] = True
                    kept += 1
            for i in range(n):
                seen[:] = False
                seen[i] = True
                queue[0] = i
                head = 0
                tail = 1
                while head < tail:
                    v = queue[head]
                    head += 1
                    for w in range(n):
                        if adj[v, w] and not seen[w]:
                            seen[w] = True
                            queue[tail] = w
                            tail += 1
                for q in range(tail):
                    agg[kept, i, queue[q]] += 1
        else:
            for i in range(n):
                parent[i] = i
            for e in range(ne):
                if (mask >> e) & 1:
                    kept += 1
                    ru = _find(parent, edges[e, 0])
                    rv = _find(parent, edges[e, 1])
                    if ru != rv:
                        parent[rv] = ru
            for i in range(n):
                parent[i] = _find(parent, i)
            for i in range(n):
                for j in range(n):
                    if parent[i] == parent[j]:
                        agg[kept, i, j] += 1
    return agg


def exact_probabilities(g: Graph, alpha: float) -> np.ndarray:
    """Exact expected co-membership (undirected) or reachability (directed)
    matrix, by enumerating all edge subsets. Entry (i, j) is the probability
    that a cascade seeded at i reaches j."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    ne = g.edge_count
    if ne > MAX_EXACT_EDGES:
        raise ValueError(
            f"{ne} edges exceeds the enumeration cap of {MAX_EXACT_EDGES}; "
            "use the Monte Carlo estimators instead"
        )
    agg = _subset_counts(g.node_count, g.edges, g.directed)
    k = np.arange(ne + 1)
    weights = alpha ** k * (1.0 - alpha) ** (ne - k)
    out = np.tensordot(weights, agg, axes=1)
    np.fill_diagonal(out, 1.0)
    if not g.directed:
        out = (out + out.T) / 2.0
    return out


# -- batched receipt counts for many sources --------------------------------

@numba.njit(cache=True, nogil=True)
def _accumulate(labels, col_of, counts, big_threshold):
    """Add same-component hits for small components straight into ``counts``
    (n x m, column c belongs to the node v with col_of[v] == c); return the
    (row, label) pairs of components too large for the scalar loop."""
    nt, n = labels.shape
    size = np.zeros(n, dtype=np.int64)
    start = np.empty(n + 1, dtype=np.int64)
    members = np.empty(n, dtype=np.int64)
    fill = np.empty(n, dtype=np.int64)
    big = np.empty((nt * (n // big_threshold + 1), 2), dtype=np.int64)
    nbig = 0
    for r in range(nt):
        lab = labels[r]
        size[:] = 0
        for v in range(n):
            size[lab[v]] += 1
        start[0] = 0
        for c in range(n):
            start[c + 1] = start[c] + size[c]
            fill[c] = start[c]
        for v in range(n):
            c = lab[v]
            members[fill[c]] = v
            fill[c] += 1
        for c in range(n):
            sz = size[c]
            if sz < 2:
                continue
            if sz >= big_threshold:
                big[nbig, 0] = r
                big[nbig, 1] = c
                nbig += 1
                continue
            for a in range(start[c], start[c + 1]):
                s = members[a]
                col = col_of[s]
                if col < 0:
                    continue
                for b in range(start[c], start[c + 1]):
                    u = members[b]
                    if u != s:
                        counts[u, col] += 1
    return big[:nbig]


def _undirected_block(g: Graph, sources, alpha, seed, t0, t1):
    n, m = g.node_count, len(sources)
    counts = np.zeros((n, m), dtype=np.int64)
    col_of = np.full(n, -1, dtype=np.int64)
    col_of[sources] = np.arange(m)
    labels = _labels_batch(n, g.edges, alpha, seed, CASCADE_STREAM, t0, t1)
    big = _accumulate(labels, col_of, counts, _BIG_COMPONENT)
    # large components: indicator columns, summed as X X^T with BLAS
    src = np.asarray(sources)
    for b0 in range(0, len(big), _GEMM_BATCH):
        chunk = big[b0:b0 + _GEMM_BATCH]
        x = (labels[chunk[:, 0]] == chunk[:, 1:2]).T.astype(np.float32)
        prod = x @ x[src].T
        counts += np.rint(prod).astype(np.int64)
    # diagonal hits (a source always holds its own message) are handled by the
    # caller; drop the ones the GEMM added
    counts[src, np.arange(m)] = 0
    return counts


def _directed_block(g: Graph, sources, alpha, seed, t0, t1):
    n = g.node_count
    counts = np.zeros((n, len(sources)), dtype=np.int64)
    one = np.empty(1, dtype=np.int64)
    for j, s in enumerate(sources):
        one[0] = s
        counts[:, j] = _cascade_counts(
            n, g.indptr, g.indices, g.arc_edge, one, alpha, seed, t0, t1
        )
        counts[s, j] = 0
    return counts


def trial_blocks(trials: int, block: int):
    return [(t, min(t + block, trials)) for t in range(0, trials, block)]


def receipt_counts(g: Graph, sources, params: CascadeParams, t0: int = 0,
                   t1: int | None = None, workers: int = 1,
                   block: int = 500) -> np.ndarray:
    """Integer receipt counts over trials ``[t0, t1)``: entry (v, j) counts
    the trials in which node v received the cascade seeded at ``sources[j]``.

    Source diagonal entries are left at 0. Column j equals
    ``estimate_receipt_probabilities(g, sources[j], params) * trials`` off
    the source, for any choice of ``workers`` and ``block``.
    """
    t1 = params.trials if t1 is None else t1
    sources = np.asarray(sources, dtype=np.int64)
    alpha = float(params.alpha)
    seed = _seed64(params.master_seed)
    fn = _directed_block if g.directed else _undirected_block
    blocks = trial_blocks(t1 - t0, block)
    jobs = [(t0 + a, t0 + b) for a, b in blocks]
    total = np.zeros((g.node_count, len(sources)), dtype=np.int64)
    if workers <= 1 or len(jobs) == 1:
        for a, b in jobs:
            total += fn(g, sources, alpha, seed, a, b)
        return total
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(lambda ab: fn(g, sources, alpha, seed, *ab), jobs):
            total += part
    return total


def write_probability_csv(path, g: Graph, probs) -> None:
    """Debug dump: ``node_id,probability`` lines."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("node_id,probability\n")
        for node, p in zip(g.node_ids, probs):
            fh.write(f"{node},{float(p)!r}\n")
