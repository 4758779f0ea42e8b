"""Small synthetic graphs used by the tests and the benchmark command."""

from __future__ import annotations

import itertools

import numpy as np

from .graph import Graph


def star_graph(leaves: int = 7) -> Graph:
    """Leaves ``1..leaves`` around a center ``t`` (the last index)."""
    ids = tuple(str(i) for i in range(1, leaves + 1)) + ("t",)
    return Graph.from_edges(leaves + 1, [(i, leaves) for i in range(leaves)], False, ids)


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, list(itertools.combinations(range(n), 2)))


def barbell_graph(clique: int = 5) -> Graph:
    left = list(itertools.combinations(range(clique), 2))
    right = [(u + clique, v + clique) for u, v in left]
    return Graph.from_edges(2 * clique, left + right + [(clique - 1, clique)])


def planted_partition(sizes, p_in: float, p_out: float, seed: int = 0,
                      directed: bool = False):
    """Stochastic block model; returns ``(graph, block_labels)``."""
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(sizes)), sizes)
    n = len(labels)
    prob = np.where(labels[:, None] == labels[None, :], p_in, p_out)
    hit = rng.random((n, n)) < prob
    if not directed:
        hit = np.triu(hit, 1)
    np.fill_diagonal(hit, False)
    edges = np.argwhere(hit)
    return Graph.from_edges(n, edges, directed), labels


def gnm_graph(n: int, m: int, seed: int = 0) -> Graph:
    """Uniform random simple undirected graph with exactly ``m`` edges."""
    if m > n * (n - 1) // 2:
        raise ValueError("too many edges")
    rng = np.random.default_rng(seed)
    chosen: set[tuple[int, int]] = set()
    while len(chosen) < m:
        u, v = rng.integers(0, n, size=2)
        if u != v:
            chosen.add((min(u, v), max(u, v)))
    return Graph.from_edges(n, sorted(chosen))


def random_components(sizes, extra_p: float = 0.3, seed: int = 0):
    """Disjoint union of random connected graphs (a spanning tree plus
    random extra edges per part); returns ``(graph, component_labels)``."""
    rng = np.random.default_rng(seed)
    edges, labels, offset = [], [], 0
    for c, size in enumerate(sizes):
        order = rng.permutation(size)
        for i in range(1, size):
            edges.append((offset + order[i], offset + order[rng.integers(i)]))
        for u, v in itertools.combinations(range(size), 2):
            if rng.random() < extra_p:
                edges.append((offset + u, offset + v))
        labels += [c] * size
        offset += size
    return Graph.from_edges(offset, edges), np.array(labels)
