"""Graph storage, edge-list/attribute ingestion and centralities.

Nodes are densely indexed ``0..n-1`` in first-appearance order; the
external string identifiers live in ``Graph.node_ids``. Adjacency is kept
in CSR form (``indptr``/``indices``), undirected edges stored in both
directions. ``arc_edge`` maps every stored arc to its edge id so that an
undirected edge has a single id shared by both of its arcs.
"""

from __future__ import annotations

import csv
import hashlib
import math
import re
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components


class GraphFormatError(ValueError):
    """Raised for unreadable edge-list or attribute files."""


@dataclass(frozen=True, eq=False)
class Graph:
    node_ids: tuple[str, ...]
    directed: bool
    indptr: np.ndarray
    indices: np.ndarray
    arc_edge: np.ndarray
    edges: np.ndarray  # (num_edges, 2); for undirected graphs u < v
    _index: dict = field(default=None, repr=False)

    @classmethod
    def from_edges(cls, n, edges, directed=False, node_ids=None) -> "Graph":
        """Build a graph on ``n`` nodes from integer pairs.

        Self-loops are dropped and duplicate edges collapsed.
        """
        if node_ids is None:
            node_ids = tuple(str(i) for i in range(n))
        node_ids = tuple(node_ids)
        if len(node_ids) != n or len(set(node_ids)) != n:
            raise ValueError("node_ids must be n distinct identifiers")
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise ValueError("edge endpoint out of range")
        e = e[e[:, 0] != e[:, 1]]
        if not directed:
            e = np.sort(e, axis=1)
        e = np.unique(e, axis=0) if len(e) else e.reshape(0, 2)

        eid = np.arange(len(e), dtype=np.int64)
        if directed:
            src, dst, arc_eid = e[:, 0], e[:, 1], eid
        else:
            src = np.concatenate([e[:, 0], e[:, 1]])
            dst = np.concatenate([e[:, 1], e[:, 0]])
            arc_eid = np.concatenate([eid, eid])
        order = np.lexsort((dst, src))
        src, dst, arc_eid = src[order], dst[order], arc_eid[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(
            node_ids=node_ids,
            directed=bool(directed),
            indptr=indptr,
            indices=dst.astype(np.int64),
            arc_edge=arc_eid.astype(np.int64),
            edges=e,
            _index={v: i for i, v in enumerate(node_ids)},
        )

    @property
    def node_count(self) -> int:
        return len(self.node_ids)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(i).tolist() for i in range(self.node_count)]

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def index_of(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError:
            raise KeyError(f"unknown node {node_id!r}") from None

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def to_sparse(self) -> csr_matrix:
        n = self.node_count
        data = np.ones(len(self.indices), dtype=np.float64)
        return csr_matrix((data, self.indices, self.indptr), shape=(n, n))

    def subgraph(self, nodes) -> "Graph":
        """Induced subgraph on ``nodes`` (kept in ascending index order)."""
        nodes = np.unique(np.asarray(nodes, dtype=np.int64))
        remap = np.full(self.node_count, -1, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        keep = (remap[self.edges[:, 0]] >= 0) & (remap[self.edges[:, 1]] >= 0)
        sub_edges = remap[self.edges[keep]]
        ids = tuple(self.node_ids[i] for i in nodes)
        return Graph.from_edges(len(nodes), sub_edges, self.directed, ids)

    def symmetrized(self) -> "Graph":
        if not self.directed:
            return self
        return Graph.from_edges(self.node_count, self.edges, False, self.node_ids)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(b"D" if self.directed else b"U")
        h.update("\x00".join(self.node_ids).encode())
        h.update(np.ascontiguousarray(self.edges, dtype="<i8").tobytes())
        return h.hexdigest()


_SPLIT = re.compile(r"[\s,]+")


def load_edge_list(path, directed: bool = False) -> Graph:
    """Read a two-column edge list (whitespace or comma separated).

    Lines starting with ``#`` are skipped. The first data line is treated as
    a header when it never reappears as node identifiers in later lines.
    """
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = [t for t in _SPLIT.split(line) if t]
            if len(tokens) != 2:
                raise GraphFormatError(
                    f"{path}:{lineno}: expected 2 tokens, got {len(tokens)}"
                )
            rows.append((lineno, tokens[0], tokens[1]))
    if not rows:
        raise GraphFormatError(f"{path}: no edges found")

    if len(rows) > 1 and _looks_like_header(rows):
        rows = rows[1:]

    index: dict[str, int] = {}
    pairs = []
    for _, a, b in rows:
        ia = index.setdefault(a, len(index))
        ib = index.setdefault(b, len(index))
        pairs.append((ia, ib))
    return Graph.from_edges(len(index), pairs, directed, tuple(index))


def _looks_like_header(rows) -> bool:
    _, a, b = rows[0]
    if a == b:
        return False
    seen = set()
    for _, x, y in rows[1:]:
        seen.add(x)
        seen.add(y)
    if a in seen or b in seen:
        return False
    # purely numeric tokens are node ids, not column names
    return not (_is_number(a) or _is_number(b))


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def largest_connected_component(g: Graph) -> Graph:
    """Induced subgraph on the largest (strongly, if directed) component.

    Ties go to the component containing the smallest node index.
    """
    if g.node_count == 0:
        raise ValueError("graph is empty")
    _, labels = connected_components(
        g.to_sparse(), directed=g.directed, connection="strong"
    )
    sizes = np.bincount(labels)
    first = np.full(len(sizes), g.node_count, dtype=np.int64)
    np.minimum.at(first, labels, np.arange(g.node_count))
    best = min(range(len(sizes)), key=lambda c: (-sizes[c], first[c]))
    return g.subgraph(np.flatnonzero(labels == best))


def pagerank(g: Graph, damping: float = 0.85, tol: float = 1e-10,
             max_iter: int = 200) -> np.ndarray:
    """Power-iteration PageRank; dangling mass is spread uniformly."""
    n = g.node_count
    if n == 0:
        raise ValueError("graph is empty")
    out_deg = g.degrees().astype(np.float64)
    dangling = out_deg == 0
    src = np.repeat(np.arange(n), np.diff(g.indptr))
    weight = 1.0 / out_deg[src] if len(src) else np.zeros(0)
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = np.bincount(g.indices, weights=x[src] * weight, minlength=n)
        nxt = damping * (nxt + x[dangling].sum() / n) + (1.0 - damping) / n
        nxt /= nxt.sum()
        delta = np.abs(nxt - x).sum()
        x = nxt
        if delta < tol:
            break
    return x


@numba.njit(cache=True, nogil=True)
def _brandes(n, indptr, indices):
    bc = np.zeros(n)
    sigma = np.zeros(n)
    dist = np.empty(n, dtype=np.int64)
    delta = np.zeros(n)
    order = np.empty(n, dtype=np.int64)
    for s in range(n):
        sigma[:] = 0.0
        delta[:] = 0.0
        dist[:] = -1
        sigma[s] = 1.0
        dist[s] = 0
        order[0] = s
        head = 0
        tail = 1
        while head < tail:
            v = order[head]
            head += 1
            for a in range(indptr[v], indptr[v + 1]):
                w = indices[a]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    order[tail] = w
                    tail += 1
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
        # dependencies pulled from BFS-DAG successors, reverse BFS order
        for i in range(tail - 1, -1, -1):
            v = order[i]
            acc = 0.0
            for a in range(indptr[v], indptr[v + 1]):
                w = indices[a]
                if dist[w] == dist[v] + 1:
                    acc += sigma[v] / sigma[w] * (1.0 + delta[w])
            delta[v] = acc
            if v != s:
                bc[v] += acc
    return bc


def betweenness(g: Graph) -> np.ndarray:
    """Unnormalized shortest-path betweenness (Brandes).

    For undirected graphs each unordered pair is counted once.
    """
    if g.node_count == 0:
        raise ValueError("graph is empty")
    bc = _brandes(g.node_count, g.indptr, g.indices)
    if not g.directed:
        bc = bc / 2.0
    return bc


def degree_centrality(g: Graph) -> np.ndarray:
    """Out-degree (directed) or degree (undirected)."""
    if g.node_count == 0:
        raise ValueError("graph is empty")
    return g.degrees().astype(np.float64)


@dataclass
class AttributeTable:
    """Per-node attribute columns aligned to a graph's node order.

    Numeric columns are float arrays with NaN for missing; categorical
    columns are object arrays with ``None`` for missing.
    """

    node_ids: tuple[str, ...]
    columns: dict[str, np.ndarray]
    kinds: dict[str, str]

    def restrict(self, g: "Graph") -> "AttributeTable":
        """Rows for ``g``'s nodes (a subgraph of the table's graph), in its order."""
        pos = {v: i for i, v in enumerate(self.node_ids)}
        rows = np.array([pos[v] for v in g.node_ids], dtype=np.int64)
        return AttributeTable(g.node_ids, {k: v[rows] for k, v in self.columns.items()},
                              dict(self.kinds))

    def missing(self, name: str) -> np.ndarray:
        col = self.columns[name]
        if self.kinds[name] == "numeric":
            return np.isnan(col)
        return np.array([v is None for v in col], dtype=bool)


def load_attributes(path, g: Graph, kinds: dict[str, str] | None = None) -> AttributeTable:
    """Read a CSV of node attributes; first column holds node ids.

    ``kinds`` may force a column to ``"numeric"`` or ``"categorical"``;
    otherwise a column is numeric when every non-blank cell parses as a
    number and categorical when none does. A mix is a type error.
    """
    kinds = dict(kinds or {})
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise GraphFormatError(f"{path}: empty attribute file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if len(header) < 2:
        raise GraphFormatError(f"{path}: need an id column and at least one attribute")
    names = [h.strip() for h in header[1:]]
    unknown_kinds = set(kinds) - set(names)
    if unknown_kinds:
        raise GraphFormatError(f"{path}: no such attribute column(s): {sorted(unknown_kinds)}")

    unknown = [r[0].strip() for r in rows if r[0].strip() not in g._index]
    if unknown:
        raise GraphFormatError(f"{path}: ids not in graph: {unknown[:20]}")

    n = g.node_count
    raw = {name: [None] * n for name in names}
    for lineno, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise GraphFormatError(f"{path}:{lineno}: expected {len(header)} fields")
        i = g.index_of(r[0].strip())
        for name, cell in zip(names, r[1:]):
            cell = cell.strip()
            raw[name][i] = cell if cell else None

    columns, out_kinds = {}, {}
    for name in names:
        vals = raw[name]
        present = [v for v in vals if v is not None]
        numeric = [_is_number(v) for v in present]
        kind = kinds.get(name)
        if kind is None:
            if all(numeric):
                kind = "numeric"
            elif not any(numeric):
                kind = "categorical"
            else:
                raise TypeError(f"attribute {name!r} mixes numeric and text values")
        if kind == "numeric":
            if not all(numeric):
                raise TypeError(f"attribute {name!r} declared numeric but has text values")
            columns[name] = np.array(
                [math.nan if v is None else float(v) for v in vals], dtype=np.float64
            )
        elif kind == "categorical":
            columns[name] = np.array(vals, dtype=object)
        else:
            raise ValueError(f"unknown attribute kind {kind!r}")
        out_kinds[name] = kind
    return AttributeTable(node_ids=g.node_ids, columns=columns, kinds=out_kinds)
