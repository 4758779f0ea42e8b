"""k-means, the spectral baseline, and clustering diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.optimize import linear_sum_assignment

from .graph import Graph

DENSE_EIGEN_LIMIT = 3000


@dataclass(frozen=True)
class Clustering:
    labels: np.ndarray
    k: int
    inertia: float = 0.0
    method: str = "info_access"
    alpha: float | None = None
    master_seed: int = 0

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError("labels must lie in [0, k)")
        if self.inertia < 0:
            raise ValueError("inertia must be non-negative")

    def metadata(self) -> dict:
        return {
            "method": self.method,
            "k": self.k,
            "alpha": self.alpha,
            "inertia": self.inertia,
            "master_seed": self.master_seed,
        }


@dataclass(frozen=True)
class SpectralEmbedding:
    coords: np.ndarray
    eigenvalues: np.ndarray


# -- k-means -------------------------------------------------------------------

def _sq_dists(x, centers, x_sq=None):
    if x_sq is None:
        x_sq = np.einsum("ij,ij->i", x, x)
    c_sq = np.einsum("ij,ij->i", centers, centers)
    d = x_sq[:, None] - 2.0 * (x @ centers.T) + c_sq[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def _plusplus(x, k, rng):
    n = len(x)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = _sq_dists(x, centers[:1])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        centers[j] = x[idx]
        closest = np.minimum(closest, _sq_dists(x, centers[j:j + 1])[:, 0])
    return centers


def lloyd(x, centers, max_iter=300):
    """Lloyd iterations from ``centers``.

    Returns ``(labels, centers, inertia_history)``; the history holds the
    inertia after every assignment step.
    """
    x_sq = np.einsum("ij,ij->i", x, x)
    k = len(centers)
    history = []
    labels = None
    for _ in range(max_iter):
        d = _sq_dists(x, centers, x_sq)
        new_labels = np.argmin(d, axis=1)
        history.append(float(d[np.arange(len(x)), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        sizes = np.bincount(labels, minlength=k)
        if (sizes == 0).any():
            own = d[np.arange(len(x)), labels]
            for j in np.flatnonzero(sizes == 0):
                # repair: move the farthest point of a non-singleton cluster into j
                movable = sizes[labels] > 1
                far = int(np.argmax(np.where(movable, own, -1.0)))
                sizes[labels[far]] -= 1
                labels[far] = j
                sizes[j] = 1
                own[far] = -1.0
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, x)
        centers = sums / sizes[:, None]
    d = _sq_dists(x, centers, x_sq)
    labels = np.argmin(d, axis=1)
    inertia = float(((x - centers[labels]) ** 2).sum())
    return labels, centers, history + [inertia]


def kmeans(points, k, restarts=10, max_iter=300, master_seed=0,
           method="info_access", alpha=None) -> Clustering:
    """Best-of-``restarts`` Lloyd k-means with k-means++ seeding."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError("points must be an n x d matrix with d >= 1")
    n = len(x)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if not np.isfinite(x).all():
        raise ValueError("points contain non-finite values")
    best = None
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence([int(master_seed) & 0xFFFFFFFF, r]))
        labels, _, hist = lloyd(x, _plusplus(x, k, rng), max_iter)
        labels = _canonical(labels, k)
        if best is None or hist[-1] < best[0]:
            best = (hist[-1], labels)
    inertia, labels = best
    return Clustering(labels, k, max(inertia, 0.0), method, alpha, int(master_seed))


def _canonical(labels, k):
    """Relabel clusters in order of first appearance (empty ones last)."""
    order = []
    for lab in labels:
        if lab not in order:
            order.append(int(lab))
            if len(order) == k:
                break
    order += [j for j in range(k) if j not in order]
    remap = np.empty(k, dtype=np.int64)
    remap[order] = np.arange(k)
    return remap[labels]


def elbow_curve(points, k_range, restarts=10, master_seed=0):
    x = np.asarray(points, dtype=np.float64)
    ks = list(k_range)
    if max(ks) > len(x):
        raise ValueError("k exceeds number of points")
    return [(k, kmeans(x, k, restarts, master_seed=master_seed).inertia) for k in ks]


# -- spectral baseline ---------------------------------------------------------

def spectral_embedding(g: Graph, k: int) -> SpectralEmbedding:
    """Eigenvectors of the k smallest eigenvalues of I - D^-1/2 A D^-1/2."""
    g = g.symmetrized()
    n = g.node_count
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    deg = g.degrees().astype(np.float64)
    if (deg == 0).any():
        bad = [g.node_ids[i] for i in np.flatnonzero(deg == 0)[:10]]
        raise ValueError(
            f"isolated node(s) {bad}: extract the largest connected component first"
        )
    inv_sqrt = 1.0 / np.sqrt(deg)
    a = g.to_sparse()
    norm_adj = scipy.sparse.diags(inv_sqrt) @ a @ scipy.sparse.diags(inv_sqrt)
    if n <= DENSE_EIGEN_LIMIT:
        lap = np.eye(n) - norm_adj.toarray()
        vals, vecs = scipy.linalg.eigh(lap, subset_by_index=[0, k - 1])
    else:
        # largest eigenpairs of the normalized adjacency via Lanczos
        mu, vecs = scipy.sparse.linalg.eigsh(
            norm_adj, k=k, which="LA", v0=np.full(n, 1.0 / np.sqrt(n))
        )
        vals = 1.0 - mu
        order = np.argsort(vals, kind="stable")
        vals, vecs = vals[order], vecs[:, order]
    vals = np.maximum(vals, 0.0)
    # fix eigenvector signs: largest-magnitude entry positive
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return SpectralEmbedding(vecs * signs, vals)


def spectral_clustering(g: Graph, k: int, master_seed=0, restarts=10) -> Clustering:
    emb = spectral_embedding(g, k)
    rows = emb.coords / np.linalg.norm(emb.coords, axis=1, keepdims=True)
    c = kmeans(rows, k, restarts=restarts, master_seed=master_seed, method="spectral")
    return c


# -- comparison ----------------------------------------------------------------

def _labels_of(c) -> np.ndarray:
    return c.labels if isinstance(c, Clustering) else np.asarray(c)


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return (x * (x - 1.0) / 2.0).sum()


def contingency(a, b) -> np.ndarray:
    la, lb = _labels_of(a), _labels_of(b)
    if len(la) != len(lb):
        raise ValueError(f"label length mismatch: {len(la)} vs {len(lb)}")
    _, ia = np.unique(la, return_inverse=True)
    _, ib = np.unique(lb, return_inverse=True)
    table = np.zeros((ia.max() + 1 if len(ia) else 0, ib.max() + 1 if len(ib) else 0), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def adjusted_rand_index(a, b) -> float:
    table = contingency(a, b)
    n = table.sum()
    index = _comb2(table)
    rows = _comb2(table.sum(axis=1))
    cols = _comb2(table.sum(axis=0))
    total = n * (n - 1) / 2.0
    if total == 0:
        return 1.0
    expected = rows * cols / total
    max_index = (rows + cols) / 2.0
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))


def silhouette(points, labels) -> float:
    """Mean silhouette value; singleton clusters contribute 0."""
    x = np.asarray(points, dtype=np.float64)
    _, lab = np.unique(_labels_of(labels), return_inverse=True)
    n = len(x)
    k = lab.max() + 1 if n else 0
    if not 2 <= k <= n - 1:
        raise ValueError(f"silhouette needs 2 <= k <= n-1 clusters, got k={k}, n={n}")
    sizes = np.bincount(lab)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), lab] = 1.0
    sums = np.zeros((n, k))
    x_sq = np.einsum("ij,ij->i", x, x)
    step = max(1, 2_000_000 // max(n, 1))
    dmax = 0.0
    for i0 in range(0, n, step):
        d = np.sqrt(_sq_dists(x[i0:i0 + step], x, x_sq[i0:i0 + step]))
        d[np.arange(d.shape[0]), np.arange(i0, i0 + d.shape[0])] = 0.0
        dmax = max(dmax, float(d.max()))
        sums[i0:i0 + step] = d @ onehot
    if dmax == 0.0:
        raise ValueError("silhouette undefined: all points coincide")
    own = sizes[lab]
    a = np.where(own > 1, sums[np.arange(n), lab] / np.maximum(own - 1, 1), 0.0)
    other = sums / sizes[None, :]
    other[np.arange(n), lab] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def align_cluster_labels(reference: Clustering, target: Clustering) -> Clustering:
    """Relabel ``target`` so its clusters line up with ``reference``'s under
    the maximum-overlap one-to-one matching."""
    if reference.k != target.k:
        raise ValueError(f"k mismatch: {reference.k} vs {target.k}")
    if len(reference.labels) != len(target.labels):
        raise ValueError("clusterings cover different node sets")
    k = target.k
    weight = np.zeros((k, k), dtype=np.int64)
    np.add.at(weight, (target.labels, reference.labels), 1)
    rows, cols = linear_sum_assignment(weight, maximize=True)
    remap = np.empty(k, dtype=np.int64)
    remap[rows] = cols
    return replace(target, labels=remap[target.labels])
