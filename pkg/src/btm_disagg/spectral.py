"""Spectral clustering of customer profiles and cluster-count calibration.

Pipeline: Gaussian similarity with local scaling, normalized affinity
``D^-1/2 W D^-1/2``, top-k eigenvector embedding with row normalization,
k-means on the embedded rows. The number of clusters is calibrated with
the modified Hubert Gamma statistic.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DisaggregationError
from .numerics import kmeans, symmetric_eigen

NEIGHBOUR_RANK = 7
RHO_FLOOR = 1e-9


@dataclass(frozen=True)
class SimilarityGraph:
    vertices: np.ndarray
    weights: np.ndarray
    scales: np.ndarray
    degenerate: bool = False  # every scale hit the floor


@dataclass(frozen=True)
class ClusteringResult:
    labels: np.ndarray
    k: int
    embedding: np.ndarray
    centers: np.ndarray  # cluster means in profile space
    gamma_curve: dict = field(default_factory=dict)

    def members(self, ids):
        """Map cluster index -> list of ids."""
        out = {c: [] for c in range(self.k)}
        for mid, lab in zip(ids, self.labels):
            out[int(lab)].append(mid)
        return out


def _pairwise_sq(v):
    sq = np.sum(v * v, axis=1)
    d = sq[:, None] - 2.0 * v @ v.T + sq[None, :]
    d = 0.5 * (d + d.T)  # BLAS need not return an exactly symmetric Gram matrix
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def _as_profiles(profiles):
    v = np.asarray(profiles, dtype=float)
    if v.ndim != 2 or v.shape[0] < 2:
        raise DisaggregationError("need at least two equal-length profiles")
    if not np.all(np.isfinite(v)):
        raise DisaggregationError("profiles contain non-finite values")
    return v


def local_scales(profiles, rank=NEIGHBOUR_RANK):
    """Distance from each vertex to its ``rank``-th nearest neighbour
    (the farthest one when there are fewer), floored at 1e-9."""
    v = _as_profiles(profiles)
    d = np.sqrt(_pairwise_sq(v))
    n = v.shape[0]
    r = min(rank, n - 1)
    nearest = np.sort(d, axis=1)[:, r]  # column 0 is the vertex itself
    return np.maximum(nearest, RHO_FLOOR)


def build_similarity_graph(profiles, rank=NEIGHBOUR_RANK):
    v = _as_profiles(profiles)
    rho = local_scales(v, rank)
    # keep far pairs strictly positive instead of underflowing to zero
    w = np.maximum(np.exp(-_pairwise_sq(v) / np.outer(rho, rho)), np.finfo(float).tiny)
    np.fill_diagonal(w, 1.0)
    degenerate = bool(np.all(rho == RHO_FLOOR))
    if degenerate:
        warnings.warn("all local scales hit the floor: profiles are duplicates", RuntimeWarning, stacklevel=2)
    return SimilarityGraph(vertices=v, weights=w, scales=rho, degenerate=degenerate)


def normalized_affinity(graph):
    w = graph.weights if isinstance(graph, SimilarityGraph) else np.asarray(graph, dtype=float)
    deg = w.sum(axis=1)
    if np.any(deg <= 0):
        raise DisaggregationError("similarity graph has a vertex with zero degree")
    inv = 1.0 / np.sqrt(deg)
    return w * inv[:, None] * inv[None, :]


def spectral_embed(affinity, k, eigen=None):
    """Rows of the top-``k`` eigenvectors, each row scaled to unit length.

    ``eigen`` may carry a precomputed decomposition of ``affinity``.
    """
    n = np.shape(affinity)[0]
    if not 1 <= k <= n:
        raise DisaggregationError(f"k={k} out of range [1, {n}]")
    return _embed_from(eigen or symmetric_eigen(affinity), k)


def hubert_gamma(profiles, labels, centers):
    """Modified Hubert Gamma: mean over vertex pairs of the product of the
    pair distance and the distance between their cluster centers."""
    v = np.asarray(profiles, dtype=float)
    n = v.shape[0]
    if n < 2:
        raise DisaggregationError("Hubert Gamma needs at least two vertices")
    labels = np.asarray(labels)
    c = np.asarray(centers, dtype=float)
    p = np.sqrt(_pairwise_sq(v))
    cq = np.sqrt(_pairwise_sq(c)) if len(c) > 1 else np.zeros((1, 1))
    q = cq[labels][:, labels]
    iu = np.triu_indices(n, 1)
    return float(np.sum(p[iu] * q[iu]) / (n * (n - 1) / 2))


def _centers(v, labels, k):
    return np.array([v[labels == j].mean(axis=0) for j in range(k)])


def cluster_profiles(profiles, k, seed=0, restarts=10, eigen=None, rank=NEIGHBOUR_RANK):
    """Spectral clustering at a fixed ``k``."""
    v = np.asarray(profiles, dtype=float)
    n = v.shape[0]
    if n == 1:
        return ClusteringResult(np.zeros(1, int), 1, np.ones((1, 1)), v.copy())
    k = min(k, n)
    if eigen is None:
        eigen = symmetric_eigen(normalized_affinity(build_similarity_graph(v, rank)))
    emb = _embed_from(eigen, k)
    labels, _ = kmeans(emb, k, seed=seed, restarts=restarts)
    labels = _canonical_labels(labels)
    return ClusteringResult(labels, k, emb, _centers(v, labels, k))


def _embed_from(eigen, k):
    e = eigen.vectors[:, :k].copy()
    norms = np.linalg.norm(e, axis=1)
    ok = norms >= 1e-12
    e[ok] /= norms[ok, None]
    e[~ok] = 0.0
    return e


def _canonical_labels(labels):
    """Renumber clusters in order of first appearance."""
    mapping = {}
    for lab in labels:
        mapping.setdefault(int(lab), len(mapping))
    return np.array([mapping[int(lab)] for lab in labels])


def knee_point(gamma_curve):
    """Interior k where the Gamma curve bends hardest.

    Gamma rises with k and flattens once the natural grouping is reached, so
    the knee is the interior k with the most negative second difference
    ``G(k-1) - 2 G(k) + G(k+1)``. Ties go to the smallest k.
    """
    ks = sorted(gamma_curve)
    if len(ks) < 3:
        return ks[0]
    best_k, best = None, np.inf
    for a, b, c in zip(ks, ks[1:], ks[2:]):
        second = gamma_curve[a] - 2.0 * gamma_curve[b] + gamma_curve[c]
        if best_k is None or second < best - 1e-12 * max(1.0, abs(best)):
            best_k, best = b, second
    return best_k


def select_cluster_count(profiles, k_max, seed=0, restarts=10, rank=NEIGHBOUR_RANK):
    """Cluster for every k in 2..k_max and keep the knee of the Gamma curve."""
    v = _as_profiles(profiles)
    n = v.shape[0]
    if not 2 <= k_max <= n - 1:
        raise DisaggregationError(f"k_max={k_max} must lie in [2, {n - 1}]")
    eigen = symmetric_eigen(normalized_affinity(build_similarity_graph(v, rank)))
    results = {}
    curve = {}
    for k in range(2, k_max + 1):
        res = cluster_profiles(v, k, seed=seed, restarts=restarts, eigen=eigen)
        results[k] = res
        curve[k] = hubert_gamma(v, res.labels, res.centers)
    k = knee_point(curve)
    best = results[k]
    return ClusteringResult(best.labels, best.k, best.embedding, best.centers, curve)


def debug_dump(profiles, result, path=None, rank=NEIGHBOUR_RANK):
    """JSON snapshot of W, L, E and the Gamma curve."""
    g = build_similarity_graph(profiles, rank)
    payload = {
        "W": g.weights.tolist(),
        "rho": g.scales.tolist(),
        "L": normalized_affinity(g).tolist(),
        "E": np.asarray(result.embedding).tolist(),
        "labels": [int(x) for x in result.labels],
        "k": int(result.k),
        "gamma_curve": {str(k): v for k, v in sorted(result.gamma_curve.items())},
    }
    text = json.dumps(payload, indent=1)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return payload
