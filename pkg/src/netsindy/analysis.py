"""Spectral clustering of nodes from the adjacency matrix or from snapshots."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, laplacian
from .pod import _fix_signs, thin_svd

__all__ = [
    "EigenDecomposition",
    "ClusterAssignment",
    "ClusteringError",
    "eigh_laplacian",
    "kmeans",
    "spectral_embedding",
    "spectral_cluster",
    "canonical_labels",
]


class ClusteringError(RuntimeError):
    pass


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray
    vectors: np.ndarray


def eigh_laplacian(g: Graph) -> EigenDecomposition:
    """Ascending eigenpairs of ``L = D - A`` with the SVD sign convention."""
    vals, vecs = np.linalg.eigh(laplacian(g))
    vecs, _ = _fix_signs(vecs, np.zeros((vecs.shape[1], 0)))
    return EigenDecomposition(vals, vecs)


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    k: int
    inertia: float
    source: str
    embedding: np.ndarray | None = field(default=None, repr=False)


def canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Relabel so clusters are numbered in order of first appearance."""
    labels = np.asarray(labels)
    mapping: dict = {}
    out = np.empty(labels.size, dtype=int)
    for i, lab in enumerate(labels):
        out[i] = mapping.setdefault(lab, len(mapping))
    return out


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = [points[rng.integers(n)]]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers.append(points[idx])
        d2 = np.minimum(d2, np.sum((points - points[idx]) ** 2, axis=1))
    return np.array(centers)


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iter: int):
    history = []
    labels = None
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(points.shape[0]), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(centers.shape[0]):
            members = points[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    inertia = float(d2[np.arange(points.shape[0]), labels].sum())
    return labels, centers, inertia, history


def kmeans(points: np.ndarray, k: int, seed: int = 0, n_init: int = 10,
           max_iter: int = 300, max_failures: int = 10):
    """Lloyd's k-means with k-means++ seeding; best of ``n_init`` restarts.

    Restart ``r`` draws from its own child of ``SeedSequence(seed)``. A
    restart that ends with an empty cluster is discarded and replaced, and
    ``max_failures`` discarded restarts raise :class:`ClusteringError`.

    Returns ``(labels, centers, inertia, history)`` for the best restart,
    where ``history`` lists the inertia at every assignment step.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={n}")
    seeds = iter(np.random.SeedSequence(seed).spawn(n_init + max_failures))
    best = None
    failures = 0
    done = 0
    while done < n_init:
        rng = np.random.Generator(np.random.Philox(next(seeds)))
        labels, centers, inertia, history = _lloyd(points, _kmeans_pp(points, k, rng), max_iter)
        if np.unique(labels).size < k:
            failures += 1
            if failures >= max_failures:
                raise ClusteringError(f"k-means left a cluster empty in {failures} restarts")
            continue
        done += 1
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia, history)
    return best


def spectral_embedding(features: np.ndarray, k: int, source: str,
                       normalized: str | None = None) -> np.ndarray:
    """Node coordinates used for clustering (N x k).

    ``source="adjacency"``: eigenvectors of the k smallest Laplacian
    eigenvalues (``normalized`` may be ``"sym"`` or ``"rw"``).
    ``source="snapshot"``: rows of the first k left singular vectors.
    """
    features = np.asarray(features, dtype=float)
    if source == "snapshot":
        u, _, _ = thin_svd(features)
        if u.shape[1] < k:
            u = np.hstack([u, np.zeros((u.shape[0], k - u.shape[1]))])
        return u[:, :k]
    if source != "adjacency":
        raise ValueError(f"unknown source {source!r}")
    a = features
    if a.shape[0] != a.shape[1] or not np.array_equal(a, a.T):
        raise ValueError("adjacency source needs a symmetric square matrix")
    deg = a.sum(axis=1)
    if normalized is None:
        vals, vecs = np.linalg.eigh(np.diag(deg) - a)
        return vecs[:, :k]
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    lsym = np.eye(a.shape[0]) - inv_sqrt[:, None] * a * inv_sqrt[None, :]
    vals, vecs = np.linalg.eigh(lsym)
    emb = vecs[:, :k]
    if normalized == "sym":
        norms = np.linalg.norm(emb, axis=1, keepdims=True)
        return emb / np.where(norms > 0, norms, 1.0)
    if normalized == "rw":
        # generalized eigenvectors of L v = lambda D v
        return inv_sqrt[:, None] * emb
    raise ValueError(f"unknown normalization {normalized!r}")


def spectral_cluster(features: np.ndarray, k: int, seed: int = 0, source: str = "snapshot",
                     normalized: str | None = None) -> ClusterAssignment:
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] < 1:
        raise ValueError("features must be an N x F matrix with F >= 1")
    n = features.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds the number of nodes {n}")
    emb = spectral_embedding(features, k, source, normalized)
    labels, _, inertia, _ = kmeans(emb, k, seed)
    return ClusterAssignment(canonical_labels(labels), k, inertia, source, emb)
