"""Corpus sampling: cluster-based page selection and the cross-pairing protocol."""

from __future__ import annotations

import random

import numpy as np


def _pca(features: np.ndarray, dims: int) -> np.ndarray:
    centered = features - features.mean(axis=0, keepdims=True)
    # SVD-based projection; components beyond the data rank contribute nothing.
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return centered @ vt[:dims].T


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """kmeans++ seeding: spread initial centroids by squared distance."""
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        probs = d2 / total if total > 0 else np.full(n, 1.0 / n)
        centroids[c] = points[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((points - centroids[c]) ** 2).sum(axis=1))
    return centroids


def _kmeans(
    points: np.ndarray, k: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    centroids = _kmeans_pp_init(points, k, rng)
    n = points.shape[0]
    assignment = np.full(n, -1, dtype=np.int64)
    for _ in range(100):
        dist = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assignment = dist.argmin(axis=1)
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for c in range(k):
            members = points[assignment == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
    return assignment, centroids


def cluster_sample(features: list[list[float]], k: int, seed: int) -> list[int]:
    """Pick k diverse indices: PCA-reduce, k-means cluster, take each
    cluster's member nearest its centroid. Seeded and replayable."""
    n = len(features)
    if k > n:
        raise ValueError(f"cannot sample {k} items from {n}")
    if k == n:
        return list(range(n))
    matrix = np.asarray(features, dtype=np.float64)
    rng = np.random.default_rng(seed)
    reduced = _pca(matrix, dims=min(10, matrix.shape[1], n))
    assignment, centroids = _kmeans(reduced, k, rng)
    selected: list[int] = []
    taken: set[int] = set()
    for c in range(k):
        members = np.flatnonzero(assignment == c)
        if len(members) == 0:
            # Empty cluster: fall back to the globally nearest untaken point.
            members = np.array([i for i in range(n) if i not in taken])
        dist = ((reduced[members] - centroids[c]) ** 2).sum(axis=1)
        for idx in members[np.argsort(dist, kind="stable")]:
            if int(idx) not in taken:
                selected.append(int(idx))
                taken.add(int(idx))
                break
    return sorted(selected)


def cross_pair(
    paper_ids: list[str], template_ids: list[str], seed: int
) -> dict[str, str]:
    """Assign each paper a template not derived from its own page.

    A template is "own" when its id equals the paper's id; the result is a
    derangement with respect to that relation, found by seeded rejection
    sampling over permutations.
    """
    n = len(paper_ids)
    if len(template_ids) != n:
        raise ValueError("paper_ids and template_ids must have equal length")
    own_pages = any(p == t for p in paper_ids for t in template_ids)
    if n == 1 and own_pages:
        raise ValueError("no derangement exists for a single paper with its own page")
    rng = random.Random(seed)
    order = list(range(n))
    for _ in range(10_000):
        rng.shuffle(order)
        if all(template_ids[order[i]] != paper_ids[i] for i in range(n)):
            return {paper_ids[i]: template_ids[order[i]] for i in range(n)}
    raise ValueError("could not find a valid cross-pairing (too many shared ids?)")
