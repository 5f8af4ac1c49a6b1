"""Small deterministic k-means with elbow selection, on numpy.

Used to cluster policy condition encodings; the cluster distances feed the
severity model.  Seeded k-means++ initialization, Lloyd iterations, several
restarts, best inertia kept, so results are reproducible for a given seed.
"""

from __future__ import annotations

import numpy as np


def kmeans(points: np.ndarray, k: int, seed: int = 0, n_init: int = 5,
           max_iter: int = 100) -> tuple[np.ndarray, np.ndarray, float]:
    """Returns (labels, centers, inertia)."""
    n = len(points)
    k = min(k, n)
    best: tuple[np.ndarray, np.ndarray, float] | None = None
    rng = np.random.default_rng(seed)
    for _ in range(n_init):
        centers = _kmeanspp(points, k, rng)
        labels = np.zeros(n, dtype=np.int64)
        for _ in range(max_iter):
            dists = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_labels = dists.argmin(axis=1)
            if np.array_equal(new_labels, labels) and _ > 0:
                break
            labels = new_labels
            for j in range(k):
                members = points[labels == j]
                if len(members):
                    centers[j] = members.mean(axis=0)
        inertia = float(((points - centers[labels]) ** 2).sum())
        if best is None or inertia < best[2] - 1e-12:
            best = (labels.copy(), centers.copy(), inertia)
    assert best is not None
    return best


def _kmeanspp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centers = [points[int(rng.integers(n))]]
    for _ in range(1, k):
        d2 = np.min(((points[:, None, :] - np.array(centers)[None, :, :]) ** 2).sum(axis=2), axis=1)
        total = d2.sum()
        if total <= 0:
            centers.append(points[int(rng.integers(n))])
            continue
        probs = d2 / total
        centers.append(points[int(rng.choice(n, p=probs))])
    return np.array(centers, dtype=float)


def elbow_k(points: np.ndarray, k_max: int, seed: int = 0,
            threshold: float = 0.10) -> int:
    """Smallest k whose next split improves within-cluster sum of squares by
    less than the threshold fraction."""
    n = len(points)
    k_max = max(1, min(k_max, n))
    wcss = []
    for k in range(1, k_max + 1):
        _, _, inertia = kmeans(points, k, seed=seed)
        wcss.append(inertia)
        if inertia <= 1e-12:
            return k
    for k in range(1, k_max):
        prev, nxt = wcss[k - 1], wcss[k]
        if prev <= 1e-12 or (prev - nxt) / prev < threshold:
            return k
    return k_max
