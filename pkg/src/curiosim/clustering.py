"""Clustering of the sensori-motor stream: online epsilon-means and batch
k-means (Lloyd), both under Euclidean distance.

epsilon-means is the single-pass leader algorithm: a point farther than
epsilon from every existing center founds a new cluster at the point itself,
otherwise the nearest center's count goes up. Centers never move, which is
what makes a cluster set inheritable across generations. The result depends
on stream order; callers that care fix the order.
"""

from dataclasses import dataclass

import numpy as np

from . import engine


@dataclass
class ClusterSet:
    """Cluster centers with visit counts.

    epsilon records the radius the set was built with (the k, for k-means
    builds). For epsilon-means sets all pairwise center distances exceed
    epsilon.
    """

    centers: np.ndarray  # (p, d) float64
    counts: np.ndarray  # (p,) int64, all >= 1
    epsilon: float

    @property
    def size(self):
        return self.centers.shape[0]

    @property
    def clusters(self):
        """List of (center, count) pairs, spec-shaped for inspection."""
        return [(self.centers[i], int(self.counts[i])) for i in range(self.size)]

    def total(self):
        return int(self.counts.sum())

    def copy(self):
        return ClusterSet(centers=self.centers.copy(), counts=self.counts.copy(), epsilon=self.epsilon)


def empty_cluster_set(dim, epsilon):
    return ClusterSet(
        centers=np.empty((0, dim)), counts=np.empty(0, dtype=np.int64), epsilon=epsilon
    )


def nearest_cluster(cluster_set, x):
    """(index, Euclidean distance) of the nearest center; lowest index wins ties."""
    if cluster_set.size == 0:
        raise ValueError("nearest_cluster on an empty ClusterSet")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (cluster_set.centers.shape[1],):
        raise ValueError(
            f"dimension mismatch: point has {x.shape}, centers have {cluster_set.centers.shape[1]}"
        )
    d2 = ((cluster_set.centers - x) ** 2).sum(axis=1)
    idx = int(np.argmin(d2))
    return idx, float(np.sqrt(d2[idx]))


def epsilon_means_update(cluster_set, x, epsilon):
    """One online update; returns a new ClusterSet, the input is untouched."""
    x = np.asarray(x, dtype=np.float64)
    if cluster_set.size == 0:
        return ClusterSet(
            centers=x.reshape(1, -1).copy(),
            counts=np.array([1], dtype=np.int64),
            epsilon=epsilon,
        )
    if x.shape != (cluster_set.centers.shape[1],):
        raise ValueError(
            f"dimension mismatch: point has {x.shape}, centers have {cluster_set.centers.shape[1]}"
        )
    # squared comparison, same convention as the batch kernel
    d2 = ((cluster_set.centers - x) ** 2).sum(axis=1)
    idx = int(np.argmin(d2))
    if d2[idx] > epsilon * epsilon:
        return ClusterSet(
            centers=np.vstack([cluster_set.centers, x]),
            counts=np.append(cluster_set.counts, 1),
            epsilon=epsilon,
        )
    counts = cluster_set.counts.copy()
    counts[idx] += 1
    return ClusterSet(centers=cluster_set.centers, counts=counts, epsilon=epsilon)


def epsilon_means(points, epsilon, seed=None):
    """Batch epsilon-means over `points` in row order; the fast path.

    Folding epsilon_means_update over the rows gives the identical result.
    `seed` is an optional ClusterSet to start from (inherited archives); it
    is not modified.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-d array")
    dim = points.shape[1]
    if seed is None:
        seed_centers = np.empty((0, dim))
        seed_counts = np.empty(0, dtype=np.int64)
    else:
        if seed.size and seed.centers.shape[1] != dim:
            raise ValueError("dimension mismatch between points and seed centers")
        seed_centers = np.ascontiguousarray(seed.centers, dtype=np.float64)
        seed_counts = np.ascontiguousarray(seed.counts, dtype=np.int64)
    centers, counts = engine.epsilon_means(points, float(epsilon), seed_centers, seed_counts)
    return ClusterSet(centers=centers, counts=counts, epsilon=float(epsilon))


def kmeans(points, k, rng, max_iter=200, return_history=False):
    """Lloyd's algorithm: random training points as initial centers, then
    alternate nearest-center assignment and centroid update until the
    assignment stabilizes (or max_iter).

    Empty clusters are re-seeded to the point currently farthest from its
    assigned center. Returns a ClusterSet with counts = final assignment
    sizes; with return_history=True also the within-cluster sum of squares
    after each assignment pass (non-increasing, by Lloyd's argument).
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k = {k} exceeds the number of points {n}")

    centers = points[rng.choice(n, size=k, replace=False)].copy()
    assignment = np.full(n, -1)
    history = []

    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assignment = d2.argmin(axis=1)  # argmin takes the lowest index on ties
        history.append(float(d2[np.arange(n), new_assignment].sum()))
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment

        for j in range(k):
            members = assignment == j
            if members.any():
                centers[j] = points[members].mean(axis=0)
        # re-seed empty clusters to the farthest-from-center points
        empties = [j for j in range(k) if not (assignment == j).any()]
        if empties:
            dist_to_own = d2[np.arange(n), assignment].copy()
            for j in empties:
                far = int(dist_to_own.argmax())
                centers[j] = points[far]
                assignment[far] = j
                dist_to_own[far] = -1.0

    counts = np.bincount(assignment, minlength=k).astype(np.int64)
    keep = counts > 0  # degenerate duplicate-data runs can strand a center
    result = ClusterSet(centers=centers[keep], counts=counts[keep], epsilon=float(k))
    if return_history:
        return result, history
    return result


def write_clusters_csv(path, cluster_set):
    """Dump `n,c0..c9` rows, one cluster per line, for designer inspection."""
    dim = cluster_set.centers.shape[1] if cluster_set.size else 0
    header = "n," + ",".join(f"c{i}" for i in range(dim)) if dim else "n"
    lines = [header]
    for i in range(cluster_set.size):
        cols = [str(int(cluster_set.counts[i]))]
        cols += [repr(float(v)) for v in cluster_set.centers[i]]
        lines.append(",".join(cols))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
