"""The four fitness functions.

Curiosity and Discovery score a controller by the Shannon entropy of the
clustered sensori-motor stream: Curiosity clusters each episode from
scratch, Discovery keeps one cumulative cluster set for the whole lineage
so rediscovering the ancestors' states pays nothing. Novelty is the
end-point k-nearest-neighbour baseline and Displacement the classic
fast-straight-away-from-walls score; both serve as comparison baselines.

Entropy uses the natural logarithm throughout (recorded in experiment
metadata); base choice only rescales, never reorders, fitnesses.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterSet, empty_cluster_set, epsilon_means

CURIOSITY = "curiosity"
DISCOVERY = "discovery"
NOVELTY = "novelty"
DISPLACEMENT = "displacement"
KINDS = (CURIOSITY, DISCOVERY, NOVELTY, DISPLACEMENT)

DEFAULT_EPSILON = {CURIOSITY: 0.2, DISCOVERY: 0.4}
DEFAULT_NOVELTY_K = 15


@dataclass
class FitnessSpec:
    """Which fitness drives a run, plus its parameters."""

    kind: str
    epsilon: float = None  # resolved per kind when omitted
    novelty_k: int = DEFAULT_NOVELTY_K
    # archive policies; both kept for ablation
    novelty_add_every: bool = True
    discovery_commit_every: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown fitness kind {self.kind!r}, expected one of {KINDS}")
        if self.epsilon is None:
            self.epsilon = DEFAULT_EPSILON.get(self.kind, 0.2)
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.novelty_k < 1:
            raise ValueError("novelty_k must be >= 1")


@dataclass
class NoveltyArchive:
    """End points of past evaluations; at most one appended per evaluation.

    sentinel is the novelty granted against an empty archive (use the arena
    diagonal so the first individual is maximally novel).
    """

    sentinel: float
    end_points: list = field(default_factory=list)

    def add(self, point):
        self.end_points.append((float(point[0]), float(point[1])))

    def __len__(self):
        return len(self.end_points)


@dataclass
class DiscoveryArchive:
    """The lineage's cumulative cluster set; counts never decrease."""

    clusters: ClusterSet

    @classmethod
    def empty(cls, dim=10, epsilon=DEFAULT_EPSILON[DISCOVERY]):
        return cls(clusters=empty_cluster_set(dim, epsilon))

    def total(self):
        return self.clusters.total()


def entropy(cluster_set):
    """Shannon entropy (nats) of the normalized visit-count distribution."""
    if cluster_set.size == 0:
        raise ValueError("entropy of an empty ClusterSet")
    counts = cluster_set.counts.astype(np.float64)
    probs = counts / counts.sum()
    nz = probs > 0.0  # 0 log 0 = 0
    return float(-(probs[nz] * np.log(probs[nz])).sum())


def curiosity_fitness(stream, epsilon):
    """Entropy of a fresh epsilon-means clustering of the stream, in time order."""
    if len(stream) == 0:
        raise ValueError("empty stream")
    clusters = epsilon_means(stream, epsilon)
    return entropy(clusters), clusters


def discovery_fitness(archive, stream, epsilon):
    """Entropy of the inherited cluster set updated by this stream.

    Returns (fitness, updated archive); the input archive is untouched, the
    caller decides whether the update is committed.
    """
    if len(stream) == 0:
        raise ValueError("empty stream")
    updated = epsilon_means(stream, epsilon, seed=archive.clusters)
    return entropy(updated), DiscoveryArchive(clusters=updated)


def novelty_fitness(end_point, archive, k):
    """Mean distance from end_point to its k nearest archived end points.

    Uses every archived point when the archive holds fewer than k; an empty
    archive yields the archive's sentinel.
    """
    n = len(archive)
    if n == 0:
        return archive.sentinel
    pts = np.asarray(archive.end_points, dtype=np.float64)
    d = np.hypot(pts[:, 0] - end_point[0], pts[:, 1] - end_point[1])
    kk = min(k, n)
    nearest = np.partition(d, kk - 1)[:kk]
    return float(nearest.mean())


def displacement_fitness(stream):
    """Per-step V * (1 - sqrt(dv)) * (1 - i), averaged over the episode.

    V is the absolute mean of the two wheel commands (so spinning scores 0),
    dv the normalized absolute wheel difference, i the strongest sensor
    activation; all three live in [0, 1], so the fitness does too.
    """
    stream = np.asarray(stream, dtype=np.float64)
    if stream.shape[0] == 0:
        raise ValueError("empty stream")
    m_left = 2.0 * stream[:, 8] - 1.0
    m_right = 2.0 * stream[:, 9] - 1.0
    v = np.abs(m_left + m_right) / 2.0
    dv = np.abs(m_left - m_right) / 2.0
    i_max = stream[:, :8].max(axis=1)
    per_step = v * (1.0 - np.sqrt(dv)) * (1.0 - i_max)
    return float(per_step.mean())
