"""Greedy grouping of attributes into clusters of strongly dependent ones.

Clusters are merged most-dependent-first, subject to a cap on the joint
domain size; randomizing each cluster jointly then preserves within-cluster
dependence that per-attribute randomization would destroy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ClusteringError(ValueError):
    pass


@dataclass
class ClusterPartition:
    """A partition of attribute indices into disjoint clusters.

    Clusters are kept canonical: each cluster's indices are sorted and the
    cluster list is ordered by smallest member.
    """

    clusters: list[tuple[int, ...]]

    def __post_init__(self):
        self.clusters = [tuple(sorted(c)) for c in self.clusters]
        self.clusters.sort(key=lambda c: c[0])
        flat = [a for c in self.clusters for a in c]
        if not flat:
            raise ClusteringError("partition needs at least one cluster")
        if sorted(flat) != list(range(len(flat))):
            raise ClusteringError("clusters must partition the attribute indices 0..m-1")

    @property
    def m(self) -> int:
        return sum(len(c) for c in self.clusters)

    def joint_sizes(self, sizes) -> list[int]:
        out = []
        for cluster in self.clusters:
            k = 1
            for a in cluster:
                k *= int(sizes[a])
            out.append(k)
        return out

    def to_text(self, names=None, manifest: str | None = None) -> str:
        lines = [] if manifest is None else [f"# manifest: {manifest}"]
        for k, cluster in enumerate(self.clusters):
            labels = [names[a] if names is not None else str(a) for a in cluster]
            lines.append(f"cluster_{k} = {','.join(labels)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, names=None) -> "ClusterPartition":
        lookup = {name: a for a, name in enumerate(names)} if names is not None else None
        clusters = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            _, _, value = line.partition("=")
            members = []
            for tok in value.split(","):
                tok = tok.strip()
                members.append(lookup[tok] if lookup is not None else int(tok))
            clusters.append(tuple(members))
        return cls(clusters)


def cluster_dependence(cluster_a, cluster_b, pairwise: np.ndarray) -> float:
    """Dependence between clusters: the strongest cross-pair score."""
    sub = np.asarray(pairwise)[np.ix_(list(cluster_a), list(cluster_b))]
    return float(sub.max())


def build_dependence_list(clusters, pairwise: np.ndarray):
    """All cluster pairs with scores, strongest first.

    Ties break on (first cluster position, second cluster position), so the
    walk order is deterministic.
    """
    entries = []
    for a in range(len(clusters)):
        for b in range(a + 1, len(clusters)):
            entries.append(((a, b), cluster_dependence(clusters[a], clusters[b], pairwise)))
    entries.sort(key=lambda e: (-e[1], e[0][0], e[0][1]))
    return entries


def _validate_inputs(pairwise, sizes):
    pairwise = np.asarray(pairwise, dtype=float)
    if pairwise.ndim != 2 or pairwise.shape[0] != pairwise.shape[1]:
        raise ClusteringError("pairwise dependence must be a square matrix")
    if pairwise.shape[0] != len(sizes):
        raise ClusteringError("dependence matrix and size list disagree")
    if (pairwise < 0).any() or (pairwise > 1).any():
        raise ClusteringError("dependence scores must lie in [0, 1]")
    if not np.allclose(pairwise, pairwise.T, atol=1e-12):
        raise ClusteringError("dependence matrix must be symmetric")
    return pairwise


def cluster_attributes(pairwise, sizes, max_joint_size: int, min_dependence: float) -> ClusterPartition:
    """Greedy clustering: walk the dependence list, merge what fits.

    Starting from singletons, repeatedly take the strongest remaining cluster
    pair at or above ``min_dependence``; merge it if the merged joint domain
    would not exceed ``max_joint_size``, otherwise try the next pair. After
    every merge the list is rebuilt and the walk restarts from the top.
    """
    pairwise = _validate_inputs(pairwise, sizes)
    if max_joint_size < 1:
        raise ClusteringError("max_joint_size must be positive")
    sizes = [int(s) for s in sizes]
    clusters = [(a,) for a in range(len(sizes))]

    def joint_size(cluster):
        k = 1
        for a in cluster:
            k *= sizes[a]
        return k

    while len(clusters) > 1:
        merged = False
        for (a, b), score in build_dependence_list(clusters, pairwise):
            if score < min_dependence:
                break
            if joint_size(clusters[a]) * joint_size(clusters[b]) <= max_joint_size:
                union = tuple(sorted(clusters[a] + clusters[b]))
                clusters = [c for k, c in enumerate(clusters) if k not in (a, b)]
                clusters.append(union)
                clusters.sort(key=lambda c: c[0])
                merged = True
                break
        if not merged:
            break
    return ClusterPartition(clusters)
