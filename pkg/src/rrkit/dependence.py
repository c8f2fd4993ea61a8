"""Pairwise dependence between categorical attributes.

Two measures, both on the [0, 1] scale so thresholds compare across pairs:
the absolute Pearson correlation of the category ranks when both attributes
are ordinal, and Cramer's V otherwise. Both are computed from the joint
frequency table, so column-based and table-based entry points agree exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PEARSON_ABS = "pearson-abs"
CRAMERS_V = "cramers-v"

from .dataset import ORDINAL


@dataclass(frozen=True)
class DependenceScore:
    value: float
    measure: str


@dataclass
class ContingencyTable:
    """Observed joint counts of one attribute pair (declared domain sizes)."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.counts.ndim != 2:
            raise ValueError("contingency table must be two-dimensional")
        if not np.issubdtype(self.counts.dtype, np.integer):
            raise ValueError("contingency table holds integer counts")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")
        if self.counts.sum() < 1:
            raise ValueError("contingency table must hold at least one observation")

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_columns(cls, xs, ys, size_i: int, size_j: int) -> "ContingencyTable":
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.int64)
        if xs.shape != ys.shape:
            raise ValueError("columns must have equal length")
        if xs.size and (xs.min() < 0 or xs.max() >= size_i or ys.min() < 0 or ys.max() >= size_j):
            raise ValueError("column values outside the declared domains")
        flat = np.bincount(xs * size_j + ys, minlength=size_i * size_j)
        return cls(flat.reshape(size_i, size_j))

    def joint_frequencies(self) -> np.ndarray:
        return self.counts / self.counts.sum()


def pearson_abs_from_joint(freq: np.ndarray) -> float:
    """|Pearson correlation| of the rank values under a joint distribution.

    A zero-variance margin (all mass on one category) scores 0 by convention:
    a constant carries no dependence signal.
    """
    freq = np.asarray(freq, dtype=float)
    px = freq.sum(axis=1)
    py = freq.sum(axis=0)
    i = np.arange(freq.shape[0])
    j = np.arange(freq.shape[1])
    mx = float(i @ px)
    my = float(j @ py)
    vx = float((i * i) @ px) - mx * mx
    vy = float((j * j) @ py) - my * my
    if vx <= 0.0 or vy <= 0.0:
        return 0.0
    cov = float(i @ freq @ j) - mx * my
    return min(abs(cov) / np.sqrt(vx * vy), 1.0)


def cramers_v_from_joint(freq: np.ndarray) -> float:
    """Cramer's V from a joint distribution over the declared domain.

    Cells whose expected frequency is zero are skipped (their observed mass is
    necessarily zero as well); the normalizer uses the declared category
    counts, i.e. the table shape.
    """
    freq = np.asarray(freq, dtype=float)
    r_i, r_j = freq.shape
    k = min(r_i - 1, r_j - 1)
    if k < 1:
        raise ValueError("both attributes need at least 2 declared categories")
    expected = np.outer(freq.sum(axis=1), freq.sum(axis=0))
    mask = expected > 0.0
    chi2_over_n = float((((freq - expected) ** 2)[mask] / expected[mask]).sum())
    return min(np.sqrt(chi2_over_n / k), 1.0)


def score_from_joint(freq: np.ndarray, kind_i: str, kind_j: str) -> DependenceScore:
    """Dispatch on attribute kinds: rank correlation only when both are ordinal."""
    if kind_i == ORDINAL and kind_j == ORDINAL:
        return DependenceScore(pearson_abs_from_joint(freq), PEARSON_ABS)
    return DependenceScore(cramers_v_from_joint(freq), CRAMERS_V)


def pearson_abs(xs, ys, size_i: int, size_j: int) -> DependenceScore:
    table = ContingencyTable.from_columns(xs, ys, size_i, size_j)
    return DependenceScore(pearson_abs_from_joint(table.joint_frequencies()), PEARSON_ABS)


def cramers_v(table: ContingencyTable) -> DependenceScore:
    return DependenceScore(cramers_v_from_joint(table.joint_frequencies()), CRAMERS_V)


def covariance(xs, ys) -> float:
    """Population covariance (1/n normalization) of two numeric columns."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 1:
        raise ValueError("need two equal-length non-empty columns")
    return float((xs * ys).mean() - xs.mean() * ys.mean())


def attribute_dependence(dataset, i: int, j: int) -> DependenceScore:
    """Dependence between two attributes of a dataset."""
    table = ContingencyTable.from_columns(
        dataset.column(i), dataset.column(j), dataset.sizes[i], dataset.sizes[j]
    )
    return score_from_joint(
        table.joint_frequencies(), dataset.schema[i].kind, dataset.schema[j].kind
    )


def pairwise_matrix(dataset) -> np.ndarray:
    """Symmetric matrix of pairwise dependence scores (diagonal fixed at 1)."""
    m = dataset.m
    out = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            out[i, j] = out[j, i] = attribute_dependence(dataset, i, j).value
    return out


def matrix_to_tsv(matrix: np.ndarray, names, manifest: str | None = None) -> str:
    lines = []
    if manifest is not None:
        lines.append(f"# manifest: {manifest}")
    lines.append("\t".join(["attribute", *names]))
    for name, row in zip(names, np.asarray(matrix)):
        lines.append("\t".join([name, *(f"{v:.6f}" for v in row)]))
    return "\n".join(lines) + "\n"
