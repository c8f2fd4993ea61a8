"""Iterative proportional reweighting of records toward target marginals.

Given per-group target distributions (one group per attribute or attribute
cluster, together covering every attribute exactly once), records receive
fractional weights, initially uniform, that are rescaled group by group until
every weighted group marginal matches its target. The weighted records then
act as a synthetic dataset consistent with all targets at once.

Target mass on category combinations that no record exhibits cannot be
reached by reweighting; that mass is diverted proportionally onto the
supported combinations and reported, and the final residual measures how far
the weighted marginals still are from the original (pre-diversion) targets.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rr_core import DIST_SUM_TOL


class AdjustmentError(RuntimeError):
    pass


@dataclass
class WeightedDataset:
    """Encoded records with fractional weights summing to one.

    Attributes:
        records: (n, m) int64 category codes.
        weights: (n,) float weights, nonnegative, summing to ~1.
        iterations: reweighting sweeps actually performed.
        residual: worst L1 gap between weighted marginals and the original
            targets, measured after the final sweep; NaN before any sweep.
        converged: whether the last sweep moved every weight less than the
            configured threshold.
        diverted: per-group target mass that fell on unsupported category
            combinations during the final sweep, keyed by attribute tuple.
    """

    records: np.ndarray
    weights: np.ndarray
    iterations: int = 0
    residual: float = float("nan")
    converged: bool = False
    diverted: dict = field(default_factory=dict)

    def __post_init__(self):
        self.records = np.asarray(self.records, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.records.ndim != 2:
            raise AdjustmentError("records must be a 2-D array")
        if self.weights.shape != (self.records.shape[0],):
            raise AdjustmentError("need exactly one weight per record")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise AdjustmentError("weights must be finite and nonnegative")
        if self.weights.sum() <= 0:
            raise AdjustmentError("weights must carry positive total mass")

    @property
    def n(self) -> int:
        return self.records.shape[0]

    @property
    def total_diverted(self) -> float:
        return float(sum(self.diverted.values()))

    def marginal(self, attributes, sizes) -> np.ndarray:
        """Weighted frequency over the joint domain of the given attributes."""
        codes, size = encode_codes(self.records, as_attribute_tuple(attributes), sizes)
        return np.bincount(codes, weights=self.weights, minlength=size)

    def sample_synthetic(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``count`` records with probability proportional to weight."""
        probs = self.weights / self.weights.sum()
        picks = rng.choice(self.n, size=count, p=probs)
        return self.records[picks]


def as_attribute_tuple(attributes) -> tuple[int, ...]:
    if isinstance(attributes, (int, np.integer)):
        return (int(attributes),)
    return tuple(int(a) for a in attributes)


def encode_codes(records, attributes: tuple[int, ...], sizes) -> tuple[np.ndarray, int]:
    """Row-major joint codes of the selected columns, plus the domain size."""
    dims = tuple(int(sizes[a]) for a in attributes)
    columns = [records[:, a] for a in attributes]
    codes = np.ravel_multi_index(columns, dims)
    return codes.astype(np.int64, copy=False), int(np.prod(dims))


def _validate_target(target, size: int) -> np.ndarray:
    target = np.asarray(target, dtype=float)
    if target.shape != (size,):
        raise AdjustmentError(f"target has {target.shape} entries, domain needs {size}")
    if np.any(target < 0) or not np.all(np.isfinite(target)):
        raise AdjustmentError("target entries must be finite and nonnegative")
    if abs(target.sum() - 1.0) > DIST_SUM_TOL:
        raise AdjustmentError(f"target must sum to 1, got {target.sum()!r}")
    return target


def _scale(weights, codes, target, size: int) -> tuple[np.ndarray, float]:
    """One proportional-fitting pass; returns new weights and diverted mass."""
    current = np.bincount(codes, weights=weights, minlength=size)
    supported = current > 0
    diverted = float(target[~supported].sum())
    effective = target * supported
    reachable = effective.sum()
    if reachable <= 0:
        raise AdjustmentError("target places no mass on any supported combination")
    if diverted > 0:
        effective = effective / reachable
    factors = np.zeros(size)
    factors[supported] = effective[supported] / current[supported]
    return weights * factors[codes], diverted


def adjust_weights(weighted: WeightedDataset, attributes, target, sizes):
    """Rescale weights so one group's weighted marginal matches its target.

    Args:
        weighted: current weighted records.
        attributes: attribute index or tuple of indices forming the group.
        target: distribution over the group's row-major joint domain.
        sizes: per-attribute category counts for the full record layout.

    Returns:
        (reweighted WeightedDataset, diverted target mass).
    """
    attrs = as_attribute_tuple(attributes)
    codes, size = encode_codes(weighted.records, attrs, sizes)
    new_weights, diverted = _scale(weighted.weights, codes, _validate_target(target, size), size)
    result = WeightedDataset(
        weighted.records,
        new_weights,
        iterations=weighted.iterations,
        residual=weighted.residual,
        converged=weighted.converged,
        diverted={**weighted.diverted, attrs: diverted},
    )
    return result, diverted


def rr_adjust(
    records,
    targets,
    sizes,
    max_weight_delta: float = 1e-9,
    max_iterations: int = 100,
) -> WeightedDataset:
    """Fit record weights to all target marginals simultaneously.

    Args:
        records: (n, m) encoded records, or any object with a ``records``
            attribute holding one.
        targets: list of (attributes, distribution) pairs. The attribute
            groups must cover every column exactly once; each distribution
            ranges over the group's row-major joint domain.
        sizes: per-attribute category counts.
        max_weight_delta: stop once no weight moves more than this in a sweep.
        max_iterations: hard cap on sweeps over all groups.

    Returns:
        WeightedDataset with uniform-start weights fitted to the targets.
    """
    arr = records.records if hasattr(records, "records") else np.asarray(records, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise AdjustmentError("records must be a nonempty 2-D array")
    n, m = arr.shape
    groups = []
    for attributes, dist in targets:
        attrs = as_attribute_tuple(attributes)
        codes, size = encode_codes(arr, attrs, sizes)
        groups.append((attrs, codes, _validate_target(dist, size), size))
    covered = sorted(a for attrs, _, _, _ in groups for a in attrs)
    if covered != list(range(m)):
        raise AdjustmentError("target groups must cover every attribute exactly once")

    weights = np.full(n, 1.0 / n)
    iterations = 0
    converged = False
    diverted: dict = {}
    while iterations < max_iterations:
        previous = weights
        diverted = {}
        for attrs, codes, target, size in groups:
            weights, lost = _scale(weights, codes, target, size)
            diverted[attrs] = lost
        iterations += 1
        if np.max(np.abs(weights - previous)) <= max_weight_delta:
            converged = True
            break

    residual = 0.0
    for attrs, codes, target, size in groups:
        achieved = np.bincount(codes, weights=weights, minlength=size)
        residual = max(residual, float(np.abs(achieved - target).sum()))
    return WeightedDataset(
        arr, weights,
        iterations=iterations, residual=residual, converged=converged, diverted=diverted,
    )
