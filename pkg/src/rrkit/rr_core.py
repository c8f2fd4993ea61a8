"""Randomized response: response matrices, sampling, unbiased estimation.

A response matrix P is row-stochastic; entry P[u, v] is the probability of
answering v when the true value is u. Publishing the randomized answers and
inverting the expected-frequency relation lambda = P^T pi recovers an unbiased
estimate of the true distribution pi from the empirical answer distribution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ROW_SUM_TOL = 1e-12
DIST_SUM_TOL = 1e-9
CONDITION_LIMIT = 1e12
RESIDUAL_TOL = 1e-9

RAW_LAMBDA = "raw-lambda"
ESTIMATED_PI = "estimated-pi"
PROJECTED_PI = "projected-pi"
STAGES = (RAW_LAMBDA, ESTIMATED_PI, PROJECTED_PI)


class EstimationError(RuntimeError):
    """The estimator cannot produce a trustworthy result."""


@dataclass(frozen=True)
class PrivacyBudget:
    """A privacy level epsilon; math.inf means unbounded (no protection)."""

    epsilon: float

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.epsilon)

    def __str__(self):
        return "unbounded" if self.unbounded else f"{self.epsilon:.6g}"


def derive_rng(seed, *path) -> np.random.Generator:
    """Derive an independent random stream from a master seed and a key path.

    Streams for distinct paths are independent and do not depend on the order
    in which they are created, so parallel or reordered work stays
    reproducible. A live Generator passes through untouched (no path allowed).
    """
    if isinstance(seed, np.random.Generator):
        if path:
            raise ValueError("cannot derive a keyed stream from a live generator")
        return seed
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, path)]))


class RandomizationMatrix:
    """A validated row-stochastic response matrix.

    Construction checks shape, entry range, and row sums, and determines
    invertibility via a probe solve; singular matrices are accepted (they are
    legal inputs for privacy accounting) but refused later by estimate_pi.

    Matrices with a constant diagonal and one shared off-diagonal value carry
    a ``structure`` pair (diag, off) that unlocks O(1) per-record sampling and
    O(r) estimation; such matrices over large joint domains are kept in
    structured form only and never materialized densely.
    """

    _MATERIALIZE_LIMIT = 4096

    def __init__(self, entries):
        arr = np.array(entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"response matrix must be square, got shape {arr.shape}")
        if arr.shape[0] < 2:
            raise ValueError("response matrix needs at least 2 categories")
        if (arr < 0).any() or (arr > 1).any():
            raise ValueError("response matrix entries must lie in [0, 1]")
        worst = float(np.abs(arr.sum(axis=1) - 1.0).max())
        if worst > ROW_SUM_TOL:
            raise ValueError(f"rows must sum to 1 within {ROW_SUM_TOL:g}; worst error {worst:g}")
        arr.flags.writeable = False
        self._dim = arr.shape[0]
        self._entries = arr
        self._structure = self._detect_structure(arr)
        self._nonsingular, self._condition = self._probe()
        self._cdf = None

    @classmethod
    def structured(cls, dim: int, diag: float, off: float) -> "RandomizationMatrix":
        """Build a constant-diagonal matrix from its two defining scalars."""
        if dim < 2:
            raise ValueError("response matrix needs at least 2 categories")
        if not (0.0 <= off <= 1.0 and 0.0 <= diag <= 1.0):
            raise ValueError("response matrix entries must lie in [0, 1]")
        row_sum = diag + (dim - 1) * off
        if abs(row_sum - 1.0) > ROW_SUM_TOL:
            raise ValueError(f"rows must sum to 1 within {ROW_SUM_TOL:g}; got {row_sum!r}")
        self = object.__new__(cls)
        self._dim = dim
        self._entries = None
        self._structure = (float(diag), float(off))
        self._nonsingular, self._condition = self._probe()
        self._cdf = None
        return self

    @staticmethod
    def _detect_structure(arr):
        diag = arr[0, 0]
        if not (np.diagonal(arr) == diag).all():
            return None
        off_mask = ~np.eye(arr.shape[0], dtype=bool)
        off_values = arr[off_mask]
        if not (off_values == off_values[0]).all():
            return None
        return (float(diag), float(off_values[0]))

    def _probe(self):
        if self._structure is not None:
            diag, off = self._structure
            # Eigenvalues of (d-o)I + o*ones are d-o (r-1 times) and d+(r-1)o.
            eigs = np.abs([diag - off, diag + (self._dim - 1) * off])
            if eigs.min() == 0.0:
                return False, math.inf
            return True, float(eigs.max() / eigs.min())
        probe = np.ones(self._dim)
        try:
            np.linalg.solve(self._entries.T, probe)
        except np.linalg.LinAlgError:
            return False, math.inf
        return True, float(np.linalg.cond(self._entries))

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def entries(self) -> np.ndarray:
        if self._entries is None:
            if self._dim > self._MATERIALIZE_LIMIT:
                raise RuntimeError(
                    f"matrix of dimension {self._dim} is kept structured; "
                    "entries would not fit in memory"
                )
            diag, off = self._structure
            arr = np.full((self._dim, self._dim), off)
            np.fill_diagonal(arr, diag)
            arr.flags.writeable = False
            self._entries = arr
        return self._entries

    @property
    def structure(self):
        return self._structure

    @property
    def nonsingular(self) -> bool:
        return self._nonsingular

    @property
    def condition(self) -> float:
        return self._condition

    def apply_transpose(self, x: np.ndarray) -> np.ndarray:
        """Compute P^T x (the forward map from true to answer frequencies)."""
        if self._structure is not None:
            diag, off = self._structure
            return (diag - off) * x + off * x.sum()
        return self._entries.T @ x

    def _row_cdf(self):
        if self._cdf is None:
            cdf = np.cumsum(self.entries, axis=1)
            cdf[:, -1] = 1.0  # guard the top edge against accumulated rounding
            self._cdf = cdf
        return self._cdf


def keep_or_uniform_matrix(size: int, p: float) -> RandomizationMatrix:
    """Keep the true value with probability p, else answer uniformly.

    The resulting matrix has diagonal p + (1-p)/size and off-diagonal
    (1-p)/size (the uniform replacement can land on the true value too).
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"retention probability must be in (0, 1], got {p}")
    off = (1.0 - p) / size
    return RandomizationMatrix.structured(size, p + off, off)


def cluster_matrix(size: int, epsilon: float) -> RandomizationMatrix:
    """Response matrix calibrated to hit a target privacy level exactly.

    Diagonal 1 / (1 + (size-1) e^{-epsilon}), off-diagonal diag * e^{-epsilon};
    rows sum to one and epsilon_of returns exactly ``epsilon``. epsilon may be
    math.inf, which degenerates to the identity (no randomization).
    """
    if not epsilon > 0.0:
        raise ValueError(f"target epsilon must be positive, got {epsilon}")
    decay = math.exp(-epsilon)
    diag = 1.0 / (1.0 + (size - 1) * decay)
    return RandomizationMatrix.structured(size, diag, diag * decay)


def epsilon_of(matrix: RandomizationMatrix) -> PrivacyBudget:
    """Worst-case log-ratio of response likelihoods across true values.

    Any zero entry makes some response perfectly revealing, so the budget is
    reported as unbounded rather than a number.
    """
    if matrix.structure is not None:
        diag, off = matrix.structure
        if diag <= 0.0 or off <= 0.0:
            return PrivacyBudget(math.inf)
        hi, lo = max(diag, off), min(diag, off)
        return PrivacyBudget(math.log(hi / lo))
    entries = matrix.entries
    if (entries <= 0.0).any():
        return PrivacyBudget(math.inf)
    ratios = entries.max(axis=0) / entries.min(axis=0)
    return PrivacyBudget(float(np.log(ratios.max())))


def _respond(values: np.ndarray, matrix: RandomizationMatrix, uniforms: np.ndarray) -> np.ndarray:
    """Map one uniform draw per record to a response by inverse CDF."""
    if matrix.structure is not None:
        diag, off = matrix.structure
        keep_mass = diag - off
        if off == 0.0:
            return values.copy()
        replacement = np.floor((uniforms - keep_mass) / off).astype(np.int64)
        np.clip(replacement, 0, matrix.dim - 1, out=replacement)
        return np.where(uniforms < keep_mass, values, replacement)
    cdf = matrix._row_cdf()
    out = np.empty(values.shape[0], dtype=np.int64)
    step = 8192
    for start in range(0, values.shape[0], step):
        stop = min(start + step, values.shape[0])
        block = cdf[values[start:stop]]
        out[start:stop] = (block < uniforms[start:stop, None]).sum(axis=1)
    return out


def randomize(value: int, matrix: RandomizationMatrix, rng: np.random.Generator) -> int:
    """Randomize one value, consuming exactly one uniform draw."""
    if not 0 <= value < matrix.dim:
        raise ValueError(f"value {value} outside domain [0, {matrix.dim})")
    u = rng.random(1)
    return int(_respond(np.asarray([value], dtype=np.int64), matrix, u)[0])


def randomize_column(values, matrix: RandomizationMatrix, rng: np.random.Generator) -> np.ndarray:
    """Randomize a whole column; equivalent to per-record randomize calls.

    One uniform per record, consumed in record order, so a column call and a
    loop of scalar calls on the same stream produce identical output.
    """
    arr = np.asarray(values, dtype=np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= matrix.dim):
        raise ValueError(f"values outside domain [0, {matrix.dim})")
    return _respond(arr, matrix, rng.random(arr.shape[0]))


@dataclass
class DistributionEstimate:
    """A distribution over a flat domain, tagged with its pipeline stage.

    raw-lambda and projected-pi are proper distributions; estimated-pi sums to
    one but may carry negative coordinates (unbiased inversion can overshoot).
    """

    values: np.ndarray
    stage: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("distribution must be a non-empty vector")
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        total = float(self.values.sum())
        if abs(total - 1.0) > DIST_SUM_TOL:
            raise ValueError(f"{self.stage} values sum to {total!r}, not 1")
        if self.stage != ESTIMATED_PI and (self.values < 0).any():
            raise ValueError(f"{self.stage} values must be non-negative")

    @property
    def size(self) -> int:
        return self.values.size

    def to_text(self) -> str:
        lines = [f"# distribution\tstage={self.stage}\tsize={self.size}"]
        lines += [f"{i}\t{v!r}" for i, v in enumerate(self.values.tolist())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DistributionEstimate":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        # tolerate leading comment stamps (e.g. manifest references) above the header
        while lines and lines[0].startswith("#") and not lines[0].startswith("# distribution"):
            lines.pop(0)
        if not lines or not lines[0].startswith("# distribution"):
            raise ValueError("not a serialized distribution")
        fields = dict(part.split("=", 1) for part in lines[0].split("\t")[1:])
        size = int(fields["size"])
        values = np.empty(size)
        for ln in lines[1:]:
            idx, val = ln.split("\t")
            values[int(idx)] = float(val)
        return cls(values, fields["stage"])


def empirical_lambda(responses, size: int) -> DistributionEstimate:
    """Empirical answer distribution from randomized responses."""
    arr = np.asarray(responses, dtype=np.int64)
    if arr.size == 0:
        raise ValueError("need at least one response")
    if arr.min() < 0 or arr.max() >= size:
        raise ValueError(f"responses outside domain [0, {size})")
    counts = np.bincount(arr, minlength=size)
    return DistributionEstimate(counts / arr.size, RAW_LAMBDA)


def estimate_pi(lambda_hat, matrix: RandomizationMatrix) -> DistributionEstimate:
    """Unbiased inversion of the answer distribution: solve P^T pi = lambda.

    Uses a closed form for structured matrices (O(r)) and a linear solve
    otherwise; never forms an explicit inverse. Refuses singular or
    ill-conditioned matrices instead of returning garbage.
    """
    lam = lambda_hat.values if isinstance(lambda_hat, DistributionEstimate) else np.asarray(lambda_hat, float)
    if lam.shape != (matrix.dim,):
        raise ValueError(f"distribution size {lam.shape} does not match matrix dim {matrix.dim}")
    if not matrix.nonsingular:
        raise EstimationError("response matrix is singular; true distribution unrecoverable")
    if matrix.condition > CONDITION_LIMIT:
        raise EstimationError(
            f"response matrix condition {matrix.condition:.3e} exceeds {CONDITION_LIMIT:.0e}"
        )
    if matrix.structure is not None:
        diag, off = matrix.structure
        keep_mass = diag - off
        # Sherman-Morrison on (d-o)I + o*ones: subtract the rank-one part, rescale.
        shift = off * lam.sum() / (keep_mass + matrix.dim * off)
        pi = (lam - shift) / keep_mass
    else:
        pi = np.linalg.solve(matrix.entries.T, lam)
    residual = float(np.abs(matrix.apply_transpose(pi) - lam).max())
    if residual > RESIDUAL_TOL:
        raise EstimationError(f"solver residual {residual:.3e} exceeds {RESIDUAL_TOL:g}")
    return DistributionEstimate(pi, ESTIMATED_PI)


def project_to_simplex(estimate) -> DistributionEstimate:
    """Clamp negative coordinates to zero and rescale to total mass one.

    Idempotent: a proper distribution passes through unchanged.
    """
    values = estimate.values if isinstance(estimate, DistributionEstimate) else np.asarray(estimate, float)
    clipped = np.clip(values, 0.0, None)
    total = clipped.sum()
    if total <= 0.0:
        raise EstimationError("no positive mass to project onto the simplex")
    return DistributionEstimate(clipped / total, PROJECTED_PI)
