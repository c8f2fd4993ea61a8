"""End-to-end randomization protocols and count-query evaluation.

Four protocols share one query interface:

* ``independent`` — each attribute randomized on its own; joint frequencies
  answered by the product of the per-attribute corrected marginals.
* ``joint`` — all attributes randomized together over their joint domain
  (only viable while that domain stays small).
* ``clusters`` — attributes grouped by dependence, each group randomized
  jointly with a budget matched to the per-attribute one, cross-group
  frequencies by the product rule.
* ``randomized`` — baseline: the randomized records themselves answer
  queries with no correction at all.

Every protocol (except the baseline) can be followed by weight adjustment,
which reweights the randomized records until their marginals match the
corrected estimates. Count queries are answered from whichever estimate
object a run produced; true counts come only from the EvaluationOracle,
which exists so plaintext access stays visibly quarantined in evaluation
code.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .adjustment import WeightedDataset, as_attribute_tuple, rr_adjust
from .clustering import ClusterPartition, cluster_attributes
from .dataset import Dataset, JointDomain
from .dependence import pairwise_matrix
from .mpc import (
    RR_PER_ATTRIBUTE,
    RR_PER_PAIR,
    SECURE_BIVARIATE,
    MessageLog,
    estimate_dependences_rr_per_attribute,
    estimate_dependences_rr_per_pair,
    estimate_dependences_secure_bivariate,
    make_parties,
)
from .rr_core import (
    DistributionEstimate,
    PrivacyBudget,
    RandomizationMatrix,
    cluster_matrix,
    derive_rng,
    empirical_lambda,
    epsilon_of,
    estimate_pi,
    keep_or_uniform_matrix,
    project_to_simplex,
    randomize_column,
)

INDEPENDENT = "independent"
JOINT = "joint"
CLUSTERS = "clusters"
RANDOMIZED = "randomized"
METHODS = (INDEPENDENT, JOINT, CLUSTERS, RANDOMIZED)

PLAINTEXT_ORACLE = "plaintext-oracle"
DEPENDENCE_METHODS = (PLAINTEXT_ORACLE, RR_PER_ATTRIBUTE, SECURE_BIVARIATE, RR_PER_PAIR)

DEFAULT_JOINT_CAP = 10**6


class PipelineError(RuntimeError):
    pass


class UndersampledWarning(UserWarning):
    """Joint domain larger than the record count: estimates will be noisy."""


@dataclass(frozen=True)
class PipelineConfig:
    """Everything needed to rerun a protocol deterministically.

    Exactly one of ``p`` (keep probability) and ``epsilon`` (per-release
    privacy level) must be set; it calibrates every randomization matrix the
    run builds. ``size_cap`` / ``min_dependence`` drive clustering;
    ``dependence_method`` picks how the dependence matrix is obtained when
    clustering, plaintext-oracle being the evaluation shortcut and the three
    protocol names the distributed estimators.
    """

    method: str
    p: float | None = None
    epsilon: float | None = None
    adjust: bool = False
    size_cap: int = 50
    min_dependence: float = 0.1
    dependence_method: str = PLAINTEXT_ORACLE
    seed: int = 0
    max_joint_size: int = DEFAULT_JOINT_CAP
    adjust_max_delta: float = 1e-8
    adjust_max_iterations: int = 50
    query_attribute_count: int = 2

    def __post_init__(self):
        if self.method not in METHODS:
            raise PipelineError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if (self.p is None) == (self.epsilon is None):
            raise PipelineError("set exactly one of p and epsilon")
        if self.p is not None and not 0 < self.p <= 1:
            raise PipelineError(f"keep probability must be in (0, 1], got {self.p!r}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise PipelineError(f"epsilon must be positive, got {self.epsilon!r}")
        if not self.size_cap >= 1:
            raise PipelineError("size_cap must be at least 1")
        if not 0 <= self.min_dependence <= 1:
            raise PipelineError("min_dependence must lie in [0, 1]")
        if self.dependence_method not in DEPENDENCE_METHODS:
            raise PipelineError(
                f"unknown dependence method {self.dependence_method!r}; "
                f"expected one of {DEPENDENCE_METHODS}"
            )
        if self.method == RANDOMIZED and self.adjust:
            raise PipelineError("the raw-randomized baseline has no estimates to adjust toward")
        if self.query_attribute_count < 1:
            raise PipelineError("query_attribute_count must be at least 1")

    @property
    def strength(self) -> float:
        return self.p if self.p is not None else self.epsilon

    @property
    def label(self) -> str:
        return self.method + ("+adjust" if self.adjust else "")

    def attribute_matrix(self, size: int) -> RandomizationMatrix:
        if self.p is not None:
            return keep_or_uniform_matrix(size, self.p)
        return cluster_matrix(size, self.epsilon)


# ---------------------------------------------------------------------------
# Count queries and their evaluation


@dataclass(frozen=True)
class CountQuery:
    """A subset of value combinations over a chosen attribute subset."""

    attributes: tuple[int, ...]
    combinations: tuple[tuple[int, ...], ...]
    coverage: float

    def __post_init__(self):
        attrs = tuple(int(a) for a in self.attributes)
        combos = tuple(tuple(int(v) for v in c) for c in self.combinations)
        object.__setattr__(self, "attributes", attrs)
        object.__setattr__(self, "combinations", combos)
        if not attrs or len(set(attrs)) != len(attrs):
            raise PipelineError("query attributes must be distinct and nonempty")
        if any(len(c) != len(attrs) for c in combos):
            raise PipelineError("every combination must give one value per query attribute")
        if len(set(combos)) != len(combos):
            raise PipelineError("query combinations must be distinct")
        if not 0 < self.coverage <= 1:
            raise PipelineError("coverage must lie in (0, 1]")

    @classmethod
    def random(cls, attributes, sizes, coverage: float, rng: np.random.Generator) -> "CountQuery":
        """Draw round(coverage * domain) distinct combinations, at least one."""
        if not 0 < coverage < 1:
            raise PipelineError("random queries need coverage in (0, 1)")
        attrs = as_attribute_tuple(attributes)
        domain = JointDomain([sizes[a] for a in attrs], attrs)
        count = max(1, round(coverage * domain.size))
        codes = rng.choice(domain.size, size=count, replace=False)
        combos = [tuple(row) for row in domain.decode(np.sort(codes))]
        return cls(attrs, tuple(combos), coverage)

    @classmethod
    def full_domain(cls, attributes, sizes) -> "CountQuery":
        attrs = as_attribute_tuple(attributes)
        domain = JointDomain([sizes[a] for a in attrs], attrs)
        combos = [tuple(row) for row in domain.decode(np.arange(domain.size))]
        return cls(attrs, tuple(combos), 1.0)

    def complement(self, sizes) -> "CountQuery":
        """The unchosen combinations over the same attributes."""
        domain = JointDomain([sizes[a] for a in self.attributes], self.attributes)
        chosen = set(domain.encode(np.asarray(self.combinations, dtype=np.int64)).tolist())
        rest = [c for c in range(domain.size) if c not in chosen]
        if not rest:
            raise PipelineError("full-domain query has no complement")
        combos = [tuple(row) for row in domain.decode(np.asarray(rest, dtype=np.int64))]
        return CountQuery(self.attributes, tuple(combos), 1.0 - len(chosen) / domain.size)


@dataclass(frozen=True)
class QueryResult:
    """True vs estimated count for one query, with derived errors."""

    true_count: float
    estimated_count: float
    absolute_error: float = field(init=False)
    relative_error: float | None = field(init=False)

    def __post_init__(self):
        err = abs(self.estimated_count - self.true_count)
        object.__setattr__(self, "absolute_error", err)
        object.__setattr__(
            self, "relative_error", err / self.true_count if self.true_count > 0 else None
        )


class EvaluationOracle:
    """Plaintext reference answers — evaluation code only.

    Protocol code must never touch this class: it reads the true records
    directly, which the protocols exist to avoid. It lives here so every
    plaintext access point is greppable.
    """

    def __init__(self, data: Dataset):
        self._data = data
        self._counts: dict[tuple[int, ...], np.ndarray] = {}

    @property
    def n(self) -> int:
        return self._data.n

    @property
    def sizes(self) -> tuple[int, ...]:
        return self._data.sizes

    def _table(self, attributes: tuple[int, ...]) -> np.ndarray:
        if attributes not in self._counts:
            domain = JointDomain([self._data.sizes[a] for a in attributes], attributes)
            codes = domain.encode(self._data.records[:, list(attributes)])
            self._counts[attributes] = np.bincount(codes, minlength=domain.size)
        return self._counts[attributes]

    def true_count(self, query: CountQuery) -> int:
        domain = JointDomain([self._data.sizes[a] for a in query.attributes], query.attributes)
        codes = domain.encode(np.asarray(query.combinations, dtype=np.int64))
        return int(self._table(query.attributes)[codes].sum())

    def joint_distribution(self, attributes) -> np.ndarray:
        attrs = as_attribute_tuple(attributes)
        return self._table(attrs) / self._data.n

    def dependence_matrix(self) -> np.ndarray:
        return pairwise_matrix(self._data)


# ---------------------------------------------------------------------------
# Estimate objects: everything a protocol publishes, behind one interface


def _combo_columns(combinations) -> np.ndarray:
    return np.asarray(combinations, dtype=np.int64)


class MarginalProductEstimate:
    """Joint probabilities as the product of per-attribute marginals."""

    def __init__(self, marginals):
        self.marginals = [np.asarray(m.values if hasattr(m, "values") else m, float)
                          for m in marginals]

    def subset_probability(self, attributes, combinations) -> float:
        combos = _combo_columns(combinations)
        mass = np.ones(combos.shape[0])
        for pos, a in enumerate(as_attribute_tuple(attributes)):
            mass *= self.marginals[a][combos[:, pos]]
        return float(mass.sum())


class JointDistributionEstimate:
    """Joint probabilities read (and marginalized) from one full table."""

    def __init__(self, distribution, attributes, sizes):
        self.attributes = as_attribute_tuple(attributes)
        self.sizes = tuple(int(sizes[a]) for a in self.attributes)
        values = np.asarray(
            distribution.values if hasattr(distribution, "values") else distribution, float
        )
        self.table = values.reshape(self.sizes)
        self._marginals: dict[tuple[int, ...], np.ndarray] = {}

    def _marginal(self, positions: tuple[int, ...]) -> np.ndarray:
        # positions arrive sorted; the result keeps that axis order.
        if positions not in self._marginals:
            drop = tuple(i for i in range(len(self.sizes)) if i not in positions)
            self._marginals[positions] = self.table.sum(axis=drop) if drop else self.table
        return self._marginals[positions]

    def probabilities(self, attributes, combinations) -> np.ndarray:
        """Estimated probability of each combination, as a vector."""
        attrs = as_attribute_tuple(attributes)
        place = {a: i for i, a in enumerate(self.attributes)}
        try:
            positions = tuple(place[a] for a in attrs)
        except KeyError as missing:
            raise PipelineError(f"attribute {missing} not covered by this estimate") from None
        order = tuple(sorted(positions))
        marg = self._marginal(order)
        combos = _combo_columns(combinations)
        index = tuple(combos[:, positions.index(pos)] for pos in order)
        return marg[index]

    def subset_probability(self, attributes, combinations) -> float:
        return float(self.probabilities(attributes, combinations).sum())


class ClusterProductEstimate:
    """Product rule across clusters, exact joint inside each cluster."""

    def __init__(self, partition: ClusterPartition, distributions, sizes):
        self.partition = partition
        self.sizes = tuple(int(s) for s in sizes)
        self.parts = [
            JointDistributionEstimate(dist, cluster, self.sizes)
            for cluster, dist in zip(partition.clusters, distributions)
        ]

    def subset_probability(self, attributes, combinations) -> float:
        attrs = as_attribute_tuple(attributes)
        where = {a: pos for pos, a in enumerate(attrs)}
        combos = _combo_columns(combinations)
        mass = np.ones(combos.shape[0])
        for cluster, part in zip(self.partition.clusters, self.parts):
            inside = [a for a in cluster if a in where]
            if not inside:
                continue
            sub = combos[:, [where[a] for a in inside]]
            mass *= part.probabilities(inside, sub)
        return float(mass.sum())


class EmpiricalEstimate:
    """Raw record frequencies — the uncorrected baseline and the p=1 case."""

    def __init__(self, records, sizes):
        self.records = np.asarray(records, dtype=np.int64)
        self.sizes = tuple(int(s) for s in sizes)
        self._tables: dict[tuple[int, ...], np.ndarray] = {}

    def subset_probability(self, attributes, combinations) -> float:
        attrs = as_attribute_tuple(attributes)
        domain = JointDomain([self.sizes[a] for a in attrs], attrs)
        if attrs not in self._tables:
            codes = domain.encode(self.records[:, list(attrs)])
            self._tables[attrs] = np.bincount(codes, minlength=domain.size) / self.records.shape[0]
        wanted = domain.encode(_combo_columns(combinations))
        return float(self._tables[attrs][wanted].sum())


class ReweightedEstimate:
    """Weighted record frequencies after marginal adjustment."""

    def __init__(self, weighted: WeightedDataset, sizes):
        self.weighted = weighted
        self.sizes = tuple(int(s) for s in sizes)
        self._tables: dict[tuple[int, ...], np.ndarray] = {}

    def subset_probability(self, attributes, combinations) -> float:
        attrs = as_attribute_tuple(attributes)
        domain = JointDomain([self.sizes[a] for a in attrs], attrs)
        if attrs not in self._tables:
            total = self.weighted.weights.sum()
            self._tables[attrs] = self.weighted.marginal(attrs, self.sizes) / total
        wanted = domain.encode(_combo_columns(combinations))
        return float(self._tables[attrs][wanted].sum())


def estimate_count(query: CountQuery, estimate, n: int) -> float:
    """Estimated number of records whose values fall in the query's subset."""
    return n * estimate.subset_probability(query.attributes, query.combinations)


def evaluate_query(query: CountQuery, estimate, oracle: EvaluationOracle) -> QueryResult:
    return QueryResult(
        true_count=oracle.true_count(query),
        estimated_count=estimate_count(query, estimate, oracle.n),
    )


# ---------------------------------------------------------------------------
# Protocol runs


@dataclass
class IndependentRun:
    """Per-attribute randomization output."""

    randomized: np.ndarray
    sizes: tuple[int, ...]
    matrices: list[RandomizationMatrix]
    raw_marginals: list[DistributionEstimate]
    marginals: list[DistributionEstimate]
    budgets: list[PrivacyBudget]

    @property
    def total_epsilon(self) -> float:
        return float(sum(b.epsilon for b in self.budgets))

    def estimate(self) -> MarginalProductEstimate:
        return MarginalProductEstimate(self.marginals)

    def raw_estimate(self) -> EmpiricalEstimate:
        return EmpiricalEstimate(self.randomized, self.sizes)


def run_rr_independent(data: Dataset, p: float | None = None, epsilon: float | None = None,
                       seed=0) -> IndependentRun:
    """Randomize every attribute separately and correct each marginal.

    Args:
        data: true records (left untouched).
        p: keep probability for keep-or-uniform matrices.
        epsilon: per-attribute privacy level, alternative to p.
        seed: integer seed or a Generator to draw from.

    Returns:
        IndependentRun with the randomized records, per-attribute corrected
        marginals, and per-attribute privacy budgets.
    """
    config = PipelineConfig(method=INDEPENDENT, p=p, epsilon=epsilon)
    rng = derive_rng(seed)
    randomized = np.empty_like(data.records)
    matrices, raw, corrected, budgets = [], [], [], []
    for j in range(data.m):
        matrix = config.attribute_matrix(data.sizes[j])
        randomized[:, j] = randomize_column(data.records[:, j], matrix, rng)
        lam = empirical_lambda(randomized[:, j], data.sizes[j])
        pi = project_to_simplex(estimate_pi(lam, matrix))
        matrices.append(matrix)
        raw.append(lam)
        corrected.append(pi)
        budgets.append(epsilon_of(matrix))
    return IndependentRun(
        randomized=randomized, sizes=data.sizes, matrices=matrices,
        raw_marginals=raw, marginals=corrected, budgets=budgets,
    )


@dataclass
class JointRun:
    """Whole-record (or attribute-subset) joint randomization output."""

    attributes: tuple[int, ...]
    sizes: tuple[int, ...]
    randomized: np.ndarray
    randomized_codes: np.ndarray
    matrix: RandomizationMatrix
    raw_distribution: DistributionEstimate
    distribution: DistributionEstimate
    budget: PrivacyBudget

    def estimate(self) -> JointDistributionEstimate:
        return JointDistributionEstimate(self.distribution, self.attributes, self.sizes)


def run_rr_joint(data: Dataset, attributes=None, p: float | None = None,
                 epsilon: float | None = None, seed=0,
                 max_joint_size: int = DEFAULT_JOINT_CAP) -> JointRun:
    """Randomize the selected attributes as one value over their joint domain.

    Exact in the limit — no independence assumption — but the joint domain
    grows multiplicatively, so a size guard refuses to build beyond
    ``max_joint_size`` and an UndersampledWarning flags domains larger than
    the record count.
    """
    config = PipelineConfig(method=JOINT, p=p, epsilon=epsilon, max_joint_size=max_joint_size)
    attrs = as_attribute_tuple(attributes if attributes is not None else range(data.m))
    domain = JointDomain([data.sizes[a] for a in attrs], attrs)
    if domain.size > max_joint_size:
        raise PipelineError(
            f"joint domain of {domain.size} combinations exceeds the cap of {max_joint_size}"
        )
    if domain.size > data.n:
        warnings.warn(
            f"joint domain ({domain.size}) exceeds the record count ({data.n}); "
            "expect noisy estimates",
            UndersampledWarning, stacklevel=2,
        )
    rng = derive_rng(seed)
    matrix = config.attribute_matrix(domain.size)
    codes = domain.encode(data.records[:, list(attrs)])
    randomized_codes = randomize_column(codes, matrix, rng)
    lam = empirical_lambda(randomized_codes, domain.size)
    pi = project_to_simplex(estimate_pi(lam, matrix))
    sizes = tuple(int(s) for s in data.sizes)
    return JointRun(
        attributes=attrs, sizes=sizes,
        randomized=domain.decode(randomized_codes), randomized_codes=randomized_codes,
        matrix=matrix, raw_distribution=lam, distribution=pi, budget=epsilon_of(matrix),
    )


@dataclass
class ClustersRun:
    """Per-cluster joint randomization output."""

    partition: ClusterPartition
    sizes: tuple[int, ...]
    randomized: np.ndarray
    matrices: list[RandomizationMatrix]
    distributions: list[DistributionEstimate]
    budgets: list[PrivacyBudget]
    attribute_budgets: list[PrivacyBudget]
    dependence: np.ndarray

    @property
    def total_epsilon(self) -> float:
        return float(sum(b.epsilon for b in self.budgets))

    def estimate(self) -> ClusterProductEstimate:
        return ClusterProductEstimate(self.partition, self.distributions, self.sizes)


def dependence_for_clustering(data: Dataset, config: PipelineConfig,
                              log: MessageLog | None = None) -> np.ndarray:
    """Dependence matrix via the configured estimation route.

    plaintext-oracle reads the true records directly (evaluation shortcut);
    the other three run the corresponding distributed protocol on simulated
    parties seeded from the config.
    """
    if config.dependence_method == PLAINTEXT_ORACLE:
        return pairwise_matrix(data)
    parties = make_parties(data.records, seed=int(derive_rng(config.seed, 2).integers(2**63)))
    kinds = tuple(a.kind for a in data.schema)
    if config.dependence_method == RR_PER_ATTRIBUTE:
        strength = config.p if config.p is not None else 0.5
        report = estimate_dependences_rr_per_attribute(parties, strength, data.sizes, kinds, log)
    elif config.dependence_method == SECURE_BIVARIATE:
        report = estimate_dependences_secure_bivariate(parties, data.sizes, kinds, log)
    else:
        strength = config.p if config.p is not None else 0.9
        report = estimate_dependences_rr_per_pair(parties, strength, data.sizes, kinds, log)
    return report.matrix


def run_rr_clusters(data: Dataset, config: PipelineConfig,
                    partition: ClusterPartition | None = None, seed=None) -> ClustersRun:
    """Group dependent attributes and randomize each group jointly.

    Each cluster's matrix is calibrated so its privacy level equals the sum
    of its members' per-attribute levels; the total budget therefore matches
    the independent protocol exactly, while intra-cluster dependences are
    preserved in the estimate.
    """
    rng = derive_rng(config.seed if seed is None else seed)
    dep = None
    if partition is None:
        dep = dependence_for_clustering(data, config)
        partition = cluster_attributes(dep, data.sizes, config.size_cap, config.min_dependence)
    if partition.m != data.m:
        raise PipelineError(f"partition covers {partition.m} attributes, data has {data.m}")
    attribute_budgets = [epsilon_of(config.attribute_matrix(r)) for r in data.sizes]
    randomized = np.empty_like(data.records)
    matrices, distributions, budgets = [], [], []
    for cluster in partition.clusters:
        domain = JointDomain([data.sizes[a] for a in cluster], cluster)
        level = sum(attribute_budgets[a].epsilon for a in cluster)
        matrix = cluster_matrix(domain.size, level)
        codes = domain.encode(data.records[:, list(cluster)])
        randomized_codes = randomize_column(codes, matrix, rng)
        randomized[:, list(cluster)] = domain.decode(randomized_codes)
        lam = empirical_lambda(randomized_codes, domain.size)
        distributions.append(project_to_simplex(estimate_pi(lam, matrix)))
        matrices.append(matrix)
        budgets.append(epsilon_of(matrix))
    return ClustersRun(
        partition=partition, sizes=data.sizes, randomized=randomized, matrices=matrices,
        distributions=distributions, budgets=budgets, attribute_budgets=attribute_budgets,
        dependence=dep if dep is not None else np.eye(data.m),
    )


# ---------------------------------------------------------------------------
# Unified dispatch and the experiment loop


@dataclass
class PipelineResult:
    """One protocol run packaged for query answering."""

    config: PipelineConfig
    randomized: np.ndarray
    estimate: object
    partition: ClusterPartition | None = None
    weighted: WeightedDataset | None = None
    total_epsilon: float = float("nan")


def _adjusted_estimate(randomized, targets, sizes, config):
    weighted = rr_adjust(
        randomized, targets, sizes,
        max_weight_delta=config.adjust_max_delta,
        max_iterations=config.adjust_max_iterations,
    )
    return weighted, ReweightedEstimate(weighted, sizes)


def run_pipeline(data: Dataset, config: PipelineConfig,
                 partition: ClusterPartition | None = None, seed=None) -> PipelineResult:
    """Run the configured protocol once and package its query interface."""
    rng = derive_rng(config.seed if seed is None else seed)
    if config.method in (INDEPENDENT, RANDOMIZED):
        run = run_rr_independent(data, p=config.p, epsilon=config.epsilon, seed=rng)
        if config.method == RANDOMIZED:
            return PipelineResult(config, run.randomized, run.raw_estimate(),
                                  total_epsilon=run.total_epsilon)
        result = PipelineResult(config, run.randomized, run.estimate(),
                                total_epsilon=run.total_epsilon)
        if config.adjust:
            targets = [((j,), run.marginals[j].values) for j in range(data.m)]
            result.weighted, result.estimate = _adjusted_estimate(
                run.randomized, targets, data.sizes, config)
        return result
    if config.method == JOINT:
        run = run_rr_joint(data, None, p=config.p, epsilon=config.epsilon, seed=rng,
                           max_joint_size=config.max_joint_size)
        result = PipelineResult(config, run.randomized, run.estimate(),
                                total_epsilon=run.budget.epsilon)
        if config.adjust:
            targets = [(run.attributes, run.distribution.values)]
            result.weighted, result.estimate = _adjusted_estimate(
                run.randomized, targets, data.sizes, config)
        return result
    run = run_rr_clusters(data, config, partition=partition, seed=rng)
    result = PipelineResult(config, run.randomized, run.estimate(),
                            partition=run.partition, total_epsilon=run.total_epsilon)
    if config.adjust:
        targets = [
            (cluster, dist.values)
            for cluster, dist in zip(run.partition.clusters, run.distributions)
        ]
        result.weighted, result.estimate = _adjusted_estimate(
            run.randomized, targets, data.sizes, config)
    return result


@dataclass(frozen=True)
class ExperimentRow:
    method: str
    strength: float
    size_cap: int
    min_dependence: float
    sigma: float
    median_absolute_error: float
    median_relative_error: float
    runs: int


@dataclass
class ExperimentResult:
    config: PipelineConfig
    rows: list[ExperimentRow]
    absolute_samples: dict[float, list[float]]
    relative_samples: dict[float, list[float]]

    def row_for(self, sigma: float) -> ExperimentRow:
        for row in self.rows:
            if row.sigma == sigma:
                return row
        raise KeyError(sigma)

    def to_tsv(self, manifest: str | None = None) -> str:
        lines = []
        if manifest is not None:
            lines.append(f"# manifest: {manifest}")
        lines.append("method\tstrength\tsize_cap\tmin_dependence\tsigma"
                     "\tmedian_abs_error\tmedian_rel_error\truns")
        for row in self.rows:
            lines.append(
                f"{row.method}\t{row.strength!r}\t{row.size_cap}\t{row.min_dependence!r}"
                f"\t{row.sigma!r}\t{row.median_absolute_error!r}"
                f"\t{row.median_relative_error!r}\t{row.runs}"
            )
        return "\n".join(lines) + "\n"


def run_experiment(data: Dataset, config: PipelineConfig, sigmas, runs: int) -> ExperimentResult:
    """Monte-Carlo accuracy measurement over random count queries.

    Per run, the records are re-randomized once and each coverage level gets
    a fresh random query over freshly drawn attributes; medians are taken
    per coverage level across runs. Two parallel streams are derived from
    the config seed — one for randomization, one for queries — so different
    methods under the same seed face identical queries (paired comparison).

    Relative errors are skipped (not zero-filled) when the true count is 0.
    """
    if runs < 1:
        raise PipelineError("need at least one run")
    sigmas = [float(s) for s in sigmas]
    oracle = EvaluationOracle(data)
    partition = None
    if config.method == CLUSTERS:
        dep = dependence_for_clustering(data, config)
        partition = cluster_attributes(dep, data.sizes, config.size_cap, config.min_dependence)
    absolute = {s: [] for s in sigmas}
    relative = {s: [] for s in sigmas}
    for k in range(runs):
        run_rng = derive_rng(config.seed, 0, k)
        query_rng = derive_rng(config.seed, 1, k)
        result = run_pipeline(data, config, partition=partition, seed=run_rng)
        for sigma in sigmas:
            attrs = tuple(sorted(
                int(a) for a in
                query_rng.choice(data.m, size=config.query_attribute_count, replace=False)
            ))
            query = CountQuery.random(attrs, data.sizes, sigma, query_rng)
            outcome = evaluate_query(query, result.estimate, oracle)
            absolute[sigma].append(outcome.absolute_error)
            if outcome.relative_error is not None:
                relative[sigma].append(outcome.relative_error)
    rows = [
        ExperimentRow(
            method=config.label, strength=config.strength, size_cap=config.size_cap,
            min_dependence=config.min_dependence, sigma=sigma,
            median_absolute_error=float(np.median(absolute[sigma])),
            median_relative_error=(
                float(np.median(relative[sigma])) if relative[sigma] else float("nan")
            ),
            runs=runs,
        )
        for sigma in sigmas
    ]
    return ExperimentResult(config=config, rows=rows,
                            absolute_samples=absolute, relative_samples=relative)
