"""Simulated multi-party protocols over locally held records.

Each simulated party holds one record and her own random stream. Counting
queries run as additive secret sharing over the residues mod n+1: every party
deals shares summing to zero, so the published per-party sums reveal only the
total count. Three dependence-estimation protocols with different
privacy/accuracy trade-offs are built on top.

The MessageLog captures everything that would cross the wire, which is what
the privacy-hygiene tests inspect: plaintext records never appear in it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dependence import ContingencyTable, score_from_joint
from .rr_core import (
    RAW_LAMBDA,
    DistributionEstimate,
    derive_rng,
    epsilon_of,
    estimate_pi,
    keep_or_uniform_matrix,
    project_to_simplex,
    randomize,
)

RR_PER_ATTRIBUTE = "rr-per-attribute"
SECURE_BIVARIATE = "secure-bivariate"
RR_PER_PAIR = "rr-per-pair"


class ProtocolError(RuntimeError):
    pass


@dataclass
class Party:
    """One data holder: an index, a private record, and a private stream."""

    index: int
    record: tuple[int, ...]
    rng: np.random.Generator


def make_parties(records, seed: int) -> list[Party]:
    """Wrap encoded records into parties with independent derived streams."""
    arr = records.records if hasattr(records, "records") else np.asarray(records, dtype=np.int64)
    return [
        Party(index=i, record=tuple(int(v) for v in arr[i]), rng=derive_rng(seed, i))
        for i in range(arr.shape[0])
    ]


@dataclass
class LogEntry:
    step: str
    sender: str
    payload: dict


class MessageLog:
    """Counts protocol messages; optionally retains their payloads.

    Retention is optional because share traffic is quadratic in n; counters
    alone suffice for cost reporting.
    """

    def __init__(self, keep_payloads: bool = True):
        self.keep_payloads = keep_payloads
        self.entries: list[LogEntry] = []
        self.counts: dict[str, int] = {}

    def log(self, step: str, sender: str, **payload):
        self.counts[step] = self.counts.get(step, 0) + 1
        if self.keep_payloads:
            self.entries.append(LogEntry(step, sender, payload))

    def bump(self, step: str, amount: int):
        self.counts[step] = self.counts.get(step, 0) + amount

    def count(self, step: str | None = None) -> int:
        if step is None:
            return sum(self.counts.values())
        return self.counts.get(step, 0)

    def to_text(self) -> str:
        lines = []
        for e in self.entries:
            fields = "\t".join(f"{k}={v}" for k, v in e.payload.items())
            lines.append(f"{e.step}\t{e.sender}\t{fields}")
        return "\n".join(lines) + ("\n" if lines else "")


def share_vector(party: Party, modulus: int, count: int) -> np.ndarray:
    """Deal ``count`` additive shares summing to 0 mod ``modulus``.

    The first count-1 shares are uniform residues from the party's own
    stream; the last is fixed to close the sum (and is therefore itself
    marginally uniform).
    """
    head = party.rng.integers(0, modulus, size=count - 1)
    last = (-int(head.sum())) % modulus
    return np.append(head, np.int64(last))


def secure_sum_count(parties, predicate, log: MessageLog | None = None) -> int:
    """Count parties satisfying a locally evaluated predicate.

    Every party deals one share to each peer; each party then publishes the
    sum of the shares addressed to her plus her own 0/1 predicate value, all
    mod n+1. The published values sum to the exact count, while each
    individual bit stays hidden behind the shares.
    """
    n = len(parties)
    if n < 2:
        raise ProtocolError("secure summation needs at least two parties")
    modulus = n + 1
    column_sums = np.zeros(n, dtype=np.int64)
    for pos, party in enumerate(parties):
        shares = share_vector(party, modulus, n)
        column_sums += shares
        if log is not None:
            if log.keep_payloads:
                for j in range(n):
                    if j != pos:
                        log.log("share", f"party-{party.index}",
                                to=f"party-{parties[j].index}", value=int(shares[j]))
            else:
                log.bump("share", n - 1)
    total = 0
    for pos, party in enumerate(parties):
        held = int(column_sums[pos]) + int(bool(predicate(party)))
        published = held % modulus
        if log is not None:
            log.log("broadcast", f"party-{party.index}", value=published)
        total += published
    return total % modulus


@dataclass
class DependenceEstimationReport:
    """Outcome of one distributed dependence-estimation protocol."""

    method: str
    matrix: np.ndarray
    privacy: dict
    messages: dict[str, int] = field(default_factory=dict)


def _pair_iter(m):
    for i in range(m):
        for j in range(i + 1, m):
            yield i, j


def estimate_dependences_rr_per_attribute(
    parties, p: float, sizes, kinds, log: MessageLog | None = None
) -> DependenceEstimationReport:
    """Every party publishes a randomized version of each attribute.

    Dependence is then measured directly on the randomized table. Cheap (one
    message per party per attribute) but the scores are attenuated by the
    randomization, and each party spends the sum of the per-attribute budgets
    (sequential composition).
    """
    if log is None:
        log = MessageLog(keep_payloads=False)
    m = len(sizes)
    matrices = [keep_or_uniform_matrix(r, p) for r in sizes]
    n = len(parties)
    randomized = np.empty((n, m), dtype=np.int64)
    for pos, party in enumerate(parties):
        for a in range(m):
            value = randomize(party.record[a], matrices[a], party.rng)
            randomized[pos, a] = value
            log.log("publish-randomized", f"party-{party.index}", attribute=a, value=value)
    scores = np.eye(m)
    for i, j in _pair_iter(m):
        table = ContingencyTable.from_columns(randomized[:, i], randomized[:, j], sizes[i], sizes[j])
        scores[i, j] = scores[j, i] = score_from_joint(
            table.joint_frequencies(), kinds[i], kinds[j]
        ).value
    budgets = [epsilon_of(mat).epsilon for mat in matrices]
    return DependenceEstimationReport(
        method=RR_PER_ATTRIBUTE,
        matrix=scores,
        privacy={
            "model": "sequential composition over per-attribute releases",
            "per_attribute_epsilon": budgets,
            "per_party_epsilon": float(sum(budgets)),
        },
        messages=dict(log.counts),
    )


def estimate_dependences_secure_bivariate(
    parties, sizes, kinds, log: MessageLog | None = None
) -> DependenceEstimationReport:
    """Exact pairwise tables computed cell by cell with secure sums.

    No randomization: the aggregates are exact, dependence scores match the
    plaintext ones, and nothing but masked residues crosses the wire. The
    released tables themselves are exact statistics, so no differential
    privacy level applies to them.
    """
    if log is None:
        log = MessageLog(keep_payloads=False)
    m = len(sizes)
    n = len(parties)
    scores = np.eye(m)
    for i, j in _pair_iter(m):
        counts = np.empty((sizes[i], sizes[j]), dtype=np.int64)
        for a in range(sizes[i]):
            for b in range(sizes[j]):
                counts[a, b] = secure_sum_count(
                    parties, lambda pt, a=a, b=b: pt.record[i] == a and pt.record[j] == b, log
                )
        if counts.sum() != n:
            raise ProtocolError(f"pair ({i}, {j}) counts sum to {counts.sum()}, expected {n}")
        scores[i, j] = scores[j, i] = score_from_joint(counts / n, kinds[i], kinds[j]).value
    return DependenceEstimationReport(
        method=SECURE_BIVARIATE,
        matrix=scores,
        privacy={"model": "exact aggregates under secure summation; no randomization applied"},
        messages=dict(log.counts),
    )


def estimate_dependences_rr_per_pair(
    parties, masks, sizes, kinds, log: MessageLog | None = None
) -> DependenceEstimationReport:
    """Each pair's joint value is randomized locally, then tallied securely.

    ``masks`` is either a retention probability (a keep-or-uniform matrix is
    built over each pair domain) or a {(i, j): RandomizationMatrix} mapping.
    The masked pair frequencies are inverted and projected before scoring, so
    scores are estimates of the plaintext ones rather than attenuated copies.

    Two budget accountings are reported: the sequential view charges each
    attribute for every pair release it joins; the anonymous-release view
    charges only the single worst release, on the argument that tallies of
    unlinkable masked values expose each record at most once per pair.
    """
    if log is None:
        log = MessageLog(keep_payloads=False)
    m = len(sizes)
    n = len(parties)
    if isinstance(masks, dict):
        matrices = dict(masks)
    else:
        matrices = {
            (i, j): keep_or_uniform_matrix(sizes[i] * sizes[j], float(masks))
            for i, j in _pair_iter(m)
        }
    scores = np.eye(m)
    pair_budget = {}
    for i, j in _pair_iter(m):
        matrix = matrices[(i, j)]
        domain = sizes[i] * sizes[j]
        if matrix.dim != domain:
            raise ProtocolError(f"mask for pair ({i}, {j}) has dim {matrix.dim}, expected {domain}")
        masked = {}
        for party in parties:
            code = party.record[i] * sizes[j] + party.record[j]
            masked[party.index] = randomize(code, matrix, party.rng)
        counts = np.empty(domain, dtype=np.int64)
        for v in range(domain):
            counts[v] = secure_sum_count(
                parties, lambda pt, v=v: masked[pt.index] == v, log
            )
        if counts.sum() != n:
            raise ProtocolError(f"pair ({i}, {j}) tallies sum to {counts.sum()}, expected {n}")
        estimate = estimate_pi(empirical_lambda_from_counts(counts), matrix)
        freq = project_to_simplex(estimate).values.reshape(sizes[i], sizes[j])
        scores[i, j] = scores[j, i] = score_from_joint(freq, kinds[i], kinds[j]).value
        pair_budget[(i, j)] = epsilon_of(matrix).epsilon
    sequential = [sum(eps for pair, eps in pair_budget.items() if a in pair) for a in range(m)]
    single_worst = [max(eps for pair, eps in pair_budget.items() if a in pair) for a in range(m)]
    return DependenceEstimationReport(
        method=RR_PER_PAIR,
        matrix=scores,
        privacy={
            "model": "masked pair tallies; both budget accountings reported",
            "sequential_epsilon_per_attribute": sequential,
            "anonymous_release_epsilon_per_attribute": single_worst,
        },
        messages=dict(log.counts),
    )


def empirical_lambda_from_counts(counts):
    """Answer distribution from secure-sum tallies (already aggregated)."""
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total < 1:
        raise ProtocolError("no observations tallied")
    return DistributionEstimate(counts / total, stage=RAW_LAMBDA)
