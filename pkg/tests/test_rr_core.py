"""Response matrices, privacy accounting, sampling, and the unbiased estimator."""
import math

import numpy as np
import pytest

from rrkit.rr_core import (
    DistributionEstimate,
    EstimationError,
    RandomizationMatrix,
    cluster_matrix,
    derive_rng,
    empirical_lambda,
    epsilon_of,
    estimate_pi,
    keep_or_uniform_matrix,
    project_to_simplex,
    randomize,
    randomize_column,
)


# --- matrix construction -----------------------------------------------------

def test_keep_or_uniform_known_entries():
    m = keep_or_uniform_matrix(2, 0.5)
    assert np.allclose(m.entries, [[0.75, 0.25], [0.25, 0.75]])
    m3 = keep_or_uniform_matrix(3, 0.4)
    # diag = p + (1-p)/r = 0.4 + 0.2, off = 0.2
    assert m3.structure == pytest.approx((0.6, 0.2))
    assert np.allclose(m3.entries.sum(axis=1), 1.0)


def test_keep_or_uniform_rejects_bad_p():
    for bad in (0.0, -0.1, 1.0001):
        with pytest.raises(ValueError):
            keep_or_uniform_matrix(4, bad)
    # p = 1 is legal: no noise at all
    assert keep_or_uniform_matrix(4, 1.0).structure == (1.0, 0.0)


def test_cluster_matrix_known_entries():
    m2 = cluster_matrix(2, math.log(3))
    assert np.allclose(m2.entries, [[0.75, 0.25], [0.25, 0.75]])
    m6 = cluster_matrix(6, math.log(5))
    diag, off = m6.structure
    assert diag == pytest.approx(0.5)
    assert off == pytest.approx(0.1)


def test_cluster_matrix_infinite_budget_is_identity():
    m = cluster_matrix(5, math.inf)
    assert m.structure == (1.0, 0.0)
    assert epsilon_of(m).unbounded


def test_keep_or_uniform_equals_calibrated_matrix():
    # the keep-or-uniform matrix for (r, p) is exactly the calibrated matrix
    # at its own realized budget ln(1 + p*r/(1-p))
    for r, p in [(2, 0.7), (3, 0.5), (16, 0.1), (9, 0.9)]:
        kou = keep_or_uniform_matrix(r, p)
        eps = math.log(1.0 + p * r / (1.0 - p))
        cal = cluster_matrix(r, eps)
        assert np.allclose(kou.entries, cal.entries, atol=1e-14)


def test_matrix_validation():
    with pytest.raises(ValueError):
        RandomizationMatrix([[0.5, 0.4], [0.5, 0.5]])  # rows must sum to 1
    with pytest.raises(ValueError):
        RandomizationMatrix([[1.2, -0.2], [0.0, 1.0]])  # entries in [0, 1]
    with pytest.raises(ValueError):
        RandomizationMatrix([[1.0]])  # at least 2 categories
    with pytest.raises(ValueError):
        RandomizationMatrix.structured(3, 0.5, 0.5)  # row sum 1.5


def test_structure_detection_on_dense_input():
    m = RandomizationMatrix([[0.75, 0.25], [0.25, 0.75]])
    assert m.structure == (0.75, 0.25)
    dense = RandomizationMatrix([[0.6, 0.3, 0.1], [0.1, 0.8, 0.1], [0.2, 0.2, 0.6]])
    assert dense.structure is None


def test_large_structured_matrix_never_materializes():
    # 2**20 categories so the uniform distribution is exactly representable
    big = cluster_matrix(2**20, 10.0)
    with pytest.raises(RuntimeError):
        _ = big.entries
    # estimation still works through the O(r) path; uniform maps to uniform
    lam = np.full(2**20, 2.0**-20)
    pi = estimate_pi(lam, big)
    assert np.allclose(pi.values, lam, atol=1e-12)


# --- privacy accounting ------------------------------------------------------

def test_epsilon_known_values():
    assert epsilon_of(keep_or_uniform_matrix(2, 0.5)).epsilon == pytest.approx(math.log(3))
    # uniform matrix leaks nothing
    uniform = RandomizationMatrix(np.full((4, 4), 0.25))
    assert epsilon_of(uniform).epsilon == 0.0
    # any zero entry is perfectly revealing
    identity = RandomizationMatrix(np.eye(3))
    assert epsilon_of(identity).unbounded
    dense = RandomizationMatrix([[0.6, 0.4], [0.2, 0.8]])
    assert epsilon_of(dense).epsilon == pytest.approx(math.log(3))  # max(0.6/0.2, 0.8/0.4)


def test_epsilon_of_calibrated_matrix_is_exact():
    for size in (2, 6, 30):
        for eps in (0.1, 1.0, 3.0):
            assert epsilon_of(cluster_matrix(size, eps)).epsilon == pytest.approx(eps, abs=1e-12)


def test_keep_or_uniform_epsilon_closed_form():
    for r, p in [(2, 0.7), (3, 0.5), (9, 0.1)]:
        got = epsilon_of(keep_or_uniform_matrix(r, p)).epsilon
        assert got == pytest.approx(math.log(1.0 + p * r / (1.0 - p)), abs=1e-12)


# --- estimation --------------------------------------------------------------

def test_estimate_pi_known_answer():
    m = keep_or_uniform_matrix(2, 0.5)
    pi = estimate_pi(np.array([0.6, 0.4]), m)
    assert pi.values == pytest.approx([0.7, 0.3])
    assert pi.stage == "estimated-pi"


def test_estimate_pi_can_overshoot_the_simplex():
    m = keep_or_uniform_matrix(2, 0.5)
    pi = estimate_pi(np.array([1.0, 0.0]), m)
    assert pi.values == pytest.approx([1.5, -0.5])
    proj = project_to_simplex(pi)
    assert proj.values == pytest.approx([1.0, 0.0])


def test_estimate_pi_structured_agrees_with_dense_solve():
    # closed-form route vs a general linear solve on the same matrix
    rng = derive_rng(7)
    for size, p in [(3, 0.3), (7, 0.6), (12, 0.85)]:
        m = keep_or_uniform_matrix(size, p)
        lam = rng.dirichlet(np.ones(size))
        fast = estimate_pi(lam, m).values
        slow = np.linalg.solve(m.entries.T, lam)
        assert np.allclose(fast, slow, atol=1e-12)


def test_estimate_pi_recovers_exact_forward_map():
    rng = derive_rng(11)
    entries = rng.dirichlet(np.ones(5), size=5)  # random row-stochastic
    m = RandomizationMatrix(entries)
    pi_true = rng.dirichlet(np.ones(5))
    lam = m.apply_transpose(pi_true)
    pi = estimate_pi(lam, m)
    assert np.allclose(pi.values, pi_true, atol=1e-10)


def test_estimate_pi_refuses_singular_and_ill_conditioned():
    uniform = RandomizationMatrix(np.full((3, 3), 1 / 3))
    assert not uniform.nonsingular
    with pytest.raises(EstimationError):
        estimate_pi(np.array([0.4, 0.3, 0.3]), uniform)
    nearly = keep_or_uniform_matrix(2, 1e-13)  # condition ~ 1/p
    with pytest.raises(EstimationError):
        estimate_pi(np.array([0.5, 0.5]), nearly)


def test_estimate_pi_shape_check():
    m = keep_or_uniform_matrix(3, 0.5)
    with pytest.raises(ValueError):
        estimate_pi(np.array([0.5, 0.5]), m)


# --- randomization -----------------------------------------------------------

def test_randomize_identity_when_p_is_one():
    m = keep_or_uniform_matrix(4, 1.0)
    values = np.array([0, 3, 2, 1, 1])
    out = randomize_column(values, m, derive_rng(0))
    assert (out == values).all()


def test_scalar_and_column_randomization_agree():
    m = keep_or_uniform_matrix(5, 0.4)
    values = derive_rng(3).integers(0, 5, size=200)
    col = randomize_column(values, m, derive_rng(99))
    rng = derive_rng(99)
    scalars = [randomize(int(v), m, rng) for v in values]
    assert col.tolist() == scalars


def test_randomize_rejects_out_of_domain():
    m = keep_or_uniform_matrix(3, 0.5)
    with pytest.raises(ValueError):
        randomize(3, m, derive_rng(0))
    with pytest.raises(ValueError):
        randomize_column([0, 1, -1], m, derive_rng(0))


def test_structured_sampling_frequencies():
    m = keep_or_uniform_matrix(3, 0.4)
    out = randomize_column(np.zeros(200_000, dtype=np.int64), m, derive_rng(17))
    freq = np.bincount(out, minlength=3) / out.size
    assert freq == pytest.approx([0.6, 0.2, 0.2], abs=0.01)


def test_dense_sampling_frequencies():
    m = RandomizationMatrix([[0.5, 0.3, 0.2], [0.1, 0.8, 0.1], [0.2, 0.2, 0.6]])
    out = randomize_column(np.ones(200_000, dtype=np.int64), m, derive_rng(23))
    freq = np.bincount(out, minlength=3) / out.size
    assert freq == pytest.approx([0.1, 0.8, 0.1], abs=0.01)


# --- rng derivation ----------------------------------------------------------

def test_derive_rng_is_deterministic_and_path_keyed():
    a = derive_rng(42, 1, 5).random(4)
    b = derive_rng(42, 1, 5).random(4)
    c = derive_rng(42, 1, 6).random(4)
    assert (a == b).all()
    assert not (a == c).all()


def test_derive_rng_generator_passthrough():
    gen = np.random.default_rng(0)
    assert derive_rng(gen) is gen
    with pytest.raises(ValueError):
        derive_rng(gen, 1)


# --- distribution containers -------------------------------------------------

def test_distribution_stage_rules():
    DistributionEstimate(np.array([1.5, -0.5]), "estimated-pi")  # negatives legal here
    with pytest.raises(ValueError):
        DistributionEstimate(np.array([1.5, -0.5]), "raw-lambda")
    with pytest.raises(ValueError):
        DistributionEstimate(np.array([0.6, 0.6]), "raw-lambda")  # sums to 1.2
    with pytest.raises(ValueError):
        DistributionEstimate(np.array([0.5, 0.5]), "posterior")


def test_distribution_text_roundtrip_is_exact():
    dist = DistributionEstimate(np.array([1 / 3, 1 / 3, 1 / 3]), "projected-pi")
    back = DistributionEstimate.from_text(dist.to_text())
    assert back.stage == dist.stage
    assert (back.values == dist.values).all()  # repr round-trip, bit exact


def test_empirical_lambda():
    lam = empirical_lambda([0, 0, 2, 1, 0], size=4)
    assert lam.values == pytest.approx([0.6, 0.2, 0.2, 0.0])
    assert lam.stage == "raw-lambda"
    with pytest.raises(ValueError):
        empirical_lambda([], size=2)
    with pytest.raises(ValueError):
        empirical_lambda([0, 5], size=2)


def test_project_to_simplex_properties():
    proper = DistributionEstimate(np.array([0.25, 0.75]), "raw-lambda")
    out = project_to_simplex(proper)
    assert out.values == pytest.approx([0.25, 0.75])
    with pytest.raises(EstimationError):
        project_to_simplex(np.array([-0.5, -0.5, 1.0]) - 1.0)
