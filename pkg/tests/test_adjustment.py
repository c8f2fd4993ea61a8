"""Iterative proportional reweighting toward target marginals."""
import inspect

import numpy as np
import pytest

from rrkit.adjustment import (
    AdjustmentError,
    WeightedDataset,
    adjust_weights,
    as_attribute_tuple,
    encode_codes,
    rr_adjust,
)
from rrkit.rr_core import derive_rng

HALF = np.array([0.5, 0.5])


def corner_records():
    """4x(0,0), 2x(1,0), 4x(1,1): the hand-traced 10-record input."""
    return np.array([(0, 0)] * 4 + [(1, 0)] * 2 + [(1, 1)] * 4, dtype=np.int64)


# --- plumbing ----------------------------------------------------------------

def test_as_attribute_tuple():
    assert as_attribute_tuple(3) == (3,)
    assert as_attribute_tuple([2, 0]) == (2, 0)
    assert as_attribute_tuple(np.int64(1)) == (1,)


def test_encode_codes_row_major():
    records = np.array([[1, 2], [0, 0]], dtype=np.int64)
    codes, size = encode_codes(records, (0, 1), (2, 3))
    assert size == 6
    assert codes.tolist() == [5, 0]
    # single-attribute group uses the bare column
    codes, size = encode_codes(records, (1,), (2, 3))
    assert size == 3
    assert codes.tolist() == [2, 0]


def test_weighted_dataset_validation():
    records = corner_records()
    with pytest.raises(AdjustmentError):
        WeightedDataset(records, np.full(9, 0.1))  # wrong length
    with pytest.raises(AdjustmentError):
        WeightedDataset(records, np.full(10, -0.1))
    with pytest.raises(AdjustmentError):
        WeightedDataset(records, np.zeros(10))


def test_weighted_marginal_and_sampling():
    wd = WeightedDataset(corner_records(), np.full(10, 0.1))
    assert wd.marginal(0, (2, 2)) == pytest.approx([0.4, 0.6])
    assert wd.marginal((0, 1), (2, 2)) == pytest.approx([0.4, 0.0, 0.2, 0.4])
    draws = wd.sample_synthetic(4000, derive_rng(0))
    assert draws.shape == (4000, 2)
    # sampling follows the weights: combination (0,1) has weight zero
    assert not ((draws[:, 0] == 0) & (draws[:, 1] == 1)).any()


# --- single reweighting pass ---------------------------------------------------

def test_first_pass_weights_hand_traced():
    # uniform start, fit attribute 0 to (1/2, 1/2): the four records with
    # value 0 get 0.1 * (0.5/0.4) = 1/8, the six with value 1 get 1/12
    wd = WeightedDataset(corner_records(), np.full(10, 0.1))
    out, diverted = adjust_weights(wd, 0, HALF, (2, 2))
    assert diverted == 0.0
    assert (out.weights[:4] == 0.125).all()
    # 1/12 is hit to within one rounding step of 64-bit arithmetic
    assert out.weights[4:] == pytest.approx(1 / 12, abs=1e-16)
    assert out.marginal(0, (2, 2)) == pytest.approx(HALF, abs=1e-15)
    # the pass drags the other marginal away from uniform: (2/3, 1/3)
    assert out.marginal(1, (2, 2)) == pytest.approx([2 / 3, 1 / 3])


def test_pass_is_identity_at_the_fixed_point():
    records = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.int64)
    wd = WeightedDataset(records, np.full(4, 0.25))
    out, _ = adjust_weights(wd, 0, HALF, (2, 2))
    assert out.weights == pytest.approx(wd.weights, abs=1e-15)


def test_pass_diverts_unsupported_mass():
    records = np.array([[0], [0], [0], [1]], dtype=np.int64)  # category 2 absent
    wd = WeightedDataset(records, np.full(4, 0.25))
    target = np.array([0.5, 0.3, 0.2])
    out, diverted = adjust_weights(wd, 0, target, (3,))
    assert diverted == pytest.approx(0.2)
    assert out.total_diverted == pytest.approx(0.2)
    # remaining mass is renormalized over the supported categories
    assert out.marginal(0, (3,)) == pytest.approx([0.5 / 0.8, 0.3 / 0.8, 0.0])


def test_pass_rejects_fully_unsupported_target():
    records = np.array([[0], [0]], dtype=np.int64)
    wd = WeightedDataset(records, np.full(2, 0.5))
    with pytest.raises(AdjustmentError):
        adjust_weights(wd, 0, np.array([0.0, 1.0]), (2,))


def test_target_validation():
    wd = WeightedDataset(corner_records(), np.full(10, 0.1))
    with pytest.raises(AdjustmentError):
        adjust_weights(wd, 0, np.array([0.7, 0.7]), (2, 2))  # sums to 1.4
    with pytest.raises(AdjustmentError):
        adjust_weights(wd, 0, np.array([1.2, -0.2]), (2, 2))
    with pytest.raises(AdjustmentError):
        adjust_weights(wd, 0, np.array([0.5, 0.25, 0.25]), (2, 2))  # wrong size


# --- full fitting loop ---------------------------------------------------------

def test_fit_converges_to_corner_joint():
    # the hand-traced input converges onto the diagonal joint (1/2, 0, 0, 1/2);
    # convergence is harmonically slow because a zero cell is approached
    fitted = rr_adjust(
        corner_records(), [(0, HALF), (1, HALF)], (2, 2),
        max_weight_delta=1e-12, max_iterations=400_000,
    )
    assert fitted.converged
    joint = fitted.marginal((0, 1), (2, 2))
    assert joint == pytest.approx([0.5, 0.0, 0.0, 0.5], abs=2e-6)
    assert fitted.residual < 2e-6


def test_middle_weight_follows_harmonic_law():
    # the weight of the records being squeezed out decays like 1/(10 + 8k)
    fitted = rr_adjust(
        corner_records(), [(0, HALF), (1, HALF)], (2, 2),
        max_weight_delta=0.0, max_iterations=2000,
    )
    assert fitted.iterations == 2000
    assert not fitted.converged
    assert fitted.weights[4] * (10 + 8 * 2000) == pytest.approx(1.0, abs=3e-4)


def test_fit_product_form_converges_immediately(product_form):
    targets = [(0, np.full(2, 0.5)), (1, np.full(3, 1 / 3))]
    fitted = rr_adjust(product_form.records, targets, product_form.sizes)
    assert fitted.converged
    assert fitted.iterations == 1  # uniform start already matches
    assert fitted.residual < 1e-12
    assert fitted.weights == pytest.approx(np.full(product_form.n, 1 / product_form.n))


def test_fit_supports_grouped_targets():
    # one group covering both attributes at once: plain single-group fitting
    records = corner_records()
    target = np.array([0.4, 0.1, 0.1, 0.4])
    fitted = rr_adjust(records, [((0, 1), target)], (2, 2))
    # combination (0,1) is unsupported; its mass is diverted proportionally
    assert fitted.diverted[(0, 1)] == pytest.approx(0.1)
    assert fitted.marginal((0, 1), (2, 2)) == pytest.approx([0.4 / 0.9, 0.0, 0.1 / 0.9, 0.4 / 0.9])


def test_fit_validates_cover():
    records = corner_records()
    with pytest.raises(AdjustmentError):
        rr_adjust(records, [(0, HALF)], (2, 2))  # attribute 1 uncovered
    with pytest.raises(AdjustmentError):
        rr_adjust(records, [(0, HALF), (0, HALF)], (2, 2))  # duplicate
    with pytest.raises(AdjustmentError):
        rr_adjust(records, [((0, 1), np.full(4, 0.25)), (1, HALF)], (2, 2))


def test_fit_never_sees_plaintext_data():
    # the fitting interface takes only randomized records and target
    # distributions; there is no argument that could carry the true records
    params = set(inspect.signature(rr_adjust).parameters)
    assert params == {"records", "targets", "sizes", "max_weight_delta", "max_iterations"}


def test_fit_accepts_dataset_like_records(toy_pair):
    targets = [(0, HALF), (1, HALF)]
    fitted = rr_adjust(toy_pair, targets, toy_pair.sizes, max_iterations=5)
    assert fitted.n == toy_pair.n
