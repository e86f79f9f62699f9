from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adl.dilation.expansive import (
    ProbeVerdict,
    Verdict,
    classify_equivalence,
    cocycle_probe,
    epsilon,
    floor_scale,
    inverse_power_decay,
    is_expansive,
    operator_norm,
    rigidity_oracle,
    snap_floor,
    validate_dilation,
)
from adl.errors import NotExpansiveError, NotInvertibleError, PreconditionViolation

from conftest import rotation


# ==========================================================
# validate_dilation
# ==========================================================
def test_diagonal_matrix_is_validated(diag_2_3):
    assert diag_2_3.dim == 2
    assert diag_2_3.eigmods == pytest.approx((2.0, 3.0))
    assert diag_2_3.detmag == pytest.approx(6.0)
    assert 1.0 < diag_2_3.lambda_minus < 2.0
    assert diag_2_3.lambda_plus > 3.0


def test_unit_eigenvalue_is_not_expansive():
    with pytest.raises(NotExpansiveError) as info:
        validate_dilation([[1.0, 1.0], [0.0, 2.0]])
    assert info.value.modulus == pytest.approx(1.0)


def test_singular_matrix_is_rejected():
    with pytest.raises(NotInvertibleError):
        validate_dilation([[2.0, 4.0], [1.0, 2.0]])


def test_non_square_matrix_is_rejected():
    with pytest.raises(ValueError):
        validate_dilation([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0]])


def test_scaled_rotation(two_R1):
    assert two_R1.eigmods == pytest.approx((2.0, 2.0))
    assert two_R1.detmag == pytest.approx(4.0)


def test_is_expansive():
    assert is_expansive(np.diag([2.0, 3.0]))
    assert not is_expansive(np.diag([0.5, 3.0]))
    assert not is_expansive(np.zeros((2, 2)))


def test_power_and_inverse_agree(diag_2_3):
    assert np.allclose(diag_2_3.power(3) @ diag_2_3.power(-3), np.eye(2))
    assert np.allclose(diag_2_3.power(-2), np.diag([1 / 4, 1 / 9]))


def test_operator_norm_of_diagonal():
    assert operator_norm(np.diag([3.0, -5.0])) == pytest.approx(5.0, rel=1e-6)
    assert operator_norm(np.zeros((2, 2))) == 0.0


# ==========================================================
# ε と ⌊εj⌋
# ==========================================================
def test_epsilon_examples(eight_I, four_I, diag_2_4, diag_4_2, two_I):
    assert epsilon(eight_I, four_I) == pytest.approx(1.5)
    assert epsilon(two_I, two_I) == pytest.approx(1.0)
    assert epsilon(diag_2_4, diag_4_2) == pytest.approx(1.0)


def test_floor_scale_snaps_integers():
    assert floor_scale(1.5, 2) == 3
    assert floor_scale(1.5, -1) == -2
    assert floor_scale(1.5, 3) == 4
    assert snap_floor(2.9999999999999996) == 3
    assert snap_floor(-0.5) == -1


# ==========================================================
# classify_equivalence
# ==========================================================
def test_swapped_diagonals_are_not_equivalent(diag_2_4, diag_4_2):
    rep = classify_equivalence(diag_2_4, diag_4_2, J=20)
    assert rep.verdict is Verdict.NOT_EQUIVALENT
    for j, n in rep.norms:
        assert n == pytest.approx(2.0 ** abs(j), rel=1e-6)


def test_scaled_rotation_is_equivalent_to_scalar(two_I, two_R1):
    rep = classify_equivalence(two_I, two_R1, J=40)
    assert rep.verdict is Verdict.EQUIVALENT
    assert rep.epsilon == pytest.approx(1.0)
    assert all(n == pytest.approx(1.0, rel=1e-6) for _, n in rep.norms)
    assert len(rep.norms) == 81


def test_scalar_pair_with_different_determinants(eight_I, four_I):
    rep = classify_equivalence(eight_I, four_I, J=30)
    assert rep.verdict is Verdict.EQUIVALENT
    for j, n in rep.norms:
        expected = 2.0 ** (-3 * j + 2 * math.floor(1.5 * j))
        assert n == pytest.approx(expected, rel=1e-6)
        assert min(abs(n - 0.5), abs(n - 1.0)) < 1e-6


def test_classify_is_symmetric(diag_2_4, diag_4_2, two_I, two_R1):
    assert classify_equivalence(diag_4_2, diag_2_4, J=20).verdict is Verdict.NOT_EQUIVALENT
    assert classify_equivalence(two_R1, two_I, J=20).verdict is Verdict.EQUIVALENT


def test_classify_rejects_short_window(two_I):
    with pytest.raises(PreconditionViolation):
        classify_equivalence(two_I, two_I, J=4)


def test_classify_report_does_not_depend_on_workers(diag_2_4, diag_4_2):
    one = classify_equivalence(diag_2_4, diag_4_2, J=16, workers=1)
    many = classify_equivalence(diag_2_4, diag_4_2, J=16, workers=4)
    assert one.norms == many.norms
    assert one.growth_slope == many.growth_slope


# ==========================================================
# cocycle_probe
# ==========================================================
def test_cocycle_of_identical_matrices(diag_2_3):
    probe = cocycle_probe(diag_2_3, diag_2_3, J=16)
    assert probe.verdict is ProbeVerdict.FINITE
    assert all(n == 1 for _, n in probe.counts)


def test_cocycle_of_irrational_rotation_is_infinite(two_I, two_R1):
    probe = cocycle_probe(two_I, two_R1, J=32)
    assert probe.verdict is ProbeVerdict.INFINITE
    assert probe.count(32) == 2 * 32 + 1


def test_cocycle_of_quarter_turn_is_finite(two_I, two_Rhalfpi):
    probe = cocycle_probe(two_I, two_Rhalfpi, J=32)
    assert probe.verdict is ProbeVerdict.FINITE
    assert probe.count(32) == 4
    assert dict(probe.counts_reverse)[32] == 4


def test_cocycle_rejects_bad_arguments(two_I):
    with pytest.raises(PreconditionViolation):
        cocycle_probe(two_I, two_I, J=2)
    with pytest.raises(PreconditionViolation):
        cocycle_probe(two_I, two_I, J=16, tau=0.0)


# ==========================================================
# rigidity_oracle / inverse_power_decay
# ==========================================================
def test_rigidity_oracle(diag_2_3, diag_2_4, diag_4_2, two_I, two_R1):
    assert rigidity_oracle(diag_2_3, diag_2_3) is Verdict.EQUIVALENT
    assert rigidity_oracle(diag_2_4, diag_4_2) is Verdict.NOT_EQUIVALENT
    assert rigidity_oracle(two_R1, two_I) is Verdict.NOT_APPLICABLE
    assert rigidity_oracle(diag_2_3, diag_2_4) is Verdict.NOT_APPLICABLE


def test_inverse_power_decay_of_scalar(two_I):
    prof = inverse_power_decay(two_I, J=10)
    assert prof.onset == 0
    for j, n in prof.norms:
        assert n == pytest.approx(2.0 ** -j, rel=1e-6)


def test_inverse_power_decay_of_shear():
    a = validate_dilation([[2.0, 10.0], [0.0, 2.0]])
    prof = inverse_power_decay(a, J=24)
    assert prof.onset is not None
    tail = [n for j, n in prof.norms if j >= prof.onset]
    assert all(x > y for x, y in zip(tail, tail[1:]))


@settings(max_examples=25, deadline=None)
@given(
    theta=st.floats(min_value=0.0, max_value=2 * math.pi),
    scale=st.floats(min_value=1.2, max_value=5.0),
)
def test_scaled_rotations_are_equivalent_to_scalars(theta, scale):
    a = validate_dilation(scale * np.eye(2))
    b = validate_dilation(scale * rotation(theta))
    rep = classify_equivalence(a, b, J=12)
    assert rep.verdict is Verdict.EQUIVALENT
