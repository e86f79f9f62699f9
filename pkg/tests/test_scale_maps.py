from __future__ import annotations

import numpy as np
import pytest

from adl.dilation.quasinorm import StepQuasiNorm
from adl.dilation.tiling import Box
from adl.errors import PreconditionViolation, SupportEscapesWindowError
from adl.operators.majorant import MajorantParams, sample_points
from adl.operators.scale_maps import (
    Mode,
    build_scale_maps,
    lift_S,
    permute,
    pointwise_bracket,
    project_T,
    target_scale,
    unpermute,
)
from adl.sequence.sequences import SparseSequence, random_sequence
from adl.utils.rng import STREAM_SAMPLE_POINTS, derive_generator

SMALL = Box.from_bounds([-1.0, -1.0], [1.0, 1.0])
TINY = Box.from_bounds([0.0, 0.0], [0.001, 0.001])


@pytest.fixture(scope="module")
def rotation_maps(two_I, two_R1):
    return build_scale_maps(two_I, two_R1, Mode.PERMUTATION, (-2, 2), SMALL)


@pytest.fixture(scope="module")
def retract_maps(eight_I, four_I):
    return build_scale_maps(eight_I, four_I, Mode.RETRACT, (-4, 4), TINY)


# ==========================================================
# 構築
# ==========================================================
def test_identical_dilations_give_identity_maps(diag_2_3):
    maps = build_scale_maps(diag_2_3, diag_2_3, "permute", (-2, 2), SMALL)
    assert maps.scales == [-2, -1, 0, 1, 2]
    for sm in maps.maps.values():
        assert sm.i == sm.j
        assert all(k == n for k, n in sm.forward.items())


def test_permutation_maps_for_scaled_rotation(rotation_maps):
    assert rotation_maps.epsilon == pytest.approx(1.0)
    for cert in rotation_maps.certificates():
        assert cert["i"] == cert["j"]
        assert cert["max_displacement"] <= np.sqrt(2.0) * 2.0 + 1e-9
        assert cert["n_cells"] > 0


def test_retract_scales(retract_maps):
    assert retract_maps.epsilon == pytest.approx(1.5)
    assert [retract_maps.scale_of(j) for j in range(-4, 5)] == [-6, -5, -3, -2, 0, 1, 3, 4, 6]
    assert target_scale(Mode.RETRACT, 1.5, 2) == 3
    assert target_scale(Mode.PERMUTATION, 1.5, 2) == 2


def test_permute_needs_equal_determinants(eight_I, four_I):
    with pytest.raises(PreconditionViolation):
        build_scale_maps(eight_I, four_I, Mode.PERMUTATION, (0, 1), SMALL)


def test_retract_needs_a_larger_determinant(eight_I, four_I):
    with pytest.raises(PreconditionViolation):
        build_scale_maps(four_I, eight_I, Mode.RETRACT, (0, 1), SMALL)


def test_maps_need_equivalent_dilations(diag_2_4, diag_4_2):
    with pytest.raises(PreconditionViolation):
        build_scale_maps(diag_2_4, diag_4_2, Mode.PERMUTATION, (0, 1), SMALL)


# ==========================================================
# 作用
# ==========================================================
def test_permute_relabels_values(two_I, rotation_maps):
    c = random_sequence(two_I, SMALL, (-2, 2), 0.5, seed=4)
    s = permute(c, rotation_maps)
    assert len(s) == len(c)
    assert s.values_by_scale() == c.values_by_scale()
    assert unpermute(s, rotation_maps) == c


def test_permute_single_entry(rotation_maps):
    k = rotation_maps.maps[0].cells[0]
    s = permute(SparseSequence.single(0, k, 2.5), rotation_maps)
    assert s.entries == {(0, rotation_maps.maps[0].forward[k]): 2.5}


def test_permute_rejects_entries_outside_the_window(rotation_maps):
    with pytest.raises(SupportEscapesWindowError) as info:
        permute(SparseSequence.single(0, (100, 100), 1.0), rotation_maps)
    assert info.value.entry == {"j": 0, "k": [100, 100]}


def test_operators_check_the_mode(rotation_maps, retract_maps):
    with pytest.raises(PreconditionViolation):
        lift_S(SparseSequence(), rotation_maps)
    with pytest.raises(PreconditionViolation):
        permute(SparseSequence(), retract_maps)


def test_lift_moves_scale_two_to_three(retract_maps):
    k = retract_maps.maps[2].cells[0]
    s = lift_S(SparseSequence.single(2, k, 1.0), retract_maps)
    ((i, n), v), = s.entries.items()
    assert i == 3 and v == 1.0
    assert n == retract_maps.maps[2].forward[k]


def test_projection_inverts_the_lift(eight_I, retract_maps):
    assert lift_S(SparseSequence(), retract_maps).is_empty
    assert project_T(SparseSequence(), retract_maps).is_empty
    c = random_sequence(eight_I, TINY, (-4, 4), 0.6, seed=2)
    assert project_T(lift_S(c, retract_maps), retract_maps) == c


def test_projection_drops_unmatched_scales(retract_maps):
    n = next(iter(retract_maps.maps[1].forward.values()))
    s = SparseSequence.from_items([((2, (0, 0)), 5.0), ((1, n), 1.0)])
    out = project_T(s, retract_maps)
    assert out.entries == {(1, retract_maps.maps[1].inverse[n]): 1.0}


def test_strict_projection_rejects_entries_outside_the_image(retract_maps):
    s = SparseSequence.single(3, (10**6, 10**6), 1.0)
    assert project_T(s, retract_maps).is_empty
    with pytest.raises(SupportEscapesWindowError):
        project_T(s, retract_maps, strict=True)


# ==========================================================
# 各点での比較
# ==========================================================
def test_pointwise_bracket(two_I, rotation_maps):
    qa = StepQuasiNorm.build(two_I)
    qb = StepQuasiNorm.build(rotation_maps.b)
    c = random_sequence(two_I, SMALL, (0, 0), 0.8, seed=6)
    pts = sample_points(SMALL, 200, derive_generator(6, STREAM_SAMPLE_POINTS, 0))
    rep = pointwise_bracket(qa, qb, c, rotation_maps, 0, MajorantParams(r=0.5, lam=2.0, a=0.5), pts)
    assert rep.i == 0
    assert rep.n_points == 200
    assert 1.0 <= rep.K < float("inf")
    assert rep.K_half <= rep.K
    assert rep.min_ratio <= rep.max_ratio


@pytest.mark.parametrize("j", [-1, 0, 1])
def test_pointwise_bracket_for_the_retract(eight_I, retract_maps, j):
    qa = StepQuasiNorm.build(eight_I)
    qb = StepQuasiNorm.build(retract_maps.b)
    c = random_sequence(eight_I, TINY, (j, j), 1.0, seed=8)
    box = Box.from_bounds([-2.0, -2.0], [2.0, 2.0])
    pts = sample_points(box, 200, derive_generator(8, STREAM_SAMPLE_POINTS, j + 1))
    rep = pointwise_bracket(qa, qb, c, retract_maps, j, MajorantParams(r=0.5, lam=2.0, a=0.5), pts)
    assert rep.i == retract_maps.scale_of(j)
    assert rep.n_points == 200
    assert rep.n_zero == 0
    assert 1.0 <= rep.K < float("inf")
    assert rep.K_half <= rep.K
