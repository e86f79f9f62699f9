from __future__ import annotations

import math

import numpy as np
import pytest

from adl.dilation.expansive import epsilon, floor_scale
from adl.errors import DisplacementBoundError, PreconditionViolation
from adl.matching import hall
from adl.matching.hall import hall_injection, lattice_injection_pi, neighbourhood, two_sided_saturation
from adl.matching.lattice import (
    LatticePair,
    candidate_targets,
    domain_diameter,
    domains_overlap,
    parse_window,
    window_cells,
)
from adl.utils.rng import STREAM_HALL_SUBSETS, derive_generator

from conftest import rotation

SQRT2 = math.sqrt(2.0)


def _sampled_overlap(pair: LatticePair, x, y, n: int, rng: np.random.Generator) -> bool:
    """x + F_S の一様サンプルのどれかが y + F_T に落ちるか（過小判定のみ）。"""
    u = rng.random((n, pair.dim))
    pts = np.asarray(x) + u @ pair.S.T
    v = (pts - np.asarray(y)) @ pair.T_inv.T
    return bool(np.any(np.all((v >= 0.0) & (v <= 1.0), axis=1)))


# ==========================================================
# 基本領域
# ==========================================================
def test_domains_overlap_examples():
    pair = LatticePair.build(np.eye(2), np.eye(2))
    assert domains_overlap(pair, (0.0, 0.0), (0.0, 0.0))
    assert not domains_overlap(pair, (0.0, 0.0), (3.0, 0.0))


def test_domains_overlap_against_sampling():
    pair = LatticePair.build(np.eye(2), rotation(math.pi / 4))
    rng = derive_generator(0, STREAM_HALL_SUBSETS, 99)
    for _ in range(100):
        x = rng.uniform(-2.0, 2.0, size=2)
        y = rng.uniform(-2.0, 2.0, size=2)
        exact = domains_overlap(pair, x, y)
        if _sampled_overlap(pair, x, y, 10_000, rng):
            assert exact


def test_domain_diameter():
    assert domain_diameter(np.eye(2)) == pytest.approx(SQRT2)
    assert domain_diameter(2.0 * np.eye(2)) == pytest.approx(2.0 * SQRT2)


def test_candidate_targets_contain_the_nearest_point():
    pair = LatticePair.build(2.0 * np.eye(2), np.eye(2))
    assert (2, -4) in candidate_targets(pair, (1, -2))


def test_window_parsing():
    assert parse_window("-1,1;0,2") == [(-1, 1), (0, 2)]
    assert len(window_cells(parse_window("-1,1;0,2"))) == 9


# ==========================================================
# hall_injection
# ==========================================================
def test_identity_lattices_match_identically():
    pair = LatticePair.build(np.eye(2), np.eye(2))
    res = hall_injection(pair, window_cells([(-3, 3), (-3, 3)]))
    assert res.saturated
    assert all(m == n for m, n in res.assignment.items())
    assert res.max_displacement == 0.0
    assert res.bound == pytest.approx(2.0 * SQRT2)


def test_coarse_to_fine_lattice():
    pair = LatticePair.build(2.0 * np.eye(2), np.eye(2))
    res = hall_injection(pair, window_cells([(-5, 5), (-5, 5)]))
    assert len(res.assignment) == 121
    assert res.bound == pytest.approx(3.0 * SQRT2)
    assert res.max_displacement <= res.bound
    assert len(set(res.assignment.values())) == 121


def test_rotated_lattice_matching():
    pair = LatticePair.build(np.eye(2), rotation(1.0))
    res = hall_injection(pair, window_cells([(-10, 10), (-10, 10)]))
    assert len(res.assignment) == 441
    assert len(set(res.assignment.values())) == 441
    assert res.max_displacement <= 2.0 * SQRT2 + 1e-9
    for m, n in res.assignment.items():
        assert domains_overlap(pair, pair.source_point(m), pair.target_point(n))


def test_matching_needs_the_coarser_source():
    pair = LatticePair.build(np.eye(2), 2.0 * np.eye(2))
    with pytest.raises(PreconditionViolation):
        hall_injection(pair, window_cells([(0, 1), (0, 1)]))


def test_hall_volume_inequality_on_random_subsets():
    pair = LatticePair.build(np.diag([2.0, 1.5]), rotation(0.3))
    cells = window_cells([(-6, 6), (-6, 6)])
    rng = derive_generator(3, STREAM_HALL_SUBSETS, 0)
    for _ in range(40):
        size = int(rng.integers(1, 30))
        idx = rng.choice(len(cells), size=size, replace=False)
        subset = [cells[i] for i in idx]
        assert size * pair.det_s <= len(neighbourhood(pair, subset)) * pair.det_t + 1e-9


def test_matching_is_deterministic():
    pair = LatticePair.build(np.diag([2.0, 1.0]), rotation(0.7))
    cells = window_cells([(-4, 4), (-4, 4)])
    assert hall_injection(pair, cells, workers=1).assignment == hall_injection(pair, cells, workers=3).assignment


def test_two_sided_saturation():
    pair = LatticePair.build(np.eye(2), rotation(1.0))
    forward, backward = two_sided_saturation(pair, window_cells([(-4, 4), (-4, 4)]))
    assert forward.saturated and backward.saturated
    assert len(forward.assignment) == len(backward.assignment) == 81
    with pytest.raises(PreconditionViolation):
        two_sided_saturation(LatticePair.build(2.0 * np.eye(2), np.eye(2)), [(0, 0)])


# ==========================================================
# lattice_injection_pi
# ==========================================================
def test_pi_for_identical_dilations(diag_2_3):
    res = lattice_injection_pi(diag_2_3, diag_2_3, 2, 2, window_cells([(-3, 3), (-3, 3)]))
    assert all(k == n for k, n in res.assignment.items())
    assert res.max_displacement == pytest.approx(0.0, abs=1e-9)


def test_pi_for_scaled_rotation(two_I, two_R1):
    res = lattice_injection_pi(two_I, two_R1, 3, 3, window_cells([(-8, 8), (-8, 8)]))
    assert res.saturated and res.normalized
    assert len(res.assignment) == 17 * 17
    assert res.bound == pytest.approx(SQRT2 * 2.0, rel=1e-6)
    assert res.max_displacement <= res.bound + 1e-9


def test_pi_for_scalar_pair(eight_I, four_I):
    res = lattice_injection_pi(eight_I, four_I, 1, 1, window_cells([(-3, 3), (-3, 3)]))
    assert np.allclose(res.T, 0.5 * np.eye(2))
    assert res.bound == pytest.approx(SQRT2 * 1.5)
    assert res.max_displacement <= res.bound
    for k, n in res.assignment.items():
        assert n == (2 * k[0], 2 * k[1])


def test_pi_needs_matching_determinants(eight_I, four_I):
    with pytest.raises(PreconditionViolation):
        lattice_injection_pi(four_I, eight_I, 1, 1, [(0, 0)])


WINDOW_41 = window_cells([(-20, 20), (-20, 20)])


@pytest.mark.parametrize("j", range(-4, 5))
@pytest.mark.parametrize("names", [("two_I", "two_R1"), ("eight_I", "four_I")])
def test_pi_over_all_scales(request, names, j):
    a, b = (request.getfixturevalue(n) for n in names)
    i = floor_scale(epsilon(a, b), j)
    res = lattice_injection_pi(a, b, j, i, WINDOW_41)
    targets = list(res.assignment.values())
    assert len(targets) == 41 * 41
    assert len(set(targets)) == len(targets)
    assert res.max_displacement <= res.bound + 1e-9
    t = np.asarray(res.T)
    for k, n in res.assignment.items():
        assert np.linalg.norm(np.asarray(k) - t @ np.asarray(n)) <= res.bound + 1e-9


# ==========================================================
# 変位の上界
# ==========================================================
def test_hall_injection_rejects_a_displacement_above_the_bound(monkeypatch):
    monkeypatch.setattr(hall, "hall_bound", lambda pair: 0.1)
    pair = LatticePair.build(np.eye(2), rotation(1.0))
    with pytest.raises(DisplacementBoundError) as info:
        hall_injection(pair, window_cells([(-2, 2), (-2, 2)]))
    err = info.value
    assert err.bound == 0.1
    assert err.displacement > err.bound
    assert err.displacement == pytest.approx(
        np.linalg.norm(pair.source_point(err.source) - pair.target_point(err.target))
    )


def test_pi_rejects_a_displacement_above_the_bound(monkeypatch, two_I, two_R1):
    monkeypatch.setattr(hall, "normalized_bound", lambda t: 1e-3)
    with pytest.raises(DisplacementBoundError) as info:
        lattice_injection_pi(two_I, two_R1, 3, 3, window_cells([(-2, 2), (-2, 2)]))
    assert info.value.displacement > 1e-3


def test_check_displacement_passes_within_the_bound():
    pair = LatticePair.build(np.eye(2), np.eye(2))
    hall.check_displacement("same", pair, {(0, 0): (1, 0)}, 1.0)
    with pytest.raises(DisplacementBoundError):
        hall.check_displacement("same", pair, {(0, 0): (2, 0)}, 1.0)
