from __future__ import annotations

import math

import numpy as np
import pytest

from adl.dilation.quasinorm import rho_many
from adl.dilation.tiling import Box
from adl.operators.majorant import MajorantParams, sample_points
from adl.operators.maximal import (
    BallSampler,
    fefferman_stein_check,
    maximal,
    maximal_bound_check,
    maximal_many,
    radius_exponents,
)
from adl.sequence.sequences import SparseSequence
from adl.utils.rng import STREAM_SAMPLE_POINTS, derive_generator

UNIT = SparseSequence.single(0, (0, 0), 1.0)


def test_radius_exponents():
    assert radius_exponents(0) == list(range(-8, 9))
    assert radius_exponents(2)[0] == -4 and radius_exponents(2)[-1] == 12


def test_ball_offsets_lie_in_the_ball(qn_diag_2_3):
    sampler = BallSampler(qn_diag_2_3, samples=400, seed=3)
    for m in (-3, 0, 1, 4):
        off = sampler.offsets(m)
        r = math.exp(0.5 * m * math.log(6.0))
        assert off.shape[1] == 2
        assert np.all(rho_many(qn_diag_2_3, off) < r)
        assert sampler.offsets(m) is off


def test_ball_offsets_are_seeded(qn_two_I):
    one = BallSampler(qn_two_I, samples=256, seed=1).offsets(-2)
    two = BallSampler(qn_two_I, samples=256, seed=1).offsets(-2)
    assert np.array_equal(one, two)


def test_maximal_of_zero(qn_two_I):
    assert maximal(qn_two_I, SparseSequence(), 0, (0.5, 0.5)) == 0.0


def test_maximal_deep_inside_the_cube(qn_two_I):
    assert maximal(qn_two_I, UNIT, 0, (0.5, 0.5), samples=256) >= 0.9


def test_maximal_of_a_constant(qn_two_I):
    # 全ての標本球を覆う広い台の上の定数 1
    big = SparseSequence.from_items([((-3, (i, k)), 1.0) for i in range(-20, 20) for k in range(-20, 20)])
    out = maximal(qn_two_I, big, -3, (0.3, -0.2), samples=128)
    assert out == pytest.approx(1.0)


def test_maximal_many_is_bounded_by_the_sup(qn_diag_2_3):
    c = SparseSequence.from_items([((0, (0, 0)), 2.0), ((0, (1, 0)), 0.5)])
    sampler = BallSampler(qn_diag_2_3, samples=128, seed=0)
    xs = np.random.default_rng(1).uniform(-2.0, 3.0, size=(30, 2))
    vals = maximal_many(qn_diag_2_3, c, 0, xs, sampler)
    assert np.all(vals >= 0.0) and np.all(vals <= 2.0)
    assert np.all(maximal_many(qn_diag_2_3, c, 0, xs, sampler, power=0.5) <= math.sqrt(2.0))


def test_maximal_bound_check(qn_two_I):
    mp = MajorantParams(r=0.5, lam=2.0, a=0.5)
    pts = np.array([[0.5, 0.5], [0.2, 0.8], [1.5, 0.5], [3.0, -2.0]])
    rep = maximal_bound_check(qn_two_I, UNIT, 0, mp, pts, samples=256)
    assert rep.n_points == 4
    assert math.isfinite(rep.C_hat) and rep.C_hat > 0.0
    assert rep.n_unreached == 0
    assert len(rep.ratios) == 4


def test_maximal_bound_check_of_zero(qn_two_I):
    mp = MajorantParams(r=0.5, lam=2.0, a=0.5)
    rep = maximal_bound_check(qn_two_I, SparseSequence(), 0, mp, np.array([[0.5, 0.5]]), samples=64)
    assert rep.C_hat == 0.0
    assert rep.stable


def test_fefferman_stein_report(qn_two_I):
    window = Box.from_bounds([-2.0, -2.0], [2.0, 2.0])
    rep = fefferman_stein_check(qn_two_I, 2.0, 2.0, 4, seed=5, window=window, n_funcs=2, n_points=256, samples=64)
    assert len(rep.ratios) == 4
    assert rep.max_ratio == max(rep.ratios)
    assert rep.max_ratio_half <= rep.max_ratio
    # M f >= |f| の点が多いので比は 1 を大きく割らない
    assert rep.max_ratio > 0.5
    again = fefferman_stein_check(qn_two_I, 2.0, 2.0, 4, seed=5, window=window, n_funcs=2, n_points=256, samples=64)
    assert again.ratios == rep.ratios


def test_maximal_bound_is_finite_and_stable(qn_two_I):
    c = SparseSequence.from_items([((0, (0, 0)), 1.0), ((0, (1, 0)), 0.4), ((0, (-1, 2)), 2.5)])
    mp = MajorantParams(r=0.5, lam=2.0, a=0.5)
    pts = sample_points(Box.from_bounds([-1.0, -1.0], [2.0, 3.0]), 40, derive_generator(2, STREAM_SAMPLE_POINTS, 0))
    rep = maximal_bound_check(qn_two_I, c, 0, mp, pts)
    assert math.isfinite(rep.C_hat) and rep.C_hat > 0.0
    assert rep.n_unreached == 0
    assert rep.stable
    again = maximal_bound_check(qn_two_I, c, 0, mp, pts)
    assert again.C_hat == rep.C_hat
    assert again.ratios == rep.ratios
