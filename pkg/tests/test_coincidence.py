from __future__ import annotations

import math

import pytest

from adl.sequence.coincidence import Coincidence, sequence_space_coincidence
from adl.sequence.sequences import TLParams


def test_equal_determinants_coincide_when_p_equals_q(two_I, two_R1):
    rep = sequence_space_coincidence(two_I, two_R1, TLParams(alpha=0.3, p=2.0, q=2.0))
    assert rep.verdict is Coincidence.EQUAL
    assert rep.reason == "p=q determinant rule"
    assert rep.det_factor_a == pytest.approx(rep.det_factor_b)


def test_different_determinants_differ_when_p_equals_q(eight_I, four_I):
    rep = sequence_space_coincidence(eight_I, four_I, TLParams(alpha=0.0, p=1.0, q=1.0))
    assert rep.verdict is Coincidence.NOT_EQUAL
    assert rep.exponent == pytest.approx(-0.5)


def test_vanishing_exponent_makes_every_pair_coincide(eight_I, four_I):
    # α + 1/2 − 1/p = 0
    rep = sequence_space_coincidence(eight_I, four_I, TLParams(alpha=0.0, p=2.0, q=2.0))
    assert rep.verdict is Coincidence.EQUAL
    assert rep.det_factor_a == pytest.approx(1.0)


def test_sup_exponents_use_the_weight_only(two_I, diag_2_3):
    rep = sequence_space_coincidence(two_I, diag_2_3, TLParams(alpha=0.0, p=math.inf, q=math.inf))
    assert rep.exponent == pytest.approx(0.5)
    assert rep.verdict is Coincidence.NOT_EQUAL


def test_cocycle_criterion_for_p_not_q(two_I, two_R1, two_Rhalfpi):
    params = TLParams(alpha=0.0, p=2.0, q=1.0)
    irrational = sequence_space_coincidence(two_I, two_R1, params)
    assert irrational.verdict is Coincidence.NOT_EQUAL
    assert irrational.reason == "cocycle criterion"
    assert irrational.probe is not None

    quarter = sequence_space_coincidence(two_I, two_Rhalfpi, params)
    assert quarter.verdict is Coincidence.EQUAL


def test_identical_matrices_coincide_for_any_exponents(diag_2_3):
    for params in (TLParams(0.0, 2.0, 1.0), TLParams(1.0, 0.5, math.inf), TLParams(-0.3, 3.0, 3.0)):
        assert sequence_space_coincidence(diag_2_3, diag_2_3, params, J=16).verdict is Coincidence.EQUAL
