from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superradiance.model import (
    DirectCoupling,
    InvalidParameterError,
    ModelParams,
    TrkCoupling,
    rabi_from_trk,
    trk_check,
    trk_feasible_mask,
)

strength = st.floats(0.0, 2.0, allow_nan=False)
positive = st.floats(0.01, 5.0, allow_nan=False)


def test_level_energies():
    p = ModelParams(omega10=0.1, omega21=1.0, D=3.0)
    assert p.level_energies == (0.0, 0.1, 1.1)
    assert p.omega20 == pytest.approx(1.1)


def test_rabi_map_known_value():
    # Omega01^2 = f01 * omega10 * D = 0.5 * 0.2 * 4
    p = ModelParams.from_strengths(0.5, 0.0, 0.0, D=4.0, omega10=0.2, omega21=1.0)
    assert rabi_from_trk(p)[0] == pytest.approx(math.sqrt(0.4), rel=1e-15)


@settings(max_examples=200, deadline=None)
@given(strength, strength, strength, positive, positive, positive)
def test_rabi_round_trip(f01, f02, f12, D, w10, w21):
    p = ModelParams.from_strengths(f01, f02, f12, D=D, omega10=w10, omega21=w21)
    O01, O02, O12 = p.rabi
    for f, O, w in ((f01, O01, w10), (f02, O02, w10 + w21), (f12, O12, w21)):
        assert O**2 / (w * D) == pytest.approx(f, rel=1e-12, abs=1e-300)


def test_direct_mode_passthrough():
    p = ModelParams.from_rabi(0.3, 0.2, 0.1, D=0.0, omega10=1.0, omega21=1.0)
    assert p.rabi == (0.3, 0.2, 0.1)


@pytest.mark.parametrize("kwargs", [
    dict(omega10=0.0, omega21=1.0, D=1.0),
    dict(omega10=1.0, omega21=-1.0, D=1.0),
    dict(omega10=1.0, omega21=1.0, D=-0.1),
    dict(omega10=float("nan"), omega21=1.0, D=1.0),
    dict(omega10=1.0, omega21=1.0, D=0.0, coupling=TrkCoupling(0.1, 0.0, 0.0)),
])
def test_invalid_params(kwargs):
    with pytest.raises(InvalidParameterError):
        ModelParams(**kwargs)


def test_negative_couplings_rejected():
    with pytest.raises(InvalidParameterError):
        TrkCoupling(-0.1, 0.0, 0.0)
    with pytest.raises(InvalidParameterError):
        DirectCoupling(0.0, float("inf"), 0.0)
    with pytest.raises(InvalidParameterError):
        trk_check(0.1, -0.2, 0.0)


def test_trk_zero_d_without_coupling_is_fine():
    p = ModelParams(omega10=1.0, omega21=1.0, D=0.0)
    assert p.rabi == (0.0, 0.0, 0.0)


def test_trk_report_reference_point():
    r = trk_check(0.3995, 0.4069, 0.735)
    assert r.feasible
    assert r.ground_sum == pytest.approx(0.8064, abs=1e-12)
    assert r.excited_sum == pytest.approx(0.3355, abs=1e-12)


def test_trk_report_summary_infeasible():
    r = trk_check(0.6, 0.5, 0.0)
    assert not r.feasible
    assert r.summary() == "infeasible: ground_sum=1.1"
    assert r.violated_constraints == ("ground_sum>1",)


def test_trk_excited_violation():
    r = trk_check(0.2, 0.0, 1.5)
    assert not r.feasible
    assert "excited_sum>1" in r.violated_constraints
    assert r.summary().startswith("infeasible: excited_sum=1.3")


def test_trk_boundary_tolerance():
    assert trk_check(0.3, 0.7, 0.0).feasible
    assert trk_check(0.1 + 0.2, 0.7, 1.3).feasible


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 1.5))
def test_two_level_feasible_iff_f01_at_most_one(f01):
    assert trk_check(f01, 0.0, 0.0).feasible == (f01 <= 1.0 + 1e-12)


@settings(max_examples=1000, deadline=None)
@given(strength, strength)
def test_specialisations(a, b):
    # ladder (f02 = 0), needs f12 > 0 for the level-1 pair to apply
    ladder = a <= 1 + 1e-12 and (b == 0 or -1e-12 <= b - a <= 1 + 1e-12)
    assert trk_check(a, 0.0, b).feasible == ladder
    # V-type (f12 = 0)
    assert trk_check(a, b, 0.0).feasible == (a + b <= 1 + 1e-12)
    # lambda (f01 = 0)
    assert trk_check(0.0, a, b).feasible == (a <= 1 + 1e-12 and b <= 1 + 1e-12)


@settings(max_examples=300, deadline=None)
@given(strength, strength, strength)
def test_mask_matches_scalar_check(f01, f02, f12):
    assert bool(trk_feasible_mask(f01, f02, f12)) == trk_check(f01, f02, f12).feasible


def test_mask_vectorised():
    f = np.linspace(0, 1.5, 7)
    m = trk_feasible_mask(f, 0.0, 0.0)
    assert m.tolist() == [v <= 1 for v in f]
