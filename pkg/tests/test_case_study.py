import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from riskdesign.case_study import (
    CaseParams,
    case_study_report,
    flip_margin,
    minimal_flip_mu2,
    oracle_flip_threshold,
    participation_bound,
    participation_gap,
    candidate_ic_threshold,
    scan_flip_mu2,
    uninsured_threshold,
)
from riskdesign.errors import DomainError


def test_participation_example():
    assert participation_bound(0.5, 1.0, 0.5) == pytest.approx(3.09375, abs=1e-15)
    assert participation_gap(0.5, 1.0, 0.5) == pytest.approx(3.09375, abs=1e-12)


@given(st.floats(0.01, 0.99), st.floats(0.01, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 2.0))
def test_participation_bound_matches_brute_force(c, kappa, mu2, m):
    assert participation_gap(c, kappa, mu2, m) == pytest.approx(participation_bound(c, kappa, mu2), abs=1e-9)


def test_uninsured_threshold():
    assert uninsured_threshold(1.0, 0.28, 0.1) == pytest.approx(3.5 + 0.125 + 0.28, abs=1e-12)


@given(st.floats(0.05, 0.95), st.floats(0.05, 1.0), st.floats(0.0, 1.0))
def test_oracle_threshold_is_the_flip_margin(c, kappa, mu2):
    params = CaseParams(c=c, kappa=kappa)
    assert flip_margin(params, mu2) == pytest.approx(oracle_flip_threshold(c, kappa, mu2), abs=1e-9)


def test_candidate_threshold_disagrees():
    assert candidate_ic_threshold(0.5, 1.0, 0.1) == pytest.approx(0.29)
    assert oracle_flip_threshold(0.5, 1.0, 0.1) == pytest.approx(0.27675)


def test_flip_threshold():
    params = CaseParams(m=0.28)
    assert minimal_flip_mu2(params) == pytest.approx(2 / 7, abs=1e-12)
    assert scan_flip_mu2(params) == pytest.approx(0.29)
    assert minimal_flip_mu2(CaseParams(m=0.2)) == 0.0
    assert minimal_flip_mu2(CaseParams(m=0.5)) is None


@pytest.mark.parametrize("field, value", [("c", 1.0), ("premium", 0.0), ("kappa", 0.0), ("m", -1.0),
                                          ("mu2_0", 1.5), ("gamma", np.inf)])
def test_params_validated(field, value):
    with pytest.raises(DomainError):
        CaseParams(**{field: value})


def test_report():
    rep = case_study_report()
    assert rep["participation"]["abs_difference"] <= 1e-12
    assert rep["ic_threshold"]["agrees"] is False
    assert rep["imh_before"]["imh"] == 1.0
    assert rep["imh_after"]["imh"] == 0.0
    assert rep["design"]["mu"][1] == pytest.approx(2 / 7, abs=1e-6)
