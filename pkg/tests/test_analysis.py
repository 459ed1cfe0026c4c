import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from esgd.analysis import (asymptotic_eta0, esgd_beats_agd, find_eta0, fit_slope,
                           rate_gap_table, stability_domain, verify_identities)
from esgd.cheb import make_profile
from esgd.errors import AnalysisError, InvalidInputError
from esgd.schedule import effective_rate

SPEC_GRID = np.geomspace(1e2, 1e6, 25)


def test_stability_domain_boundary_point():
    g = stability_domain(10, 0.0, window=(-210, -190, -1, 1), resolution=(21, 1))
    i = int(np.argmin(np.abs(g.re + 200)))
    assert g.re[i] == pytest.approx(-200) and g.im[0] == 0.0
    assert g.values[0, i] == pytest.approx(1.0, abs=1e-9)


def test_stability_domain_damped_interval():
    p = make_profile(10, 2.0)
    g = stability_domain(10, 2.0, window=(-96.86, -0.959, -1, 1), resolution=(500, 1))
    assert g.values.max() <= p.alpha * (1 + 1e-10)
    assert g.strip_max < 1.0


def test_single_stage_real_domain():
    g = stability_domain(1, 0.0, window=(-3, 1, -0.5, 0.5), resolution=(400, 1))
    inside = g.re[g.values[0] < 1]
    assert inside.min() > -2 and inside.max() < 0
    assert inside.min() < -1.98 and inside.max() > -0.02


def test_stability_domain_defaults_and_symmetry():
    g = stability_domain(4, 1.0, resolution=(40, 20))
    assert (g.re_min, g.re_max, g.im_min, g.im_max) == (-35.2, 1.6, -16, 16)
    assert np.all(g.values >= 0)
    # the window is symmetric in im, so rows mirror each other
    np.testing.assert_allclose(g.values, g.values[::-1], rtol=1e-13)


def test_stability_domain_resolution_limit():
    with pytest.raises(InvalidInputError):
        stability_domain(5, 1.0, resolution=(5000, 10))


@settings(max_examples=30, deadline=None)
@given(s=st.integers(1, 60), eta=st.floats(0.01, 50))
def test_strip_inside_sublevel_set(s, eta):
    g = stability_domain(s, eta, resolution=(4, 4))
    assert g.strip_max < 1.0


def test_rate_gap_examples():
    (row,) = rate_gap_table([101], [2.0])
    assert row.gap == pytest.approx(0.767696 - 0.670765, abs=2e-6)
    (row,) = rate_gap_table([1.0], [3.0])
    assert row.c_opt == 0.0
    assert row.gap == pytest.approx(make_profile(1, 3.0).alpha ** 2)


def test_rate_gap_rows_nonnegative_and_pure():
    rows = rate_gap_table(SPEC_GRID, [0.5, 1.17, 2.0, 10.0])
    assert all(r.gap >= -1e-12 for r in rows)
    assert rows == rate_gap_table(SPEC_GRID, [0.5, 1.17, 2.0, 10.0])
    assert len(rows) == 100


@pytest.mark.parametrize("eta", [2.0, 10.0])
def test_slope_near_minus_half(eta):
    slope, _ = fit_slope(rate_gap_table(SPEC_GRID, [eta]), eta)
    assert -0.55 <= slope <= -0.45


def test_slope_needs_points():
    with pytest.raises(InvalidInputError):
        fit_slope(rate_gap_table([10, 100], [2.0]), 2.0)


def test_crossover_predicate():
    assert effective_rate(101, 2.0) < 0.7837
    assert esgd_beats_agd(2.0, SPEC_GRID)
    assert not esgd_beats_agd(0.1, [1e5, 1e6] * 4)


def test_find_eta0():
    eta0 = find_eta0()
    assert 1.0 <= eta0 <= 1.35
    assert esgd_beats_agd(eta0, np.geomspace(1e4, 1e8, 25))
    assert asymptotic_eta0() == pytest.approx(1.17, abs=0.01)
    with pytest.raises(InvalidInputError):
        find_eta0([1e3, 1e4])


def test_find_eta0_failure():
    with pytest.raises(AnalysisError):
        find_eta0(SPEC_GRID, eta_max=0.05)


def test_verify_identities_examples():
    r = verify_identities([10], [2.0])
    assert r.passed
    assert max(x.worst_error for x in r.results if x.name != "forcing_bound") < 1e-10
    assert verify_identities([1], [0.05]).passed
    big = verify_identities([300], [100.0])
    assert big.worst("alpha_closed_form") <= 1e-10


def test_verify_detects_fault():
    r = verify_identities([5, 10], [2.0], omega1_perturbation=1e-3)
    assert not r.passed
    assert {f.name for f in r.failures} >= {"equioscillation", "forcing_bound"}
