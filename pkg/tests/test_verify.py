import json
import warnings

import numpy as np
import pytest

from amblab import functionals as fn
from amblab import tf, verify
from amblab.domains import Annulus, Ball, Interval, MaskFile, Rect
from amblab.errors import Unsupported
from amblab.tf import PhasePoint, Signal, TimeGrid

O = PhasePoint(0.0, 0.0)


def test_radar_correlation():
    r = verify.check_radar_correlation(trials=20)
    assert r.passed
    m = dict(r.measured)
    assert m["min_margin"] > 0
    assert m["gaussian_second_peak"] == pytest.approx(m["gaussian_second_peak_expected"], abs=1e-8)
    with pytest.raises(ValueError):
        verify.check_radar_correlation(trials=0)


def test_decoupling_defaults():
    r = verify.check_decoupling()
    assert r.passed
    m = dict(r.measured)
    assert m["pythagorean_deviation"][-1] < 0.05
    assert m["p_star"] == pytest.approx(4 / 3)


def test_decoupling_single_profile_exact():
    g = TimeGrid(512, 0.1)
    r = verify.check_decoupling(tf.gaussian(g), Signal(g, np.zeros(512)), p=2)
    assert max(dict(r.measured)["pythagorean_deviation"]) < 1e-12


def test_decoupling_needs_increasing():
    with pytest.raises(ValueError):
        verify.check_decoupling(separations=[10, 5])


def test_weak_usc():
    r = verify.check_weak_usc_failure()
    assert r.passed
    g = TimeGrid(256, 0.15)
    with pytest.raises(ValueError):
        verify.check_weak_usc_failure(g=Signal(g, np.zeros(256)))
    zero_f = verify.check_weak_usc_failure(f=Signal(g, np.zeros(256)))
    m = dict(zero_f.measured)
    assert zero_f.passed and m["energy_f"] == 0.0
    assert m["energy_of_sum"][-1] == pytest.approx(m["energy_g"], rel=0.05)


def test_nonattainment_timecorr():
    r = verify.check_nonattainment_timecorr()
    assert r.passed
    m = dict(r.measured)
    assert all(gap > 0 for gap in m["gap"])
    assert m["gap_fit_c_over_lambda"] == pytest.approx(0.25, abs=0.02)
    with pytest.raises(ValueError):
        verify.check_nonattainment_timecorr(lams=[2, 1])


def test_linf_attainment_cases():
    assert verify.check_linf_attainment(Ball(O, 1.0), lams=[1.0, 2.0]).passed
    annulus = verify.check_linf_attainment(Annulus(O, 1, 2))
    assert annulus.passed
    vals = dict(annulus.measured)["objective_linf"]
    assert vals[2] == pytest.approx(np.exp(-np.pi / 32), abs=1e-3)
    with pytest.raises(Unsupported):
        verify.check_linf_attainment(MaskFile("m.csv"))


def test_linf_nonattainment_for_offset_rect():
    r = verify.check_linf_attainment(Rect(0.5, 1, 0.5, 1), lams=[1.0, 2.0, 4.0], sup_tol=1.0)
    assert all(v < 1 for v in dict(r.measured)["objective_linf"])


def test_symplectic_covariance():
    r = verify.check_symplectic_covariance()
    assert r.passed
    g = TimeGrid.square(256)
    gauss = verify.check_symplectic_covariance(tf.gaussian(g))
    assert dict(gauss.measured)["rotation_J"] < 1e-10


def test_frame_bounds():
    r = verify.check_frame_bounds(trials=30)
    m = dict(r.measured)
    assert r.passed and 0 < m["frame_bound_A"] <= m["frame_bound_B"]
    assert m["frame_bound_A"] <= m["empirical_lower"] <= m["empirical_upper"] <= m["frame_bound_B"] * (1 + 1e-9)


def test_frame_bounds_atoms_within_bounds():
    g = TimeGrid.square(256)
    lat = fn.GaborLattice.default(g)
    lo, hi = verify.frame_operator_bounds(tf.gaussian(g), lat)
    w = tf.gaussian(g)
    f = (tf.timefreq_shift(w, PhasePoint(lat.a, 0)) + tf.timefreq_shift(w, PhasePoint(0, -2 * lat.b))) * 0.5
    ratio = np.sum(np.abs(fn.gabor_coefficients(f, w, lat)) ** 2) / f.norm_sq()
    assert lo * (1 - 1e-9) <= ratio <= hi * (1 + 1e-9)


def test_frame_bounds_overcritical_warns():
    g = TimeGrid.square(256)
    lat = fn.GaborLattice(16 * g.dx, 20 * g.domega)
    with pytest.warns(UserWarning):
        r = verify.check_frame_bounds(lat=lat, trials=10)
    assert r.passed and "report only" in r.details
    assert dict(r.measured)["frame_bound_A"] < 1e-8


def test_reports_deterministic():
    a = [r.to_json() for r in verify.run_suites(["radar_correlation", "decoupling"], seed=4)]
    b = [r.to_json() for r in verify.run_suites(["decoupling", "radar_correlation"], seed=4)]
    assert json.dumps(a) == json.dumps(b)
    assert [x["name"] for x in a] == ["radar_correlation", "decoupling"]


def test_unknown_suite():
    with pytest.raises(KeyError):
        verify.run_suites(["nosuchsuite"])


def test_summary_table():
    table = verify.summary_table([verify.CheckReport("x", True), verify.CheckReport("longer", False)])
    assert "PASS" in table and "FAIL" in table
