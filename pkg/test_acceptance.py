"""
End-to-end acceptance scenarios for the spline toolkit.

Covers:
1. Exact reproduction of random cubics
2. 3-monotonicity and the error constant over the corpus
3. Convergence order for exp and bounded local ratios
4. Representation identities and knot geometry
5. Six-point fuzzing and negative controls
"""

import numpy as np
import pytest

from app.config.settings import ERROR_CONSTANT_ENVELOPE
from app.core.partition import make_equidistant
from app.services import spline_service
from app.services.knot_planner import knot_count_bounds
from app.services.mono_builder import build_spline, theorem_metadata
from app.services.s3_builder import build_s3
from app.services.spline_service import RunConfig
from app.services.verify import check_3monotone_spline, global_error, interval_error_report, representation_gap
from app.utils.funcs import CORPUS, resolve

SIZES = [5, 8, 16, 32, 64]


def test_random_cubics_are_reproduced():
    """Test 1: ||f - s|| <= 1e-11 ||f|| for twenty random cubics."""
    rng = np.random.default_rng(2024)
    xs = np.linspace(-1.0, 1.0, 1001)
    for _ in range(20):
        c3 = rng.uniform(0.1, 2.0)
        c2, c1, c0 = rng.uniform(-2.0, 2.0, size=3)
        poly = np.polynomial.Polynomial([c0, c1, c2, c3])
        spline = build_spline(poly, make_equidistant(-1.0, 1.0, 10))
        scale = max(1.0, float(np.max(np.abs(poly(xs)))))
        assert np.max(np.abs(spline(xs) - poly(xs))) <= 1e-11 * scale


@pytest.mark.parametrize("name", CORPUS)
@pytest.mark.parametrize("n", SIZES)
def test_corpus_is_shape_preserving(name, n):
    """Test 2: s is certified 3-monotone and ||f - s|| / omega_4(f, h) stays below the envelope."""
    f = resolve(name)[0]
    p = make_equidistant(-1.0, 1.0, n)
    spline = build_spline(f, p)
    assert check_3monotone_spline(spline.form24).passed
    assert global_error(f, spline, p).ratio <= ERROR_CONSTANT_ENVELOPE
    low, high = knot_count_bounds(n)
    assert low <= spline.plan.k <= high


@pytest.mark.parametrize("name", CORPUS)
def test_local_ratios_stay_bounded(name):
    """Largest ratio over the windows [x_{j+4}, x_{j-5}] does not grow as n doubles."""
    f = resolve(name)[0]
    peaks = []
    for n in (8, 16, 32, 64):
        p = make_equidistant(-1.0, 1.0, n)
        rows = interval_error_report(f, build_spline(f, p), p, offsets=(4, 5))
        peaks.append(max(row.ratio for row in rows))
    assert all(np.isfinite(peaks)), peaks
    assert peaks[-1] <= 2.0 * peaks[0] + 1e-9, peaks


def test_exp_convergence_order():
    """Test 3: fitted log-log slope close to 4."""
    frame = spline_service.sweep(RunConfig(command="sweep", function="exp", n_list=(8, 16, 32, 64, 128)))
    assert list(frame["n"]) == [8, 16, 32, 64, 128]
    assert spline_service.fitted_order(frame) >= 3.5
    assert all(frame["ratio"] <= ERROR_CONSTANT_ENVELOPE)


def test_cubic_sweep_has_no_fitted_order():
    frame = spline_service.sweep(RunConfig(command="sweep", function="cubic(1,0,0,0)", n_list=(8, 16, 32)))
    assert list(frame["order"]) == ["", "exact", "exact"]
    assert spline_service.fitted_order(frame) is None


@pytest.mark.parametrize("name", CORPUS)
@pytest.mark.parametrize("n", [8, 32])
def test_representation_identities(name, n):
    """Test 4: both forms of s agree, and so do the three forms of S_3."""
    f = resolve(name)[0]
    p = make_equidistant(-1.0, 1.0, n)
    spline = build_spline(f, p)
    s3 = build_s3(f, p)
    assert representation_gap(spline.form23, spline.form24, (-1.0, 1.0)) <= 1e-9
    assert representation_gap(s3.piecewise, s3.form6, (-1.0, 1.0)) <= 1e-9
    assert representation_gap(s3.piecewise, s3.form7, (-1.0, 1.0)) <= 1e-9


@pytest.mark.parametrize("name", CORPUS)
@pytest.mark.parametrize("n", [16, 64])
def test_knot_geometry(name, n):
    f = resolve(name)[0]
    p = make_equidistant(-1.0, 1.0, n)
    meta = theorem_metadata(build_spline(f, p), p)
    assert meta.max_distance <= 1.5 * meta.h + 1e-12
    assert meta.min_gap >= 0.5 * meta.h - 1e-12


@pytest.mark.parametrize("name", CORPUS + ("x^3",))
def test_six_point_fuzz(name):
    """Test 5: no violations of either bound on 10^4 random equidistant windows."""
    summary = spline_service.lemma1_fuzz(RunConfig(command="lemma1", function=name, trials=10000))
    assert not summary.refused
    assert summary.trials == 10000
    assert summary.violations9 == 0
    assert summary.violations10 == 0
    assert summary.passed


def test_negative_controls():
    summary = spline_service.lemma1_fuzz(RunConfig(command="lemma1", function="negcubic", trials=10))
    assert summary.refused
    assert not summary.passed

    frame = spline_service.compare(RunConfig(command="compare", function="x2sign", n=16))
    assert dict(zip(frame["method"], frame["monotone"])) == {"S3": "FAIL", "s": "PASS"}


def test_verify_battery_over_corpus():
    for name in CORPUS:
        outcome = spline_service.verify(RunConfig(command="verify", function=name, n=16))
        failed = [check.name for check in outcome.checks if not check.passed]
        assert failed == [], name
