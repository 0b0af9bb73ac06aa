"""
Tests for app.services.knot_planner.

Covers:
1. Classification on a cubic, on x^2 sign(x) and on exp
   (rounding ties in Delta on quadratics and fine partitions)
2. Knot plan and piece layout for x^2 sign(x)
3. Structural properties over the corpus
4. Admissibility report and error reporting
"""

import numpy as np
import pytest

from app.core.exceptions import AdmissibilityError, InvalidArgumentError
from app.core.partition import make_equidistant
from app.services.knot_planner import (
    PIECE_FULL,
    PIECE_RELOCATED,
    PIECE_RELOCATED_PREV,
    PIECE_UPPER,
    PIECE_ZERO,
    classify,
    debug_dump,
    knot_count_bounds,
    knot_gap_violations,
    piece_layout,
    plan_knots,
    tie_tolerance,
    validate_admissibility,
)
from app.services.phi_builder import phi_coefficients
from app.utils.funcs import CORPUS, resolve


def x2sign_setup():
    f = resolve("x2sign")[0]
    p = make_equidistant(-1.0, 1.0, 8)
    table = classify(f, p)
    return f, p, table, plan_knots(table, p)


def test_cubic_has_no_local_maxima():
    """Test 1: Delta is constant for a cubic, so W is empty and every point is kept."""
    p = make_equidistant(0.0, 8.0, 8)
    table = classify(lambda x: x**3, p)
    assert all(value == pytest.approx(1.0) for value in table.Delta.values())
    assert table.W == []
    assert table.Z == []
    assert table.V_plus == [3, 4, 5, 6, 7]
    assert table.V_minus == []
    assert plan_knots(table, p).k == 8


def test_x2sign_classification():
    _, _, table, _ = x2sign_setup()
    assert table.W == [5]
    assert table.d[5] == pytest.approx(0.0, abs=1e-12)
    assert table.H[5] == pytest.approx(0.0, abs=1e-12)
    assert table.Z == [3, 4]
    assert table.V == [3, 6, 7]
    assert table.V_plus == [3, 6, 7]
    assert table.J == [3, 4, 5, 6, 7]
    assert table.Lambda[5] == pytest.approx(1.0)


@pytest.mark.parametrize("n", [8, 16, 32, 64])
def test_exp_has_no_local_maxima(n):
    table = classify(np.exp, make_equidistant(-1.0, 1.0, n))
    assert table.W == []
    assert table.V_plus == list(range(3, n))
    assert table.V_minus == []


def test_x2sign_plan():
    """Test 2: Y drops x_3, x_4 and adds d_5."""
    _, p, table, plan = x2sign_setup()
    assert plan.k == 7
    assert plan.points == pytest.approx((1.0, 0.75, 0.5, 0.0, -0.25, -0.5, -0.75, -1.0))
    assert plan.index_v == {3: 2, 6: 4, 7: 5}
    assert plan.index_w == {5: 3}
    assert plan.y(0) == 1.0
    assert knot_gap_violations(plan, p) == []


def test_x2sign_piece_layout():
    _, p, table, plan = x2sign_setup()
    layout = piece_layout(table, plan, p)
    assert sorted(layout) == list(range(2, 9))
    kinds = {j: piece.kind for j, piece in layout.items()}
    assert kinds == {
        2: PIECE_ZERO,
        3: PIECE_UPPER,
        4: PIECE_RELOCATED_PREV,
        5: PIECE_RELOCATED,
        6: PIECE_UPPER,
        7: PIECE_UPPER,
        8: PIECE_FULL,
    }
    assert layout[5].knots == pytest.approx((-0.25, 0.0, 0.5))
    assert layout[4].knots == layout[5].knots
    assert layout[5].anchors == pytest.approx((-0.25, 0.0, 0.25))
    assert layout[4].anchors == pytest.approx((0.0, 0.25, 0.5))
    assert layout[3].knots == pytest.approx((0.5, 0.75, 1.0))
    assert layout[3].anchors == pytest.approx((0.25, 0.5, 0.75))


def test_needs_five_intervals():
    with pytest.raises(InvalidArgumentError):
        classify(np.exp, make_equidistant(-1.0, 1.0, 4))


@pytest.mark.parametrize("name", CORPUS)
@pytest.mark.parametrize("n", [5, 8, 16, 32])
def test_structure_over_corpus(name, n):
    """Test 3: W has no neighbours, H_j >= 0 and k stays in its bounds."""
    f = resolve(name)[0]
    p = make_equidistant(-1.0, 1.0, n)
    table = classify(f, p)
    assert all(later - earlier >= 2 for earlier, later in zip(table.W, table.W[1:]))
    assert all(value >= -1e-10 for value in table.H.values())
    assert all(table.H_bar[j] >= table.H[j] - 1e-10 for j in table.W)
    assert set(table.V) | set(table.W) | {j - 1 for j in table.W} == set(table.J)
    plan = plan_knots(table, p)
    low, high = knot_count_bounds(n)
    assert low <= plan.k <= high
    assert plan.points[0] == 1.0
    assert plan.points[-1] == -1.0


@pytest.mark.parametrize("name", CORPUS)
def test_admissibility_over_corpus(name):
    """Test 4: every named check passes on equidistant partitions."""
    f = resolve(name)[0]
    p = make_equidistant(-1.0, 1.0, 16)
    table = classify(f, p)
    report = validate_admissibility(f, table, plan_knots(table, p), p)
    assert report.passed, report.first_failure
    names = {check.name for check in report.checks}
    assert {"knot_gap", "knot_count"} <= names


def test_admissibility_report_names_phi_sign_and_window():
    f, p, table, plan = x2sign_setup()
    report = validate_admissibility(f, table, plan, p)
    names = [check.name for check in report.checks]
    assert names.count("phi_sign") == 3
    assert names.count("lemma1_window") == 1
    assert names.count("center_in_interval") == 1
    assert report.first_failure is None


def test_admissibility_error_message():
    error = AdmissibilityError("knot_gap", 3, "gap too large")
    assert str(error) == "admissibility condition 'knot_gap' violated at index 3: gap too large"
    assert error.condition == "knot_gap"
    assert error.index == 3


def test_debug_dump():
    _, _, table, plan = x2sign_setup()
    data = debug_dump(table, plan)
    assert data["W"] == [5]
    assert data["V"] == [3, 6, 7]
    assert data["Y"]["k"] == 7
    assert data["Y"]["points_ascending"][0] == -1.0


@pytest.mark.parametrize("f", [lambda x: x**2, lambda x: x**2 + x, lambda x: 3.0 - 2.0 * x**2])
@pytest.mark.parametrize("n", [6, 10, 24, 50, 100])
def test_quadratic_deltas_are_ties(f, n):
    """Delta_j of a quadratic is zero up to rounding, so nothing is a strict local maximum."""
    p = make_equidistant(-1.0, 1.0, n)
    table = classify(f, p)
    assert all(abs(value) <= table.tie_tolerance for value in table.Delta.values())
    assert table.W == []
    assert table.V_plus == list(range(3, n))
    assert plan_knots(table, p).k == n


def test_fine_cubic_has_no_local_maxima():
    p = make_equidistant(-1.0, 1.0, 100)
    table = classify(lambda x: x**3, p)
    assert table.W == []
    assert table.Z == []
    assert plan_knots(table, p).k == 100


@pytest.mark.parametrize("n", [10, 12, 20, 24, 40, 48, 100])
def test_x2sign_local_maxima_survive_rounding(n):
    f = resolve("x2sign")[0]
    p = make_equidistant(-1.0, 1.0, n)
    table = classify(f, p)
    assert len(table.W) == 1
    j = table.W[0]
    assert table.Delta[j] > table.tie_tolerance
    assert table.Lambda[j + 1] + table.Lambda[j] + table.Lambda[j - 1] > 0
    low, high = knot_count_bounds(n)
    assert low <= plan_knots(table, p).k <= high


def test_tie_tolerance_scales_with_mesh():
    coarse = tie_tolerance(lambda x: x**3, make_equidistant(-1.0, 1.0, 10))
    fine = tie_tolerance(lambda x: x**3, make_equidistant(-1.0, 1.0, 20))
    assert fine == pytest.approx(8.0 * coarse)
    assert tie_tolerance(lambda x: 0.0 * x, make_equidistant(-1.0, 1.0, 10)) == 0.0


@pytest.mark.parametrize("name", ["x2sign", "twokinks"])
@pytest.mark.parametrize("n", [16, 24, 40])
def test_window_checks_pass_on_equidistant_partitions(name, n):
    f = resolve(name)[0]
    p = make_equidistant(-1.0, 1.0, n)
    table = classify(f, p)
    report = validate_admissibility(f, table, plan_knots(table, p), p)
    windows = [check for check in report.checks if check.name == "lemma1_window"]
    assert len(windows) == len(table.W) > 0
    assert all(check.passed for check in windows)
    assert report.passed, report.first_failure


def test_phi_sign_checks_follow_coefficients():
    f, p, table, plan = x2sign_setup()
    layout = piece_layout(table, plan, p)
    report = validate_admissibility(f, table, plan, p)
    for check in report.checks:
        if check.name != "phi_sign":
            continue
        coeffs = phi_coefficients(*layout[check.index].knots, *layout[check.index].anchors)
        assert check.passed == all(coeffs.sign_conditions())
