"""
Tests for app.services.mono_builder.

Covers:
1. Exactness on cubics and on x^2 sign(x)
2. Piece descriptors and the two equivalent representations
3. Endpoint interpolation, smoothness and 3-monotonicity
4. Knot geometry and the Whitney fallback for n <= 4
"""

import numpy as np
import pytest

from app.core.divdiff import whitney_cubic
from app.core.exceptions import InvalidArgumentError
from app.core.partition import make_custom, make_equidistant
from app.services.knot_planner import PIECE_FULL, PIECE_RELOCATED, PIECE_RELOCATED_PREV, PIECE_ZERO
from app.services.mono_builder import build_pieces, build_spline, gamma_sign_violations, theorem_metadata
from app.services.verify import check_3monotone_spline, representation_gap
from app.utils.funcs import CORPUS, resolve

XS = np.linspace(-1.0, 1.0, 2001)


def cubic(x):
    return x**3 + 2 * x**2 - x + 1


def test_cubic_is_reproduced():
    """Test 1: the telescoping sum collapses to the cubic itself."""
    spline = build_spline(cubic, make_equidistant(-1.0, 1.0, 10))
    assert np.max(np.abs(spline(XS) - cubic(XS))) <= 1e-11


def test_x2sign_is_reproduced():
    f = resolve("x2sign")[0]
    spline = build_spline(f, make_equidistant(-1.0, 1.0, 8))
    assert spline.plan.k == 7
    assert np.max(np.abs(spline(XS) - f(XS))) <= 1e-12


def test_x2sign_pieces():
    """Test 2: relocated pieces share their knots, Psi_2 is zero, Psi_n is the full product."""
    f = resolve("x2sign")[0]
    spline = build_spline(f, make_equidistant(-1.0, 1.0, 8))
    pieces = spline.pieces
    assert pieces[2].kind == PIECE_ZERO
    assert pieces[8].kind == PIECE_FULL
    assert pieces[5].kind == PIECE_RELOCATED
    assert pieces[4].kind == PIECE_RELOCATED_PREV
    assert pieces[4].knots == pieces[5].knots
    assert pieces[5].gamma > 0
    assert pieces[4].gamma < 0
    # j = 6 has knots (-1/4, 0, 1/2): the gap left by dropping x_3 and x_4
    assert pieces[6].alpha == pytest.approx(4.0 / 9.0)
    assert pieces[6].beta == pytest.approx(0.5)


def test_build_pieces_zero_piece():
    f = resolve("x2sign")[0]
    spline = build_spline(f, make_equidistant(-1.0, 1.0, 8))
    pieces = build_pieces(spline.table, spline.plan, spline.partition)
    assert sorted(pieces) == list(range(2, 9))
    assert pieces[2](XS).tolist() == [0.0] * XS.size


@pytest.mark.parametrize("name", CORPUS)
@pytest.mark.parametrize("n", [5, 8, 16, 32])
def test_representations_agree(name, n):
    f = resolve(name)[0]
    spline = build_spline(f, make_equidistant(-1.0, 1.0, n))
    assert representation_gap(spline.form24, spline.form23, (-1.0, 1.0)) <= 1e-9


@pytest.mark.parametrize("name", CORPUS)
@pytest.mark.parametrize("n", [5, 8, 16, 32])
def test_shape_and_interpolation(name, n):
    """Test 3: s(a) = f(a), s(b) = f(b), s is C1 and certified 3-monotone."""
    f = resolve(name)[0]
    spline = build_spline(f, make_equidistant(-1.0, 1.0, n))
    for end in (-1.0, 1.0):
        assert spline(end) == pytest.approx(float(f(end)), rel=1e-10, abs=1e-12)
    assert spline.form24.is_c1()
    assert check_3monotone_spline(spline.form24).passed
    assert gamma_sign_violations(spline) == []
    assert set(spline.form24.knots()) <= set(spline.plan.points)


@pytest.mark.parametrize("name", CORPUS)
def test_knot_geometry(name):
    """Test 4: knots stay within 3h/2 of the partition and at least h/2 apart."""
    f = resolve(name)[0]
    p = make_equidistant(-1.0, 1.0, 16)
    meta = theorem_metadata(build_spline(f, p), p)
    assert meta.h == pytest.approx(0.125)
    assert meta.distances_ok
    assert meta.gaps_ok
    assert meta.knots_in_plan
    assert len(meta.rows) == build_spline(f, p).plan.k + 1


def test_knot_geometry_needs_equidistant_partition():
    p = make_custom([-1.0, -0.6, -0.1, 0.3, 0.55, 1.0])
    spline = build_spline(np.exp, p)
    with pytest.raises(InvalidArgumentError):
        theorem_metadata(spline, p)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_whitney_fallback(n):
    p = make_equidistant(-1.0, 1.0, n)
    spline = build_spline(np.exp, p)
    assert spline.fallback
    assert spline.table is None
    assert spline.plan.k == n
    expected = whitney_cubic(np.exp, -1.0, 1.0)
    assert np.allclose(spline(XS), expected(XS), rtol=1e-12, atol=1e-12)
    assert spline(-1.0) == pytest.approx(np.exp(-1.0))
    assert spline(1.0) == pytest.approx(np.exp(1.0))
    assert check_3monotone_spline(spline.form24).passed


def test_to_dict():
    spline = build_spline(np.exp, make_equidistant(-1.0, 1.0, 8))
    data = spline.to_dict()
    assert data["domain"] == [-1.0, 1.0]
    assert data["fallback"] is False
    assert data["plan"]["k"] == 8
    assert [piece["j"] for piece in data["pieces"]] == list(range(2, 9))


@pytest.mark.parametrize("f", [lambda x: x**2, lambda x: x**2 + x])
@pytest.mark.parametrize("n", [6, 10, 24, 50, 100])
def test_quadratic_is_reproduced(f, n):
    """Rounding noise in Delta_j must not change the plan for a quadratic."""
    p = make_equidistant(-1.0, 1.0, n)
    spline = build_spline(f, p)
    assert spline.plan.k == n
    assert np.max(np.abs(spline(XS) - f(XS))) <= 1e-8
    assert check_3monotone_spline(spline.form24).passed


@pytest.mark.parametrize("name, n", [("x2sign", 10), ("x2sign", 12), ("x2sign", 20), ("x2sign", 24),
                                     ("x2sign", 40), ("twokinks", 24), ("x^3", 100)])
def test_fine_partitions_build(name, n):
    f = resolve(name)[0]
    p = make_equidistant(-1.0, 1.0, n)
    spline = build_spline(f, p)
    assert check_3monotone_spline(spline.form24).passed
    assert gamma_sign_violations(spline) == []
    for end in (-1.0, 1.0):
        assert spline(end) == pytest.approx(float(f(end)), rel=1e-8, abs=1e-10)


def test_to_dict_carries_piecewise_table():
    spline = build_spline(np.exp, make_equidistant(-1.0, 1.0, 8))
    table = spline.to_dict()["piecewise"]
    assert table["breakpoints"][0] == -1.0
    assert table["breakpoints"][-1] == 1.0
    assert len(table["coefficients"]) == len(table["breakpoints"]) - 1
    assert all(len(row) == 4 for row in table["coefficients"])
