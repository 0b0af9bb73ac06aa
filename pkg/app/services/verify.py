"""
Independent oracles: the modulus of smoothness, the exact 3-monotonicity
certificate for cubic splines, the randomized input screen, the
divided-difference inequalities for six consecutive points and the
error-ratio reports.
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.config.settings import (
    DEFAULT_GRID,
    DEFAULT_SEED,
    EQUIDISTANT_RTOL,
    LEMMA1_WINDOW_GRID,
    MODULUS_SHIFTS,
    MODULUS_STEPS,
    MONOTONE_TOL,
    SCREEN_SAMPLES,
)
from app.core.divdiff import RealFunction, divided_difference_of, evaluate, modulus_value
from app.core.exceptions import InvalidArgumentError
from app.core.partition import Partition
from app.core.trunc_spline import PiecewisePoly, TruncatedPowerSpline

logger = logging.getLogger(__name__)

# Screen grid resolution: quadruples are drawn from (b - a) / SCREEN_RESOLUTION spacing
SCREEN_RESOLUTION = 1024
RATIO_ATOL = 1e-10


class ModulusEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(..., description="Order of the forward difference")
    t: float = Field(..., description="Requested step bound")
    interval: Tuple[float, float]
    value: float = Field(..., ge=0.0)
    steps: int = Field(..., description="Number of step sizes u in (0, t]")
    shifts: int = Field(..., description="Number of positions per step size")


class JumpRecord(BaseModel):
    knot: float
    left: float
    right: float

    @property
    def jump(self) -> float:
        return self.right - self.left


class SlopeRecord(BaseModel):
    interval: Tuple[float, float]
    slope: float


class MonotonicityReport(BaseModel):
    """Exact analysis of the piecewise-linear second derivative of a cubic spline."""

    passed: bool = Field(..., serialization_alias="pass")
    worst_jump: Optional[JumpRecord] = Field(None, description="Knot with the smallest s'' jump")
    worst_slope: Optional[SlopeRecord] = Field(None, description="Piece with the smallest s'' slope")
    c1_defect: Optional[JumpRecord] = Field(None, description="Knot with the largest |s'| jump")
    tolerance: float
    scale: float


class Lemma1Window(BaseModel):
    """Part of [x3, x2] where E1(y) >= E2(y) > 0 on the scan grid; None bounds mean empty."""

    branch: str
    lo: Optional[float] = None
    hi: Optional[float] = None

    @property
    def empty(self) -> bool:
        return self.lo is None


class Lemma1Result(BaseModel):
    ineq9: bool
    ineq10: Optional[bool] = Field(None, description="None when the hypothesis does not apply")
    lhs: float
    A: float
    B: float
    C: float
    D: float
    deltas: Tuple[float, float, float] = Field(..., description="Delta5, Delta4, Delta3")
    slack9: float = Field(..., description="A + 2B - lhs")
    slack10: Optional[float] = Field(None, description="min(lhs - max(C, D), max(C, D) - A + 2B)")


class IntervalErrorRow(BaseModel):
    j: int
    x_j: float
    sup_error: float
    omega4: float
    ratio: float


class ErrorSummary(BaseModel):
    n: int
    h: float
    sup_error: float
    omega4: float
    ratio: float


class PointwiseRow(BaseModel):
    x: float
    error: float
    step: float
    omega4: float
    ratio: float


# ----- modulus -----


def modulus(
    f: RealFunction,
    k: int,
    t: float,
    interval: Sequence[float],
    steps: int = MODULUS_STEPS,
    shifts: int = MODULUS_SHIFTS,
) -> ModulusEstimate:
    """omega_k(f, t, interval) by grid brute force."""
    lo, hi = float(interval[0]), float(interval[1])
    value = modulus_value(f, k, t, lo, hi, steps=steps, shifts=shifts)
    return ModulusEstimate(k=k, t=t, interval=(lo, hi), value=value, steps=steps, shifts=shifts)


def safe_ratio(error: float, omega: float, scale: float = 1.0) -> float:
    """
    error / omega with the floor RATIO_ATOL * max(1, scale):
    0 when both sides are below it, +inf when only omega is.
    """
    floor = RATIO_ATOL * max(1.0, scale)
    if omega <= floor:
        return 0.0 if error <= floor else float("inf")
    return error / omega


# ----- sampling helpers -----


def interval_grid(partition: Partition, grid: int = DEFAULT_GRID) -> np.ndarray:
    """Ascending sample points: grid + 1 equally spaced points in every I_j."""
    pieces = [np.linspace(left, right, grid + 1) for left, right in zip(partition.ascending()[:-1], partition.ascending()[1:])]
    return np.unique(np.concatenate(pieces))


def sup_error(f: RealFunction, g: Callable, lo: float, hi: float, grid: int) -> float:
    xs = np.linspace(lo, hi, grid + 1)
    return float(np.max(np.abs(evaluate(f, xs) - np.asarray(g(xs), dtype=float))))


def function_scale(f: RealFunction, partition: Partition, grid: int = DEFAULT_GRID) -> float:
    return float(np.max(np.abs(evaluate(f, interval_grid(partition, grid)))))


# ----- exact 3-monotonicity certificate -----


def check_3monotone_spline(
    s: Union[TruncatedPowerSpline, PiecewisePoly], tol: float = MONOTONE_TOL
) -> MonotonicityReport:
    """
    Certify s in Delta^3 from its piecewise-linear s'': every jump
    s''(y+) - s''(y-) and every slope must be >= -tol * scale, and s' must
    not jump by more than tol * scale. scale = max(1, max |s''| at knots).
    """
    pp = s.to_piecewise() if isinstance(s, TruncatedPowerSpline) else s
    first = pp.derivative(1)
    second = pp.derivative(2)
    bp = pp.breakpoints
    inner = pp.interior_breakpoints()

    second_values = np.concatenate(
        [np.atleast_1d(second.left_limit(bp)), np.atleast_1d(second.right_limit(bp))]
    )
    scale = max(1.0, float(np.max(np.abs(second_values))))
    first_values = np.concatenate(
        [np.atleast_1d(first.left_limit(bp)), np.atleast_1d(first.right_limit(bp))]
    )
    first_scale = max(1.0, float(np.max(np.abs(first_values))))
    threshold = -tol * scale

    worst_jump = None
    c1_defect = None
    jumps_ok = c1_ok = True
    if inner.size:
        left = np.atleast_1d(second.left_limit(inner))
        right = np.atleast_1d(second.right_limit(inner))
        idx = int(np.argmin(right - left))
        worst_jump = JumpRecord(knot=float(inner[idx]), left=float(left[idx]), right=float(right[idx]))
        jumps_ok = worst_jump.jump >= threshold

        d_left = np.atleast_1d(first.left_limit(inner))
        d_right = np.atleast_1d(first.right_limit(inner))
        cidx = int(np.argmax(np.abs(d_right - d_left)))
        c1_defect = JumpRecord(knot=float(inner[cidx]), left=float(d_left[cidx]), right=float(d_right[cidx]))
        c1_ok = abs(c1_defect.jump) <= tol * first_scale

    slopes = second.leading_slopes()
    sidx = int(np.argmin(slopes))
    worst_slope = SlopeRecord(interval=(float(bp[sidx]), float(bp[sidx + 1])), slope=float(slopes[sidx]))
    slopes_ok = worst_slope.slope >= threshold

    report = MonotonicityReport(
        passed=bool(jumps_ok and slopes_ok and c1_ok),
        worst_jump=worst_jump,
        worst_slope=worst_slope,
        c1_defect=c1_defect,
        tolerance=tol,
        scale=scale,
    )
    logger.debug(
        f"3-monotonicity: passed={report.passed}, jump={worst_jump}, slope={worst_slope}, c1={c1_defect}"
    )
    return report


# ----- randomized input screen -----


def check_function_3monotone(
    f: RealFunction,
    interval: Sequence[float],
    samples: int = SCREEN_SAMPLES,
    tol: float = MONOTONE_TOL,
    seed: int = DEFAULT_SEED,
) -> bool:
    """
    Necessary-condition screen: third divided differences over random
    quadruples of distinct points must be >= -(tol + rounding allowance).
    """
    if samples < 4:
        raise InvalidArgumentError(f"samples must be >= 4, got {samples}")
    lo, hi = float(interval[0]), float(interval[1])
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.integers(0, SCREEN_RESOLUTION + 1, size=(samples, 4)), axis=1)
    idx = idx[np.all(np.diff(idx, axis=1) > 0, axis=1)]
    if idx.shape[0] == 0:
        return True
    t = lo + (hi - lo) * idx / SCREEN_RESOLUTION
    values = evaluate(f, t)

    weights = np.ones_like(t)
    for i in range(4):
        for m in range(4):
            if m != i:
                weights[:, i] *= t[:, i] - t[:, m]
    parts = values / weights
    dd = parts.sum(axis=1)
    allowance = tol + 16.0 * np.finfo(float).eps * np.abs(parts).sum(axis=1)
    worst = int(np.argmin(dd + allowance))
    ok = bool(np.all(dd >= -allowance))
    if not ok:
        logger.info(f"3-monotonicity screen failed at {t[worst].tolist()}: [..; f] = {dd[worst]:.3e}")
    return ok


# ----- six-point inequalities -----


def _reflect(points: np.ndarray) -> np.ndarray:
    return -points[::-1]


def _window_c(points: np.ndarray, grid: int) -> Tuple[Optional[float], Optional[float]]:
    x0, x1, x2, x3, x4, _ = points
    y = x3 + (x2 - x3) * np.arange(1, grid) / grid
    spread = (x2 - x4) + (x2 - x3)
    e1 = (x1 - x4) * (x2 - x3) + spread * (x2 - y) * (x1 - x4) / (y - x4)
    e2 = (x0 - x3) * (x1 - x2) + spread * (x2 - y) * (x1 - y) * (x0 - x3) / ((y - x4) * (y - x3))
    good = y[(e1 >= e2) & (e2 > 0)]
    if good.size == 0:
        return None, None
    return float(good.min()), float(good.max())


def lemma1_window(six_points: Sequence[float], branch: str = "C", grid: int = LEMMA1_WINDOW_GRID) -> Lemma1Window:
    """
    Scan (x3, x2) for E1(y) >= E2(y) > 0. Branch "D" is the mirror case and
    is computed on the reflected points x'_k = -x_{5-k}, mapped back to y.

    For equidistant points E1 - E2 vanishes exactly at y = x2 and is negative
    inside, so the window is the single point x2 (x3 for branch "D").
    """
    points = _sorted_six(six_points)
    if branch not in ("C", "D"):
        raise InvalidArgumentError(f"unknown branch {branch!r}")
    if _is_equidistant(points):
        y = float(points[2] if branch == "C" else points[3])
        return Lemma1Window(branch=branch, lo=y, hi=y)
    if branch == "C":
        lo, hi = _window_c(points, grid)
    else:
        rlo, rhi = _window_c(_reflect(points), grid)
        lo, hi = (None, None) if rlo is None else (-rhi, -rlo)
    return Lemma1Window(branch=branch, lo=lo, hi=hi)


def _sorted_six(six_points: Sequence[float]) -> np.ndarray:
    points = np.sort(np.asarray(six_points, dtype=float))[::-1]
    if points.size != 6:
        raise InvalidArgumentError(f"need exactly six points, got {points.size}")
    if np.any(np.diff(points) >= 0):
        raise InvalidArgumentError("six points must be distinct")
    return points


def _is_equidistant(points: np.ndarray) -> bool:
    gaps = -np.diff(points)
    return bool(np.all(np.abs(gaps - gaps.mean()) <= EQUIDISTANT_RTOL * (points[0] - points[-1])))


def lemma1_check(f: RealFunction, six_points: Sequence[float], rtol: float = 1e-7) -> Lemma1Result:
    """
    Upper and lower bounds on (x1 - x4)(x2 - x3) Delta4 for six points
    x0 > ... > x5 (given in any order).

    The upper bound A + 2B always applies. The lower bound max{C, D} >= A - 2B
    applies when Delta5 <= Delta4 >= Delta3 and the points are equidistant or
    have a nonempty window for the larger of C, D; otherwise ineq10 is None.
    """
    x = _sorted_six(six_points)
    x0, x1, x2, x3, x4, x5 = x
    d5 = divided_difference_of(f, x[2:6])
    d4 = divided_difference_of(f, x[1:5])
    d3 = divided_difference_of(f, x[0:4])

    lhs = (x1 - x4) * (x2 - x3) * d4
    A = (x2 - x5) * (x3 - x4) * d5 + (x0 - x3) * (x1 - x2) * d3
    B = float(np.sqrt(max(0.0, (x2 - x5) * (x2 - x4) * d5 * (x0 - x3) * (x1 - x3) * d3)))
    C = (x0 - x3) * (x1 - x2) * d3 - (x2 - x5) * ((x2 - x4) + (x2 - x3)) * d5
    D = (x2 - x5) * (x3 - x4) * d5 - (x0 - x3) * ((x2 - x3) + (x1 - x3)) * d3

    slack_tol = rtol * max(abs(lhs), abs(A) + 2 * B, abs(C), abs(D)) + 1e-12
    slack9 = A + 2 * B - lhs
    ineq9 = slack9 >= -slack_tol

    ineq10 = None
    slack10 = None
    if d5 <= d4 >= d3:
        branch = "C" if C >= D else "D"
        if not lemma1_window(x, branch).empty:
            top = max(C, D)
            slack10 = min(lhs - top, top - (A - 2 * B))
            ineq10 = slack10 >= -slack_tol

    return Lemma1Result(
        ineq9=bool(ineq9),
        ineq10=None if ineq10 is None else bool(ineq10),
        lhs=lhs,
        A=A,
        B=B,
        C=C,
        D=D,
        deltas=(d5, d4, d3),
        slack9=slack9,
        slack10=slack10,
    )


# ----- error reports -----


def interval_error_report(
    f: RealFunction,
    approximant: Callable,
    partition: Partition,
    offsets: Tuple[int, int] = (4, 5),
    grid: int = DEFAULT_GRID,
) -> List[IntervalErrorRow]:
    """
    For every I_j: sup |f - approximant| on I_j against
    omega_4(f, h_j, [x_{j+lo}, x_{j-hi}] clamped to [a, b]).

    offsets (4, 5) is the window of the shape-preserving estimate,
    (0, 3) the window of the unconstrained interpolant.
    """
    lo_off, hi_off = offsets
    scale = function_scale(f, partition, grid)
    rows = []
    for j in range(1, partition.n + 1):
        left, right = partition.interval(j)
        error = sup_error(f, approximant, left, right, grid)
        window = (partition.clamp(j + lo_off), partition.clamp(j - hi_off))
        omega = modulus(f, 4, partition.h(j), window).value
        rows.append(
            IntervalErrorRow(j=j, x_j=partition.points[j], sup_error=error, omega4=omega, ratio=safe_ratio(error, omega, scale))
        )
    return rows


def global_error(
    f: RealFunction, approximant: Callable, partition: Partition, grid: int = DEFAULT_GRID
) -> ErrorSummary:
    """||f - approximant|| on [a, b] against omega_4(f, h, [a, b]) with h the largest mesh size."""
    xs = interval_grid(partition, grid)
    fx = evaluate(f, xs)
    error = float(np.max(np.abs(fx - np.asarray(approximant(xs), dtype=float))))
    h = partition.max_mesh
    omega = modulus(f, 4, h, (partition.a, partition.b)).value
    scale = float(np.max(np.abs(fx)))
    return ErrorSummary(n=partition.n, h=h, sup_error=error, omega4=omega, ratio=safe_ratio(error, omega, scale))


def pointwise_report(
    f: RealFunction, approximant: Callable, partition: Partition, points: int = 17
) -> List[PointwiseRow]:
    """
    |f - s|(x) / omega_4(f, 1/n^2 + sqrt(1 - x^2)/n, [-1, 1]) on a grid.

    Informational only: no bound of this form is known to hold.
    """
    if (partition.a, partition.b) != (-1.0, 1.0):
        raise InvalidArgumentError("the pointwise report is defined on [-1, 1] only")
    n = partition.n
    rows = []
    for x in np.linspace(-1.0, 1.0, points):
        error = float(abs(evaluate(f, x) - float(approximant(x))))
        step = 1.0 / n**2 + np.sqrt(max(0.0, 1.0 - x * x)) / n
        omega = modulus(f, 4, step, (-1.0, 1.0)).value
        rows.append(PointwiseRow(x=float(x), error=error, step=float(step), omega4=omega, ratio=safe_ratio(error, omega)))
    return rows


def representation_gap(
    first: Callable, second: Callable, domain: Sequence[float], points: int = 1000, seed: int = DEFAULT_SEED
) -> float:
    """max |first - second| / max(1, max |first|) at seeded uniform points of the domain (endpoints included)."""
    lo, hi = float(domain[0]), float(domain[1])
    rng = np.random.default_rng(seed)
    xs = np.concatenate([[lo, hi], rng.uniform(lo, hi, size=points)])
    u = np.asarray(first(xs), dtype=float)
    v = np.asarray(second(xs), dtype=float)
    return float(np.max(np.abs(u - v)) / max(1.0, float(np.max(np.abs(u)))))
