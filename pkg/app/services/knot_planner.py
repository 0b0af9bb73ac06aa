"""
Index classification and knot planning for the 3-monotone spline.

Descending indices throughout: x_0 = b > x_1 > ... > x_n = a, Delta_j = [x_j..x_{j-3}; f].
"""

import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.config.settings import ADMISSIBILITY_RTOL, DELTA_TIE_FACTOR
from app.core.divdiff import RealFunction, evaluate
from app.core.exceptions import AdmissibilityError, InternalConsistencyError, InvalidArgumentError
from app.core.partition import Partition
from app.services.phi_builder import phi_coefficients
from app.services.s3_builder import difference_table
from app.services.verify import lemma1_check, lemma1_window

logger = logging.getLogger(__name__)

# Piece kinds
PIECE_UPPER = "v_plus"            # knots x_{j-1} and the two knots above it
PIECE_LOWER = "v_minus"           # knots x_{j-1} and the two knots below it
PIECE_RELOCATED = "relocated"     # j in W, knots around d_j
PIECE_RELOCATED_PREV = "relocated_prev"  # j - 1 for j in W, same knots
PIECE_ZERO = "zero"
PIECE_FULL = "full"


class ClassificationTable(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    Delta: Dict[int, float] = Field(..., description="Delta_j, j = 3..n")
    delta: Dict[int, float] = Field(..., description="delta_j, j = 3..n-1")
    Lambda: Dict[int, float] = Field(..., description="(x_{j-3} - x_j) Delta_j, j = 3..n")
    W: List[int] = Field(default_factory=list, description="Strict local maxima of Delta")
    Z: List[int] = Field(default_factory=list, description="Indices of dropped partition points")
    V_plus: List[int] = Field(default_factory=list)
    V_minus: List[int] = Field(default_factory=list)
    d: Dict[int, float] = Field(default_factory=dict, description="Parabola centers for j in W")
    H: Dict[int, float] = Field(default_factory=dict, description="Parabola minima for j in W")
    H_bar: Dict[int, float] = Field(default_factory=dict, description="Minima at the balanced Lambda_j")
    tie_tolerance: float = Field(0.0, description="Delta_j closer than this are treated as equal")

    @property
    def J(self) -> List[int]:
        return list(range(3, self.n))

    @property
    def V(self) -> List[int]:
        return sorted(self.V_plus + self.V_minus)

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump()


class KnotPlan(BaseModel):
    """Knots y_0 = b > y_1 > ... > y_k = a and the index maps into them."""

    model_config = ConfigDict(frozen=True)

    points: Tuple[float, ...] = Field(..., description="y_0..y_k, descending")
    index_v: Dict[int, int] = Field(default_factory=dict, description="j in V -> i with y_i = x_{j-1}")
    index_w: Dict[int, int] = Field(default_factory=dict, description="j in W -> i with y_i = d_j")

    @property
    def k(self) -> int:
        return len(self.points) - 1

    def y(self, i: int) -> float:
        if not 0 <= i <= self.k:
            raise InternalConsistencyError(f"knot index {i} outside 0..{self.k}")
        return self.points[i]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "points_ascending": list(reversed(self.points)),
            "k": self.k,
            "index_v": self.index_v,
            "index_w": self.index_w,
        }


class PieceLayout(BaseModel):
    """Which kind of piece Psi_j is and the knots/anchors of its smoothing function."""

    model_config = ConfigDict(frozen=True)

    j: int
    kind: str
    knots: Optional[Tuple[float, float, float]] = Field(None, description="(a, c, b) of phi")
    anchors: Optional[Tuple[float, float, float]] = Field(None, description="x_j, x_{j-1}, x_{j-2} of the product")


class AdmissibilityCheck(BaseModel):
    name: str
    passed: bool
    index: Optional[int] = None
    detail: str = ""


class AdmissibilityReport(BaseModel):
    checks: List[AdmissibilityCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def first_failure(self) -> Optional[AdmissibilityCheck]:
        return next((c for c in self.checks if not c.passed), None)


def _parabola(partition: Partition, lam: Tuple[float, float, float], j: int) -> Tuple[float, float]:
    """Center and minimum of the parabola built from (Lambda_{j+1}, Lambda_j, Lambda_{j-1})."""
    x = partition.points
    up, mid, low = lam
    total = up + mid + low
    center = ((x[j] + x[j - 1]) * up + (x[j - 1] + x[j - 2]) * mid + (x[j - 2] + x[j - 3]) * low) / (2.0 * total)
    value = (
        up * (center - x[j]) * (center - x[j - 1])
        + mid * (center - x[j - 1]) * (center - x[j - 2])
        + low * (center - x[j - 2]) * (center - x[j - 3])
    )
    return center, value


def tie_tolerance(f: RealFunction, partition: Partition) -> float:
    """Rounding floor of the third divided differences on the partition."""
    scale = float(np.max(np.abs(evaluate(f, partition.x))))
    h_min = float(np.min(partition.mesh_sizes))
    return DELTA_TIE_FACTOR * float(np.finfo(float).eps) * scale / h_min**3


def classify(f: RealFunction, partition: Partition) -> ClassificationTable:
    """
    Differences, the local-maximum set W, parabola centers d_j and minima H_j,
    and the sets Z, V+ and V-.

    Raises:
        InvalidArgumentError: n < 5, or a non-positive Lambda sum for some j in W
        AdmissibilityError: d_j outside [x_{j-1}, x_{j-2}] ("center_in_interval")
    """
    n = partition.n
    if n < 5:
        raise InvalidArgumentError(f"classification needs n >= 5, got n={n}")
    x = partition.points
    diffs = difference_table(f, partition)
    Delta, delta = diffs.Delta, diffs.delta
    Lambda = {j: (x[j - 3] - x[j]) * Delta[j] for j in range(3, n + 1)}

    ties = tie_tolerance(f, partition)

    def rises(upper: float, lower: float) -> bool:
        return upper - lower > ties

    W = [j for j in range(4, n) if not rises(Delta[j + 1], Delta[j]) and rises(Delta[j], Delta[j - 1])]
    tol = ADMISSIBILITY_RTOL * partition.length

    d: Dict[int, float] = {}
    H: Dict[int, float] = {}
    H_bar: Dict[int, float] = {}
    for j in W:
        lam = (Lambda[j + 1], Lambda[j], Lambda[j - 1])
        if sum(lam) <= 0:
            logger.error(f"Non-positive Lambda sum at j={j}: {lam}")
            raise InvalidArgumentError(f"Lambda sum at j={j} is not positive; f is not 3-monotone")
        center, value = _parabola(partition, lam, j)
        lo, hi = x[j - 1], x[j - 2]
        if not lo - tol <= center <= hi + tol:
            logger.error(f"Parabola center d_{j}={center} outside [{lo}, {hi}]")
            raise AdmissibilityError("center_in_interval", j, f"d_j={center!r} not in [{lo!r}, {hi!r}]")
        d[j] = min(max(center, lo), hi)
        H[j] = value

        balanced = (Lambda[j + 1] * (x[j - 1] - x[j]) + Lambda[j - 1] * (x[j - 3] - x[j - 2])) / (x[j - 2] - x[j - 1])
        H_bar[j] = _parabola(partition, (Lambda[j + 1], balanced, Lambda[j - 1]), j)[1]
        logger.debug(f"j={j}: Delta={Delta[j]:.6e}, d={d[j]:.15g}, H={H[j]:.6e}, H_bar={H_bar[j]:.6e}")

    Z = sorted({i for j in W for i in (j - 1, j - 2)})
    excluded = set(W) | {j - 1 for j in W}
    V = [j for j in range(3, n) if j not in excluded]
    V_plus = [j for j in V if not rises(Delta[j + 1], Delta[j])]
    V_minus = [j for j in V if rises(Delta[j + 1], Delta[j])]

    logger.info(f"Classified n={n}: |W|={len(W)}, |V+|={len(V_plus)}, |V-|={len(V_minus)}")
    return ClassificationTable(
        n=n, Delta=Delta, delta=delta, Lambda=Lambda, W=W, Z=Z,
        V_plus=V_plus, V_minus=V_minus, d=d, H=H, H_bar=H_bar, tie_tolerance=ties,
    )


def knot_gap_violations(plan: KnotPlan, partition: Partition) -> List[Tuple[int, str]]:
    """
    Gaps y_{i-1} - y_i checked against the partition intervals meeting them:
    min h <= gap < 4 max h, with tolerance ADMISSIBILITY_RTOL * (b - a).
    """
    tol = ADMISSIBILITY_RTOL * partition.length
    x = partition.x
    h = partition.mesh_sizes
    found = []
    for i in range(1, plan.k + 1):
        lo, hi = plan.points[i], plan.points[i - 1]
        gap = hi - lo
        # I_j = [x_j, x_{j-1}] meets (lo, hi) when x_j < hi and x_{j-1} > lo
        meets = (x[1:] < hi - tol) & (x[:-1] > lo + tol)
        if not np.any(meets):
            found.append((i, f"gap [{lo!r}, {hi!r}] meets no partition interval"))
            continue
        h_lo = float(np.min(h[meets]))
        h_hi = float(np.max(h[meets]))
        if gap < h_lo - tol or gap >= 4.0 * h_hi + tol:
            found.append((i, f"gap {gap!r} outside [{h_lo!r}, {4.0 * h_hi!r})"))
    return found


def knot_count_bounds(n: int) -> Tuple[int, int]:
    return n - n // 3 - 1, n


def plan_knots(table: ClassificationTable, partition: Partition) -> KnotPlan:
    """
    Y = partition points without the Z-indexed ones, plus the centers d_j,
    sorted descending, with the maps i(j) for j in V and i*(j) for j in W.

    Raises:
        AdmissibilityError: knot gap or knot count out of bounds
    """
    n = partition.n
    x = partition.points
    dropped = set(table.Z)
    kept = [x[j] for j in range(0, n + 1) if j not in dropped]
    points = tuple(sorted(kept + [table.d[j] for j in table.W], reverse=True))
    if len(set(points)) != len(points):
        raise InternalConsistencyError(f"duplicate knots in plan: {points}")

    position = {value: i for i, value in enumerate(points)}
    index_v = {j: position[x[j - 1]] for j in table.V}
    index_w = {j: position[table.d[j]] for j in table.W}
    plan = KnotPlan(points=points, index_v=index_v, index_w=index_w)

    low, high = knot_count_bounds(n)
    if not low <= plan.k <= high:
        raise AdmissibilityError("knot_count", None, f"k={plan.k} outside [{low}, {high}]")
    violations = knot_gap_violations(plan, partition)
    if violations:
        index, detail = violations[0]
        logger.error(f"Knot gap violation at i={index}: {detail}")
        raise AdmissibilityError("knot_gap", index, detail)

    logger.info(f"Planned k={plan.k} knots for n={n}")
    return plan


def piece_layout(table: ClassificationTable, plan: KnotPlan, partition: Partition) -> Dict[int, PieceLayout]:
    """
    Kind, knots and anchors of every Psi_j, j = 2..n.

    Raises:
        InternalConsistencyError: the plan does not provide the needed neighbours
    """
    n = partition.n
    x = partition.points
    layout: Dict[int, PieceLayout] = {
        2: PieceLayout(j=2, kind=PIECE_ZERO),
        n: PieceLayout(j=n, kind=PIECE_FULL, anchors=(x[n], x[n - 1], x[n - 2])),
    }

    for j in table.V:
        i = plan.index_v[j]
        if plan.y(i) != x[j - 1]:
            raise InternalConsistencyError(f"y_{i} != x_{j - 1} for j={j}")
        if j in table.V_plus:
            knots, kind = (plan.y(i), plan.y(i - 1), plan.y(i - 2)), PIECE_UPPER
        else:
            knots, kind = (plan.y(i + 2), plan.y(i + 1), plan.y(i)), PIECE_LOWER
        layout[j] = PieceLayout(j=j, kind=kind, knots=knots, anchors=(x[j], x[j - 1], x[j - 2]))

    for j in table.W:
        i = plan.index_w[j]
        if plan.y(i) != table.d[j]:
            raise InternalConsistencyError(f"y_{i} != d_{j}")
        knots = (plan.y(i + 1), plan.y(i), plan.y(i - 1))
        layout[j] = PieceLayout(j=j, kind=PIECE_RELOCATED, knots=knots, anchors=(x[j], x[j - 1], x[j - 2]))
        layout[j - 1] = PieceLayout(
            j=j - 1, kind=PIECE_RELOCATED_PREV, knots=knots, anchors=(x[j - 1], x[j - 2], x[j - 3])
        )

    missing = [j for j in range(2, n + 1) if j not in layout]
    if missing:
        raise InternalConsistencyError(f"no piece planned for j={missing}")
    return dict(sorted(layout.items()))


def validate_admissibility(
    f: RealFunction, table: ClassificationTable, plan: KnotPlan, partition: Partition
) -> AdmissibilityReport:
    """
    Named checks: center_in_interval, knot_gap, knot_count, phi_sign and
    lemma1_window. Only the first three are fatal in plan_knots; this report
    lists every check so callers can name the first failure.
    """
    x = partition.points
    tol = ADMISSIBILITY_RTOL * partition.length
    checks: List[AdmissibilityCheck] = []

    for j in table.W:
        inside = x[j - 1] - tol <= table.d[j] <= x[j - 2] + tol
        checks.append(AdmissibilityCheck(name="center_in_interval", passed=inside, index=j, detail=f"d_j={table.d[j]!r}"))

    gaps = knot_gap_violations(plan, partition)
    checks.append(AdmissibilityCheck(
        name="knot_gap", passed=not gaps, index=gaps[0][0] if gaps else None, detail=gaps[0][1] if gaps else "",
    ))

    low, high = knot_count_bounds(partition.n)
    checks.append(AdmissibilityCheck(
        name="knot_count", passed=low <= plan.k <= high, detail=f"k={plan.k}, bounds [{low}, {high}]",
    ))

    layout = piece_layout(table, plan, partition)
    for j in table.V:
        piece = layout[j]
        coeffs = phi_coefficients(*piece.knots, *piece.anchors)
        total = coeffs.alpha + coeffs.beta
        ok = all(coeffs.sign_conditions(tol))
        if not ok:
            logger.warning(f"Sign condition fails for j={j}: alpha={coeffs.alpha:.6f}, alpha+beta={total:.6f}")
        checks.append(AdmissibilityCheck(
            name="phi_sign", passed=ok, index=j, detail=f"alpha={coeffs.alpha!r}, alpha+beta={total!r}",
        ))

    for j in table.W:
        six = [x[i] for i in range(j - 4, j + 2)]
        result = lemma1_check(f, six)
        branch = "C" if result.C >= result.D else "D"
        window = lemma1_window(six, branch)
        checks.append(AdmissibilityCheck(
            name="lemma1_window", passed=not window.empty, index=j,
            detail=f"branch {branch}, window [{window.lo}, {window.hi}]",
        ))

    report = AdmissibilityReport(checks=checks)
    if not report.passed:
        failure = report.first_failure
        logger.warning(f"Admissibility check '{failure.name}' failed at index {failure.index}: {failure.detail}")
    return report


def debug_dump(table: ClassificationTable, plan: KnotPlan) -> Dict[str, Any]:
    """JSON-ready dump of the classification and the knot sequence."""
    data = table.to_dict()
    data["V"] = table.V
    data["Y"] = plan.to_dict()
    return data
