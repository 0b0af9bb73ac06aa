"""
Assembly of the C1 cubic 3-monotone spline

    s = L_2(x; x_n; f) + sum_{j=3}^{n} Delta_j (Psi_j - Psi_{j-1})       (source of truth)
      = L_3(x; x_n; f) + sum_{j=3}^{n-1} delta_j (x_{j-3} - x_{j+1}) Psi_j  (cross-check)
"""

import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.config.settings import EQUIDISTANT_RTOL
from app.core.divdiff import RealFunction, whitney_cubic
from app.core.exceptions import InternalConsistencyError, InvalidArgumentError
from app.core.partition import Partition
from app.core.trunc_spline import TruncatedPowerSpline, linear_combination, psi3
from app.services.knot_planner import (
    PIECE_FULL,
    PIECE_LOWER,
    PIECE_RELOCATED,
    PIECE_RELOCATED_PREV,
    PIECE_UPPER,
    PIECE_ZERO,
    ClassificationTable,
    KnotPlan,
    PieceLayout,
    classify,
    piece_layout,
    plan_knots,
)
from app.services.phi_builder import make_phi
from app.services.s3_builder import lagrange_base

logger = logging.getLogger(__name__)

# Expected sign of gamma for each smoothing-piece kind
GAMMA_SIGN = {PIECE_UPPER: 1, PIECE_RELOCATED: 1, PIECE_LOWER: -1, PIECE_RELOCATED_PREV: -1}


class PieceDescriptor(BaseModel):
    model_config = ConfigDict(frozen=True)

    j: int
    kind: str
    knots: Optional[Tuple[float, float, float]] = None
    anchors: Optional[Tuple[float, float, float]] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    gamma: Optional[float] = None


class MonoSpline(BaseModel):
    model_config = ConfigDict(frozen=True)

    partition: Partition
    form23: TruncatedPowerSpline = Field(..., description="L_3 base, delta_j-weighted pieces")
    form24: TruncatedPowerSpline = Field(..., description="L_2 base, Delta_j-weighted piece differences")
    plan: KnotPlan
    table: Optional[ClassificationTable] = None
    pieces: Dict[int, PieceDescriptor] = Field(default_factory=dict)
    fallback: bool = Field(False, description="True when n <= 4 and s is the Whitney cubic")

    def __call__(self, x: Any) -> Any:
        return self.form24(x)

    def to_dict(self) -> Dict[str, Any]:
        data = self.form24.to_dict()
        data["piecewise"] = self.form24.to_piecewise().to_dict()
        data["plan"] = self.plan.to_dict()
        data["pieces"] = [p.model_dump() for p in self.pieces.values()]
        data["fallback"] = self.fallback
        return data


class KnotGeometryRow(BaseModel):
    i: int
    y: float
    nearest_x: float
    distance: float
    gap: Optional[float] = None


class TheoremMetadata(BaseModel):
    h: float
    rows: List[KnotGeometryRow]
    max_distance: float
    min_gap: float
    distances_ok: bool = Field(..., description="every knot within 3h/2 of a partition point")
    gaps_ok: bool = Field(..., description="consecutive knots at least h/2 apart")
    knots_in_plan: bool = Field(..., description="every knot of s belongs to Y")


def _build_pieces(
    table: ClassificationTable, plan: KnotPlan, partition: Partition
) -> Tuple[Dict[int, TruncatedPowerSpline], Dict[int, PieceDescriptor]]:
    domain = (partition.a, partition.b)
    splines: Dict[int, TruncatedPowerSpline] = {}
    descriptors: Dict[int, PieceDescriptor] = {}
    for j, layout in piece_layout(table, plan, partition).items():
        splines[j], descriptors[j] = _realize(layout, partition, domain)
        logger.debug(f"Psi_{j}: {layout.kind} knots={layout.knots}")
    return splines, descriptors


def _realize(
    layout: PieceLayout, partition: Partition, domain: Tuple[float, float]
) -> Tuple[TruncatedPowerSpline, PieceDescriptor]:
    if layout.kind == PIECE_ZERO:
        return TruncatedPowerSpline.zero(domain), PieceDescriptor(j=layout.j, kind=layout.kind)
    if layout.kind == PIECE_FULL:
        return psi3(partition, layout.j), PieceDescriptor(j=layout.j, kind=layout.kind, anchors=layout.anchors)
    if layout.knots is None or layout.anchors is None:
        raise InternalConsistencyError(f"piece {layout.j} of kind {layout.kind} has no knots")
    coeffs, spline = make_phi(layout.anchors, layout.knots, domain)
    descriptor = PieceDescriptor(
        j=layout.j, kind=layout.kind, knots=layout.knots, anchors=layout.anchors,
        alpha=coeffs.alpha, beta=coeffs.beta, gamma=coeffs.gamma,
    )
    return spline, descriptor


def build_pieces(
    table: ClassificationTable, plan: KnotPlan, partition: Partition
) -> Dict[int, TruncatedPowerSpline]:
    """Psi_j for j = 2..n: zero, smoothing functions for j in J, and the full product for j = n."""
    return _build_pieces(table, plan, partition)[0]


def _fallback(f: RealFunction, partition: Partition) -> MonoSpline:
    domain = (partition.a, partition.b)
    cubic = TruncatedPowerSpline.from_polynomial(whitney_cubic(f, partition.a, partition.b), domain)
    plan = KnotPlan(points=partition.points)
    logger.info(f"n={partition.n} <= 4: using the Whitney cubic")
    return MonoSpline(partition=partition, form23=cubic, form24=cubic, plan=plan, fallback=True)


def build_spline(f: RealFunction, partition: Partition) -> MonoSpline:
    """
    Build the 3-monotone spline s for f on the partition.

    Raises:
        AdmissibilityError: the partition is not close enough to equidistant
    """
    if partition.n <= 4:
        return _fallback(f, partition)

    table = classify(f, partition)
    plan = plan_knots(table, partition)
    pieces, descriptors = _build_pieces(table, plan, partition)
    domain = (partition.a, partition.b)
    x = partition.points
    n = partition.n

    form24 = linear_combination(
        domain,
        [(table.Delta[j], pieces[j] - pieces[j - 1]) for j in range(3, n + 1)],
        base=lagrange_base(f, partition, 2),
    )
    form23 = linear_combination(
        domain,
        [(table.delta[j] * (x[j - 3] - x[j + 1]), pieces[j]) for j in range(3, n)],
        base=lagrange_base(f, partition, 3),
    )
    spline = MonoSpline(
        partition=partition, form23=form23, form24=form24, plan=plan, table=table, pieces=descriptors,
    )
    logger.info(f"Built 3-monotone spline: n={n}, k={plan.k}, |W|={len(table.W)}")
    return spline


def gamma_sign_violations(spline: MonoSpline, rtol: float = 1e-12) -> List[int]:
    """Indices whose gamma is nonzero with the wrong sign for its piece kind."""
    bad = []
    scale = spline.partition.length
    for j, piece in spline.pieces.items():
        expected = GAMMA_SIGN.get(piece.kind)
        if expected is None or piece.gamma is None:
            continue
        if abs(piece.gamma) > rtol * scale and np.sign(piece.gamma) != expected:
            bad.append(j)
    return bad


def theorem_metadata(spline: MonoSpline, partition: Partition) -> TheoremMetadata:
    """Distance of every knot to the nearest partition point and gaps between consecutive knots."""
    if not partition.is_equidistant(EQUIDISTANT_RTOL):
        raise InvalidArgumentError("knot geometry is defined for equidistant partitions")
    h = partition.length / partition.n
    x = partition.x
    rows = []
    for i, y in enumerate(spline.plan.points):
        nearest = float(x[int(np.argmin(np.abs(x - y)))])
        gap = None if i == 0 else spline.plan.points[i - 1] - y
        rows.append(KnotGeometryRow(i=i, y=y, nearest_x=nearest, distance=abs(y - nearest), gap=gap))
    max_distance = max(r.distance for r in rows)
    min_gap = min(r.gap for r in rows if r.gap is not None)
    tol = EQUIDISTANT_RTOL * partition.length
    knots_in_plan = set(spline.form24.knots()) <= set(spline.plan.points)
    return TheoremMetadata(
        h=h,
        rows=rows,
        max_distance=max_distance,
        min_gap=min_gap,
        distances_ok=max_distance <= 1.5 * h + tol,
        gaps_ok=min_gap >= 0.5 * h - tol,
        knots_in_plan=knots_in_plan,
    )
