"""
Truncated-power representation shared by every spline in the package.

A spline is

    base(x) + sum coef * (x - knot)_+^power + sum coef * Psi(x; k1, k2, k3)

with (x - t)_+^r = (x - t)^r for x > t and 0 otherwise, and the product term
Psi(x; k1, k2, k3) = (x - k1)(x - k2)(x - k3) chi(x, k1). Products are kept
unexpanded; only `to_piecewise` turns them into polynomial pieces.
"""

import logging
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.interpolate import PPoly
from scipy.special import comb

from app.core.exceptions import DomainError, InvalidArgumentError
from app.core.partition import Partition

logger = logging.getLogger(__name__)


class TruncatedTerm(BaseModel):
    model_config = ConfigDict(frozen=True)

    knot: float
    power: int = Field(..., ge=0, le=3)
    coef: float


class PsiTerm(BaseModel):
    """coef * (x - k1)(x - k2)(x - k3) for x > k1, zero otherwise."""

    model_config = ConfigDict(frozen=True)

    knots: Tuple[float, float, float]
    coef: float = 1.0

    @property
    def anchor(self) -> float:
        return self.knots[0]


class TruncatedPowerSpline(BaseModel):
    """Cubic spline in the truncated-power basis on a closed domain [a, b]."""

    model_config = ConfigDict(frozen=True)

    domain: Tuple[float, float] = Field(..., description="[a, b]")
    base: Tuple[float, float, float, float] = Field(
        (0.0, 0.0, 0.0, 0.0), description="c0..c3 of the base polynomial about 0"
    )
    terms: Tuple[TruncatedTerm, ...] = Field(default_factory=tuple)
    special_psi: Tuple[PsiTerm, ...] = Field(default_factory=tuple)

    @field_validator("base", mode="before")
    @classmethod
    def _pad_base(cls, value: Any) -> Tuple[float, ...]:
        coeffs = [float(c) for c in value]
        if len(coeffs) > 4:
            if any(c != 0.0 for c in coeffs[4:]):
                raise InvalidArgumentError(f"base polynomial of degree > 3: {coeffs}")
            coeffs = coeffs[:4]
        return tuple(coeffs + [0.0] * (4 - len(coeffs)))

    @model_validator(mode="after")
    def _check_knots(self) -> "TruncatedPowerSpline":
        a, b = self.domain
        if not a < b:
            raise InvalidArgumentError(f"degenerate domain [{a}, {b}]")
        for term in self.terms:
            if not a <= term.knot <= b:
                raise InvalidArgumentError(f"knot {term.knot} outside [{a}, {b}]")
        for psi in self.special_psi:
            if not a <= psi.anchor <= b:
                raise InvalidArgumentError(f"product anchor {psi.anchor} outside [{a}, {b}]")
        return self

    # ----- constructors -----

    @classmethod
    def zero(cls, domain: Tuple[float, float]) -> "TruncatedPowerSpline":
        return cls(domain=domain)

    @classmethod
    def from_polynomial(cls, poly: Polynomial, domain: Tuple[float, float]) -> "TruncatedPowerSpline":
        return cls(domain=domain, base=tuple(poly.coef.tolist()))

    @classmethod
    def truncated(
        cls, domain: Tuple[float, float], knot: float, power: int, coef: float = 1.0
    ) -> "TruncatedPowerSpline":
        return cls(domain=domain, terms=(TruncatedTerm(knot=knot, power=power, coef=coef),))

    # ----- evaluation -----

    @property
    def a(self) -> float:
        return self.domain[0]

    @property
    def b(self) -> float:
        return self.domain[1]

    def base_polynomial(self) -> Polynomial:
        return Polynomial(self.base)

    def eval(self, x: Any) -> Any:
        """Value at x (scalar or array); x must lie in the domain."""
        arr = np.asarray(x, dtype=float)
        if np.any(arr < self.a) or np.any(arr > self.b) or np.any(np.isnan(arr)):
            raise DomainError(f"evaluation outside [{self.a}, {self.b}]")
        result = self.base_polynomial()(arr)
        for term in self.terms:
            active = arr > term.knot
            result = result + term.coef * np.where(active, (arr - term.knot) ** term.power, 0.0)
        for psi in self.special_psi:
            k1, k2, k3 = psi.knots
            active = arr > k1
            result = result + psi.coef * np.where(active, (arr - k1) * (arr - k2) * (arr - k3), 0.0)
        if np.ndim(result) == 0:
            return float(result)
        return result

    def __call__(self, x: Any) -> Any:
        return self.eval(x)

    # ----- arithmetic -----

    def _check_domain(self, other: "TruncatedPowerSpline") -> None:
        if self.domain != other.domain:
            raise InvalidArgumentError(f"domain mismatch: {self.domain} vs {other.domain}")

    def scaled(self, factor: float) -> "TruncatedPowerSpline":
        return TruncatedPowerSpline(
            domain=self.domain,
            base=tuple(factor * c for c in self.base),
            terms=tuple(t.model_copy(update={"coef": factor * t.coef}) for t in self.terms),
            special_psi=tuple(p.model_copy(update={"coef": factor * p.coef}) for p in self.special_psi),
        )

    def __add__(self, other: "TruncatedPowerSpline") -> "TruncatedPowerSpline":
        self._check_domain(other)
        return TruncatedPowerSpline(
            domain=self.domain,
            base=tuple(x + y for x, y in zip(self.base, other.base)),
            terms=self.terms + other.terms,
            special_psi=self.special_psi + other.special_psi,
        ).compact()

    def __sub__(self, other: "TruncatedPowerSpline") -> "TruncatedPowerSpline":
        return self + other.scaled(-1.0)

    def __mul__(self, factor: float) -> "TruncatedPowerSpline":
        return self.scaled(float(factor))

    __rmul__ = __mul__

    def compact(self) -> "TruncatedPowerSpline":
        """Merge terms sharing a knot and power (first-appearance order) and drop zeros."""
        merged: Dict[Tuple[float, int], float] = {}
        for term in self.terms:
            key = (term.knot, term.power)
            merged[key] = merged.get(key, 0.0) + term.coef
        products: Dict[Tuple[float, float, float], float] = {}
        for psi in self.special_psi:
            products[psi.knots] = products.get(psi.knots, 0.0) + psi.coef
        return TruncatedPowerSpline(
            domain=self.domain,
            base=self.base,
            terms=tuple(
                TruncatedTerm(knot=k, power=p, coef=c) for (k, p), c in merged.items() if c != 0.0
            ),
            special_psi=tuple(PsiTerm(knots=k, coef=c) for k, c in products.items() if c != 0.0),
        )

    # ----- structure -----

    def knots(self) -> List[float]:
        """Distinct interior knots (strictly inside the domain) carrying a nonzero term."""
        found = {t.knot for t in self.terms if t.coef != 0.0}
        found |= {p.anchor for p in self.special_psi if p.coef != 0.0}
        return sorted(k for k in found if self.a < k < self.b)

    def is_c1(self) -> bool:
        """
        Structural C1 certificate: no interior power-0/1 terms and no interior
        product anchors, since (x - t)_+^2 and (x - t)_+^3 are C1 at t.
        """
        for term in self.terms:
            if term.power <= 1 and term.coef != 0.0 and self.a < term.knot < self.b:
                return False
        for psi in self.special_psi:
            if psi.coef != 0.0 and self.a < psi.anchor < self.b:
                return False
        return True

    def to_piecewise(self) -> "PiecewisePoly":
        """Exact expansion into cubic pieces between consecutive interior knots."""
        breakpoints = np.array([self.a] + self.knots() + [self.b])
        anchors, rows = self._term_rows()
        base = np.asarray(self.base, dtype=float)
        coeffs = np.zeros((4, len(breakpoints) - 1))
        for idx, left in enumerate(breakpoints[:-1]):
            about_zero = base + (anchors <= left).astype(float) @ rows if rows.size else base
            coeffs[:, idx] = taylor_shift(about_zero, left)[::-1]
        return PiecewisePoly(PPoly(coeffs, breakpoints, extrapolate=False))

    def _term_rows(self) -> Tuple[np.ndarray, np.ndarray]:
        """Anchor and c0..c3 (about 0) of every truncated term and product once activated."""
        anchors: List[float] = []
        rows: List[np.ndarray] = []
        for term in self.terms:
            row = np.zeros(4)
            poly = Polynomial([-term.knot, 1.0]) ** term.power
            row[: len(poly.coef)] = term.coef * poly.coef
            anchors.append(term.knot)
            rows.append(row)
        for psi in self.special_psi:
            row = psi.coef * Polynomial.fromroots(list(psi.knots)).coef
            anchors.append(psi.anchor)
            rows.append(row)
        if not rows:
            return np.zeros(0), np.zeros((0, 4))
        return np.asarray(anchors), np.vstack(rows)

    def derivative(self, order: int) -> "PiecewisePoly":
        """Derivative as a piecewise polynomial with one-sided limits at breakpoints."""
        if not 1 <= order <= 3:
            raise InvalidArgumentError(f"derivative order must be 1..3, got {order}")
        return self.to_piecewise().derivative(order)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "domain": list(self.domain),
            "base": list(self.base),
            "terms": [t.model_dump() for t in self.terms],
            "special_psi": [{"knots": list(p.knots), "coef": p.coef} for p in self.special_psi],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TruncatedPowerSpline":
        return cls(
            domain=tuple(data["domain"]),
            base=tuple(data["base"]),
            terms=tuple(TruncatedTerm(**t) for t in data.get("terms", [])),
            special_psi=tuple(
                PsiTerm(knots=tuple(p["knots"]), coef=p.get("coef", 1.0))
                for p in data.get("special_psi", [])
            ),
        )


class PiecewisePoly:
    """
    Piecewise polynomial on ascending breakpoints, backed by scipy's PPoly.

    Piece i covers [bp[i], bp[i+1]]; its coefficients are in the local variable
    x - bp[i], highest power first.
    """

    def __init__(self, ppoly: PPoly):
        self.ppoly = ppoly

    @property
    def breakpoints(self) -> np.ndarray:
        return self.ppoly.x

    @property
    def coefficients(self) -> np.ndarray:
        return self.ppoly.c

    @property
    def piece_count(self) -> int:
        return self.ppoly.c.shape[1]

    @property
    def domain(self) -> Tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def _eval_piece(self, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
        local = x - self.breakpoints[idx]
        result = np.zeros_like(local)
        for row in self.coefficients:
            result = result * local + row[idx]
        return result

    def __call__(self, x: Any) -> Any:
        arr = np.asarray(x, dtype=float)
        a, b = self.domain
        if np.any(arr < a) or np.any(arr > b):
            raise DomainError(f"evaluation outside [{a}, {b}]")
        return self.right_limit(arr) if arr.ndim else float(self.right_limit(arr))

    def left_limit(self, x: Any) -> Any:
        """Limit from the left; at the left end of the domain this is the value there."""
        arr = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.breakpoints, arr, side="left") - 1, 0, self.piece_count - 1)
        result = self._eval_piece(idx, arr)
        return result if result.ndim else float(result)

    def right_limit(self, x: Any) -> Any:
        """Limit from the right; at the right end of the domain this is the value there."""
        arr = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.breakpoints, arr, side="right") - 1, 0, self.piece_count - 1)
        result = self._eval_piece(idx, arr)
        return result if result.ndim else float(result)

    def derivative(self, order: int = 1) -> "PiecewisePoly":
        return PiecewisePoly(self.ppoly.derivative(order))

    def interior_breakpoints(self) -> np.ndarray:
        return self.breakpoints[1:-1]

    def jumps(self) -> np.ndarray:
        """right limit minus left limit at every interior breakpoint."""
        inner = self.interior_breakpoints()
        if inner.size == 0:
            return np.zeros(0)
        return np.asarray(self.right_limit(inner)) - np.asarray(self.left_limit(inner))

    def leading_slopes(self) -> np.ndarray:
        """Slope of every piece, for piecewise-linear objects (degree <= 1)."""
        c = self.coefficients
        if c.shape[0] < 2:
            return np.zeros(c.shape[1])
        if c.shape[0] > 2 and np.any(c[:-2] != 0.0):
            raise InvalidArgumentError("leading_slopes needs a piecewise-linear object")
        return c[-2].copy()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "breakpoints": self.breakpoints.tolist(),
            "coefficients": self.coefficients.T.tolist(),
        }


def taylor_shift(coeffs: np.ndarray, center: float) -> np.ndarray:
    """c0..c3 about 0 -> c0..c3 about `center`."""
    shifted = np.zeros(4)
    for k in range(4):
        shifted[k] = sum(comb(i, k, exact=True) * coeffs[i] * center ** (i - k) for i in range(k, 4))
    return shifted


def psi3(partition: Partition, j: int) -> TruncatedPowerSpline:
    """
    Psi_3(x, x_j) = (x - x_j)(x - x_{j-1})(x - x_{j-2}) chi(x, x_j), 2 <= j <= n.

    Psi_3(., x_2) is the zero function by convention.
    """
    if not 2 <= j <= partition.n:
        raise InvalidArgumentError(f"psi3 index {j} outside 2..{partition.n}")
    domain = (partition.a, partition.b)
    if j == 2:
        return TruncatedPowerSpline.zero(domain)
    x = partition.points
    return TruncatedPowerSpline(domain=domain, special_psi=(PsiTerm(knots=(x[j], x[j - 1], x[j - 2])),))


def linear_combination(
    domain: Tuple[float, float],
    items: Iterable[Tuple[float, TruncatedPowerSpline]],
    base: Optional[Polynomial] = None,
) -> TruncatedPowerSpline:
    """base + sum weight * spline, accumulated in iteration order."""
    total = TruncatedPowerSpline.zero(domain) if base is None else TruncatedPowerSpline.from_polynomial(base, domain)
    for weight, spline in items:
        if weight == 0.0:
            continue
        total = total + spline.scaled(weight)
    return total
