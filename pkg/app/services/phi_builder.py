"""
C1 smoothing functions

    phi_j(x, a, c, b) = alpha (x-a)_+^3 + beta (x-c)_+^3 + gamma (x-c)_+^2 + (1-alpha-beta) (x-b)_+^3

that coincide with Psi_3(x, x_j) outside [min(a, x_j), b].
"""

import logging
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.exceptions import InvalidArgumentError
from app.core.trunc_spline import PsiTerm, TruncatedPowerSpline, TruncatedTerm

logger = logging.getLogger(__name__)


class PhiCoefficients(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float
    beta: float
    gamma: float
    a: float = Field(..., description="Left knot")
    c: float = Field(..., description="Middle knot")
    b: float = Field(..., description="Right knot")
    anchors: Tuple[float, float, float] = Field(..., description="x_j, x_{j-1}, x_{j-2} of the replaced product")
    hat_h1: float = Field(..., description="c - a")
    hat_h2: float = Field(..., description="b - c")
    tilde_h1: float
    tilde_h2: float
    tilde_h3: float

    @property
    def tail(self) -> float:
        """Coefficient of (x - b)_+^3."""
        return 1.0 - self.alpha - self.beta

    def sign_conditions(self, tol: float = 0.0) -> Tuple[bool, bool]:
        """(0 <= alpha <= 1, 0 <= alpha + beta <= 1), each widened by tol."""
        total = self.alpha + self.beta
        return -tol <= self.alpha <= 1.0 + tol, -tol <= total <= 1.0 + tol

    @property
    def modified_interval(self) -> Tuple[float, float]:
        return min(self.a, self.anchors[0]), self.b


def phi_coefficients(a: float, c: float, b: float, xj: float, xjm1: float, xjm2: float) -> PhiCoefficients:
    """
    Closed-form alpha, beta, gamma for knots a < c < b replacing Psi_3(., x_j).

    Args:
        a, c, b: Knots of phi_j
        xj, xjm1, xjm2: x_j < x_{j-1} < x_{j-2}

    Raises:
        InvalidArgumentError: degenerate knot gaps or unordered anchors
    """
    hat_h1 = c - a
    hat_h2 = b - c
    if not (hat_h1 > 0 and hat_h2 > 0):
        logger.error(f"Degenerate phi knots a={a}, c={c}, b={b}")
        raise InvalidArgumentError(f"phi knots must satisfy a < c < b, got {a}, {c}, {b}")
    if not xj < xjm1 < xjm2:
        raise InvalidArgumentError(f"anchors must satisfy x_j < x_(j-1) < x_(j-2), got {xj}, {xjm1}, {xjm2}")

    p, q, r = b - xj, b - xjm1, b - xjm2
    tilde_h1 = p + q + r
    tilde_h2 = p * q + p * r + q * r
    tilde_h3 = p * q * r

    alpha = (tilde_h1 * hat_h2**2 - 2.0 * tilde_h2 * hat_h2 + 3.0 * tilde_h3) / (
        3.0 * hat_h1**2 * (hat_h1 + hat_h2)
    )
    beta = (
        tilde_h1 * hat_h2 * (hat_h1 + hat_h2) * (2.0 * hat_h1 - hat_h2)
        - tilde_h2 * (hat_h1**2 - 2.0 * hat_h2**2 + 2.0 * hat_h1 * hat_h2)
        - 3.0 * tilde_h3 * (hat_h2 - hat_h1)
    ) / (3.0 * hat_h1**2 * hat_h2**2)
    gamma = tilde_h1 - 3.0 * alpha * (hat_h1 + hat_h2) - 3.0 * beta * hat_h2

    return PhiCoefficients(
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        a=a,
        c=c,
        b=b,
        anchors=(xj, xjm1, xjm2),
        hat_h1=hat_h1,
        hat_h2=hat_h2,
        tilde_h1=tilde_h1,
        tilde_h2=tilde_h2,
        tilde_h3=tilde_h3,
    )


def build_phi(
    coeffs: PhiCoefficients, domain: Tuple[float, float], a: Optional[float] = None,
    c: Optional[float] = None, b: Optional[float] = None,
) -> TruncatedPowerSpline:
    """phi_j as a truncated-power spline; knots default to those stored in coeffs."""
    a = coeffs.a if a is None else a
    c = coeffs.c if c is None else c
    b = coeffs.b if b is None else b
    terms = (
        TruncatedTerm(knot=a, power=3, coef=coeffs.alpha),
        TruncatedTerm(knot=c, power=3, coef=coeffs.beta),
        TruncatedTerm(knot=c, power=2, coef=coeffs.gamma),
        TruncatedTerm(knot=b, power=3, coef=coeffs.tail),
    )
    return TruncatedPowerSpline(domain=domain, terms=terms).compact()


def make_phi(
    anchors: Tuple[float, float, float], knots: Tuple[float, float, float], domain: Tuple[float, float]
) -> Tuple[PhiCoefficients, TruncatedPowerSpline]:
    """Coefficients and spline of phi for anchors (x_j, x_{j-1}, x_{j-2}) and knots (a, c, b)."""
    coeffs = phi_coefficients(*knots, *anchors)
    return coeffs, build_phi(coeffs, domain)


def product_spline(anchors: Tuple[float, float, float], domain: Tuple[float, float]) -> TruncatedPowerSpline:
    """Psi_3(x, x_j) for explicit anchors, used to compare against phi."""
    return TruncatedPowerSpline(domain=domain, special_psi=(PsiTerm(knots=anchors),))


def phi_deviation(
    phi: TruncatedPowerSpline,
    psi: TruncatedPowerSpline,
    interval: Tuple[float, float],
    grid: int = 64,
) -> float:
    """sup |psi - phi| over grid + 1 points of the interval."""
    if grid < 64:
        raise InvalidArgumentError(f"grid must be >= 64, got {grid}")
    xs = np.linspace(interval[0], interval[1], grid + 1)
    return float(np.max(np.abs(psi(xs) - phi(xs))))
