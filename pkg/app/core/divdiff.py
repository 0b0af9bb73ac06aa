"""
Scalar kernel: divided differences, Newton/Lagrange interpolation, the
brute-force modulus of smoothness and the Whitney interpolation cubic.
"""

import logging
from typing import Callable, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import comb

from app.config.settings import MODULUS_SHIFTS, MODULUS_STEPS, NODE_SEPARATION_RTOL
from app.core.exceptions import DomainError, InvalidArgumentError

logger = logging.getLogger(__name__)

RealFunction = Callable[[np.ndarray], np.ndarray]
ArrayLike = Union[float, Sequence[float], np.ndarray]


def evaluate(f: RealFunction, x: ArrayLike) -> np.ndarray:
    """
    Evaluate f on an array of any shape.

    Vectorised callables are called once; scalar-only callables fall back to
    np.vectorize. Non-finite results are reported as a DomainError.
    """
    arr = np.asarray(x, dtype=float)
    try:
        with np.errstate(all="ignore"):
            values = np.asarray(f(arr), dtype=float)
    except DomainError:
        raise
    except (TypeError, ValueError):
        values = None
    if values is None or values.shape != arr.shape:
        values = np.vectorize(lambda t: float(f(float(t))), otypes=[float])(arr)
    if not np.all(np.isfinite(values)):
        bad = arr[~np.isfinite(values)].ravel()
        logger.error(f"Non-finite function values at {bad[:5]}")
        raise DomainError(f"function is not finite at x={float(bad[0])!r}")
    return values


class NodeValueSet(BaseModel):
    """Distinct nodes t_0..t_k with values g(t_i)."""

    model_config = ConfigDict(frozen=True)

    nodes: Tuple[float, ...] = Field(..., description="Pairwise distinct nodes, any order")
    values: Tuple[float, ...] = Field(..., description="Function values at the nodes")

    @model_validator(mode="after")
    def _check(self) -> "NodeValueSet":
        if not self.nodes:
            raise InvalidArgumentError("at least one node is required")
        if len(self.nodes) != len(self.values):
            raise InvalidArgumentError(
                f"{len(self.nodes)} nodes but {len(self.values)} values"
            )
        ordered = np.sort(np.asarray(self.nodes, dtype=float))
        if ordered.size > 1:
            span = ordered[-1] - ordered[0]
            gap = float(np.min(np.diff(ordered)))
            if gap <= NODE_SEPARATION_RTOL * span:
                raise InvalidArgumentError(f"nodes are not distinct (minimum gap {gap:g})")
        return self

    @classmethod
    def from_function(cls, g: RealFunction, nodes: ArrayLike) -> "NodeValueSet":
        t = np.atleast_1d(np.asarray(nodes, dtype=float))
        return cls(nodes=tuple(t.tolist()), values=tuple(evaluate(g, t).tolist()))

    def sorted_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """Nodes and values sorted by node; the table is built in this order."""
        t = np.asarray(self.nodes, dtype=float)
        v = np.asarray(self.values, dtype=float)
        order = np.argsort(t, kind="stable")
        return t[order], v[order]


def divided_difference_table(nodes: np.ndarray, values: np.ndarray) -> np.ndarray:
    """
    Recursive table: column m holds the m-th order differences
    [t_i, ..., t_{i+m}; g] in row i.
    """
    size = len(nodes)
    table = np.zeros((size, size))
    table[:, 0] = values
    for m in range(1, size):
        for i in range(size - m):
            table[i, m] = (table[i + 1, m - 1] - table[i, m - 1]) / (nodes[i + m] - nodes[i])
    return table


def newton_coefficients(nv: NodeValueSet) -> Tuple[np.ndarray, np.ndarray]:
    """Sorted nodes and the Newton coefficients [t_0; g], [t_0, t_1; g], ..."""
    t, v = nv.sorted_arrays()
    return t, divided_difference_table(t, v)[0, :].copy()


def divided_difference(nv: NodeValueSet) -> float:
    """[t_0, ..., t_k; g]; nodes are sorted first so the result is order independent."""
    _, coeffs = newton_coefficients(nv)
    return float(coeffs[-1])


def divided_difference_of(g: RealFunction, nodes: ArrayLike) -> float:
    return divided_difference(NodeValueSet.from_function(g, nodes))


def lagrange_eval(nv: NodeValueSet, x: ArrayLike) -> Union[float, np.ndarray]:
    """Value of the interpolating polynomial through nv, by Horner on the Newton form."""
    t, coeffs = newton_coefficients(nv)
    arr = np.asarray(x, dtype=float)
    result = np.full(arr.shape, coeffs[-1])
    for i in range(len(coeffs) - 2, -1, -1):
        result = result * (arr - t[i]) + coeffs[i]
    if result.ndim == 0:
        return float(result)
    return result


def interpolating_polynomial(nv: NodeValueSet) -> Polynomial:
    """The interpolant as a numpy Polynomial in the power basis about 0."""
    t, coeffs = newton_coefficients(nv)
    poly = Polynomial([coeffs[-1]])
    for i in range(len(coeffs) - 2, -1, -1):
        poly = poly * Polynomial([-t[i], 1.0]) + coeffs[i]
    return poly


def modulus_value(
    f: RealFunction,
    k: int,
    t: float,
    lo: float,
    hi: float,
    steps: int = MODULUS_STEPS,
    shifts: int = MODULUS_SHIFTS,
) -> float:
    """
    Brute-force sup of |Delta_u^k f(x)| over u in (0, t] and x, x + k u in [lo, hi].

    The step grid is u_i = t i / steps (the endpoint t is included); for each
    step the positions are shifts + 1 equally spaced points of [lo, hi - k u].
    A step bound larger than (hi - lo) / k is clamped.
    """
    if k < 1:
        raise InvalidArgumentError(f"modulus order must be >= 1, got {k}")
    if not lo < hi:
        raise InvalidArgumentError(f"degenerate interval [{lo}, {hi}]")
    if t < 0:
        raise InvalidArgumentError(f"step bound must be >= 0, got {t}")
    t = min(t, (hi - lo) / k)
    if t <= 0:
        return 0.0

    u = t * np.arange(1, steps + 1) / steps
    frac = np.linspace(0.0, 1.0, shifts + 1)
    starts = lo + np.outer(hi - lo - k * u, frac)
    starts = np.minimum(starts, (hi - k * u)[:, None])

    weights = [(-1) ** (k - m) * comb(k, m, exact=True) for m in range(k + 1)]
    total = np.zeros_like(starts)
    for m, w in enumerate(weights):
        points = np.minimum(starts + m * u[:, None], hi)
        total += w * evaluate(f, points)
    return float(np.max(np.abs(total)))


def whitney_cubic(g: RealFunction, a: float, b: float) -> Polynomial:
    """Cubic l_3 interpolating g at a, a + (b - a)/3, b - (b - a)/3 and b."""
    if not a < b:
        raise InvalidArgumentError(f"need a < b, got a={a}, b={b}")
    third = (b - a) / 3.0
    nodes = np.array([a, a + third, b - third, b])
    return interpolating_polynomial(NodeValueSet.from_function(g, nodes))


def whitney_defect(g: RealFunction, a: float, b: float, grid: int) -> float:
    """
    max |g - l_3| over a grid of [a, b] minus omega_4(g, (b - a)/4, [a, b]).

    A nonpositive value certifies the Whitney inequality on that grid.
    """
    if grid < 16:
        raise InvalidArgumentError(f"grid must be >= 16, got {grid}")
    l3 = whitney_cubic(g, a, b)
    xs = np.linspace(a, b, grid + 1)
    error = float(np.max(np.abs(evaluate(g, xs) - l3(xs))))
    omega = modulus_value(g, 4, (b - a) / 4.0, a, b)
    logger.debug(f"Whitney on [{a}, {b}]: error={error:.3e}, omega4={omega:.3e}")
    return error - omega
