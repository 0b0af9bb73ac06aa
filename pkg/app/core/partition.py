"""
Partition of [a, b] in the descending index convention

    a = x_n < x_{n-1} < ... < x_1 < x_0 = b,   I_j = [x_j, x_{j-1}],   h_j = x_{j-1} - x_j.

The public constructors accept ascending data; all formulas inside the package
use the descending indices so they read exactly like the construction.
"""

import logging
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.config.settings import EQUIDISTANT_RTOL
from app.core.exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)


class Partition(BaseModel):
    """Points x_0 > x_1 > ... > x_n of [a, b]; immutable once built."""

    model_config = ConfigDict(frozen=True)

    a: float = Field(..., description="Left endpoint, equal to x_n")
    b: float = Field(..., description="Right endpoint, equal to x_0")
    points: Tuple[float, ...] = Field(..., description="x_0 ... x_n in descending order")

    @model_validator(mode="after")
    def _check_points(self) -> "Partition":
        if len(self.points) < 2:
            raise InvalidArgumentError("a partition needs at least two points")
        if self.points[0] != self.b or self.points[-1] != self.a:
            raise InvalidArgumentError(
                f"endpoints mismatch: x_0={self.points[0]}, b={self.b}, x_n={self.points[-1]}, a={self.a}"
            )
        gaps = -np.diff(np.asarray(self.points, dtype=float))
        if not np.all(gaps > 0):
            raise InvalidArgumentError("partition points must be strictly decreasing (x_0 = b first)")
        return self

    @property
    def n(self) -> int:
        return len(self.points) - 1

    @property
    def x(self) -> np.ndarray:
        """Points as a float array indexed by the descending index j."""
        return np.asarray(self.points, dtype=float)

    @property
    def length(self) -> float:
        return self.b - self.a

    def h(self, j: int) -> float:
        """Mesh size h_j = x_{j-1} - x_j of I_j, j = 1..n."""
        if not 1 <= j <= self.n:
            raise InvalidArgumentError(f"interval index {j} outside 1..{self.n}")
        return self.points[j - 1] - self.points[j]

    @property
    def mesh_sizes(self) -> np.ndarray:
        """Array of h_1 ... h_n."""
        return -np.diff(self.x)

    @property
    def max_mesh(self) -> float:
        return float(np.max(self.mesh_sizes))

    def interval(self, j: int) -> Tuple[float, float]:
        """I_j = [x_j, x_{j-1}]."""
        self.h(j)
        return self.points[j], self.points[j - 1]

    def clamp(self, nu: int) -> float:
        """x_nu with the conventions x_nu = a for nu > n and x_nu = b for nu < 0."""
        if nu > self.n:
            return self.a
        if nu < 0:
            return self.b
        return self.points[nu]

    def ascending(self) -> List[float]:
        return list(reversed(self.points))

    def is_equidistant(self, rtol: float = EQUIDISTANT_RTOL) -> bool:
        target = self.length / self.n
        return bool(np.all(np.abs(self.mesh_sizes - target) <= rtol * self.length))

    def to_dict(self) -> Dict[str, Any]:
        return {"a": self.a, "b": self.b, "points_ascending": self.ascending()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Partition":
        partition = make_custom(data["points_ascending"])
        if partition.a != data.get("a", partition.a) or partition.b != data.get("b", partition.b):
            raise InvalidArgumentError("endpoints in payload disagree with points_ascending")
        return partition


def make_equidistant(a: float, b: float, n: int) -> Partition:
    """
    Build the equidistant partition x_j = b - j (b - a) / n.

    Args:
        a: Left endpoint
        b: Right endpoint, must exceed a
        n: Number of intervals, at least 1

    Returns:
        Partition with x_0 = b and x_n = a exactly
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n}")
    if not a < b:
        raise InvalidArgumentError(f"need a < b, got a={a}, b={b}")
    ascending = np.linspace(a, b, n + 1)
    ascending[0], ascending[-1] = a, b
    partition = Partition(a=float(a), b=float(b), points=tuple(float(v) for v in ascending[::-1]))
    if not partition.is_equidistant():
        raise InvalidArgumentError(f"rounding broke equidistance for a={a}, b={b}, n={n}")
    logger.debug(f"Equidistant partition of [{a}, {b}] with n={n}")
    return partition


def make_custom(points_ascending: Sequence[float]) -> Partition:
    """Build a partition from strictly increasing points a = t_0 < ... < t_n = b."""
    values = [float(v) for v in points_ascending]
    if len(values) < 2:
        raise InvalidArgumentError("need at least two points")
    if any(not np.isfinite(v) for v in values):
        raise InvalidArgumentError("partition points must be finite")
    if any(right <= left for left, right in zip(values, values[1:])):
        raise InvalidArgumentError(f"points must be strictly increasing: {values}")
    return Partition(a=values[0], b=values[-1], points=tuple(reversed(values)))
