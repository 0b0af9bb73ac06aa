"""
Unconstrained piecewise-Lagrange cubic S_3 in its three equivalent forms:

- piecewise: on [x_j, x_{j-1}) the cubic through x_j..x_{j-3} (j >= 4), and one
  cubic through x_3..x_0 on [x_3, b];
- L_3(x; x_n) + sum_{j=3}^{n-1} delta_j (x_{j-3} - x_{j+1}) Psi_3(x, x_j);
- L_2(x; x_n) + sum_{j=3}^{n} Delta_j (Psi_3(x, x_j) - Psi_3(x, x_{j-1})).
"""

import logging
from typing import Dict, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.interpolate import PPoly

from app.config.settings import DEFAULT_GRID
from app.core.divdiff import NodeValueSet, RealFunction, divided_difference, evaluate, interpolating_polynomial
from app.core.exceptions import InvalidArgumentError
from app.core.partition import Partition
from app.core.trunc_spline import PiecewisePoly, TruncatedPowerSpline, linear_combination, psi3, taylor_shift
from app.services.verify import IntervalErrorRow, interval_error_report

logger = logging.getLogger(__name__)


class DifferenceTable(BaseModel):
    """Delta_j = [x_j..x_{j-3}; f] for j = 3..n and delta_j = [x_{j+1}..x_{j-3}; f] for j = 3..n-1."""

    model_config = ConfigDict(frozen=True)

    Delta: Dict[int, float]
    delta: Dict[int, float]


class S3Spline(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    partition: Partition
    piecewise: PiecewisePoly = Field(..., description="Piecewise Lagrange form")
    form6: TruncatedPowerSpline = Field(..., description="L_3 base plus delta_j-weighted products")
    form7: TruncatedPowerSpline = Field(..., description="L_2 base plus Delta_j-weighted differences")
    differences: DifferenceTable

    def __call__(self, x):
        return self.form7(x)


def difference_table(f: RealFunction, partition: Partition) -> DifferenceTable:
    """Third and fourth divided differences over consecutive partition points."""
    x = partition.x
    fx = evaluate(f, x)
    n = partition.n
    Delta = {
        j: divided_difference(NodeValueSet(nodes=tuple(x[j - 3 : j + 1]), values=tuple(fx[j - 3 : j + 1])))
        for j in range(3, n + 1)
    }
    delta = {
        j: divided_difference(NodeValueSet(nodes=tuple(x[j - 3 : j + 2]), values=tuple(fx[j - 3 : j + 2])))
        for j in range(3, n)
    }
    return DifferenceTable(Delta=Delta, delta=delta)


def lagrange_base(f: RealFunction, partition: Partition, degree: int):
    """L_q(x; x_n; f): the polynomial through x_n, ..., x_{n-q}."""
    nodes = partition.x[partition.n - degree :]
    return interpolating_polynomial(NodeValueSet.from_function(f, nodes))


def _piecewise_form(f: RealFunction, partition: Partition) -> PiecewisePoly:
    n = partition.n
    x = partition.x
    breakpoints = [x[j] for j in range(n, 3, -1)] + [x[3], x[0]]
    coeffs = np.zeros((4, len(breakpoints) - 1))
    # ascending pieces: j = n, ..., 4 then [x_3, b]
    for idx, j in enumerate(list(range(n, 3, -1)) + [3]):
        poly = interpolating_polynomial(NodeValueSet.from_function(f, x[j - 3 : j + 1]))
        about_zero = np.zeros(4)
        about_zero[: len(poly.coef)] = poly.coef
        coeffs[:, idx] = taylor_shift(about_zero, x[j])[::-1]
    return PiecewisePoly(PPoly(coeffs, np.asarray(breakpoints), extrapolate=False))


def form6_from_differences(f: RealFunction, partition: Partition, table: DifferenceTable) -> TruncatedPowerSpline:
    domain = (partition.a, partition.b)
    x = partition.points
    items = [(table.delta[j] * (x[j - 3] - x[j + 1]), psi3(partition, j)) for j in range(3, partition.n)]
    return linear_combination(domain, items, base=lagrange_base(f, partition, 3))


def form7_from_differences(f: RealFunction, partition: Partition, table: DifferenceTable) -> TruncatedPowerSpline:
    domain = (partition.a, partition.b)
    items = [
        (table.Delta[j], psi3(partition, j) - psi3(partition, j - 1)) for j in range(3, partition.n + 1)
    ]
    return linear_combination(domain, items, base=lagrange_base(f, partition, 2))


def build_s3(f: RealFunction, partition: Partition) -> S3Spline:
    """Build S_3 for f on the partition (n >= 3)."""
    if partition.n < 3:
        raise InvalidArgumentError(f"S_3 needs n >= 3, got n={partition.n}")
    table = difference_table(f, partition)
    s3 = S3Spline(
        partition=partition,
        piecewise=_piecewise_form(f, partition),
        form6=form6_from_differences(f, partition, table),
        form7=form7_from_differences(f, partition, table),
        differences=table,
    )
    logger.info(f"Built S_3 with n={partition.n} ({s3.piecewise.piece_count} Lagrange pieces)")
    return s3


def s3_error_report(f: RealFunction, partition: Partition, grid: int = DEFAULT_GRID) -> List[IntervalErrorRow]:
    """Per-interval sup error of S_3 against omega_4(f, h_j, [x_j, x_{j-3}])."""
    if grid < 32:
        raise InvalidArgumentError(f"grid must be >= 32, got {grid}")
    s3 = build_s3(f, partition)
    return interval_error_report(f, s3.piecewise, partition, offsets=(0, 3), grid=grid)
