"""
Run orchestration behind the command line: build, the verification battery,
convergence sweeps, the constrained-vs-unconstrained comparison and the
six-point fuzz harness. Every function here returns data; printing and exit
codes belong to app.cli.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.config.settings import (
    CSV_FLOAT_FORMAT,
    DEFAULT_A,
    DEFAULT_B,
    DEFAULT_GRID,
    DEFAULT_SEED,
    ERROR_CONSTANT_ENVELOPE,
    LEMMA1_TRIALS,
    MONOTONE_TOL,
    REPRESENTATION_RTOL,
    SCREEN_SAMPLES,
    SWEEP_WORKERS,
)
from app.core.divdiff import evaluate
from app.core.partition import Partition, make_equidistant
from app.services.knot_planner import validate_admissibility
from app.services.mono_builder import MonoSpline, build_spline, gamma_sign_violations, theorem_metadata
from app.services.s3_builder import build_s3
from app.services.verify import (
    ErrorSummary,
    IntervalErrorRow,
    MonotonicityReport,
    PointwiseRow,
    check_3monotone_spline,
    check_function_3monotone,
    global_error,
    interval_error_report,
    interval_grid,
    lemma1_check,
    pointwise_report,
    representation_gap,
)
from app.utils.funcs import FunctionSpec, resolve

logger = logging.getLogger(__name__)

COMMANDS = ("build", "verify", "sweep", "compare", "lemma1", "pointwise")

# Errors below EXACT_ATOL * max(1, ||f||) count as exact reproduction
EXACT_ATOL = 1e-12

# Six-point windows use steps in [(b - a) / 64, (b - a) / 5]
LEMMA1_MIN_STEPS = 64


class RunConfig(BaseModel):
    """One command-line invocation, validated."""

    model_config = ConfigDict(frozen=True)

    command: str = Field(..., description="One of build, verify, sweep, compare, lemma1, pointwise")
    function: str = Field("exp", description="Builtin name, cubic(c3,c2,c1,c0) or an expression in x")
    a: float = DEFAULT_A
    b: float = DEFAULT_B
    n: int = Field(16, ge=1)
    n_list: Tuple[int, ...] = Field((), description="Partition sizes for sweep")
    output: Optional[str] = Field(None, description="Output directory; nothing is written when unset")
    grid: int = Field(DEFAULT_GRID, ge=32, description="Sample points per partition interval")
    tol: float = Field(MONOTONE_TOL, gt=0.0)
    seed: int = DEFAULT_SEED
    fmt: str = Field("csv", description="json or csv")
    trials: int = Field(LEMMA1_TRIALS, ge=1)

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.fmt not in ("json", "csv"):
            raise ValueError(f"format must be json or csv, got {self.fmt!r}")
        if not self.a < self.b:
            raise ValueError(f"interval must satisfy a < b, got [{self.a}, {self.b}]")
        if any(n < 1 for n in self.n_list):
            raise ValueError("every n in the sweep list must be >= 1")
        if self.command == "sweep" and len(self.n_list) < 2:
            raise ValueError("sweep needs at least two values in --n-list")
        return self


# ----- results -----


class BuildOutcome(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    function: FunctionSpec
    partition: Partition
    spline: MonoSpline
    grid: pd.DataFrame = Field(..., description="x, f, s, f_minus_s")
    intervals: List[IntervalErrorRow]
    summary: ErrorSummary
    monotonicity: MonotonicityReport
    input_screen: bool

    @property
    def max_error(self) -> float:
        return self.summary.sup_error

    def to_dict(self) -> Dict[str, Any]:
        return {
            "function": self.function.model_dump(),
            "partition": self.partition.to_dict(),
            "spline": self.spline.to_dict(),
            "summary": self.summary.model_dump(),
            "monotonicity": self.monotonicity.model_dump(by_alias=True),
            "intervals": [row.model_dump() for row in self.intervals],
            "input_screen": self.input_screen,
        }


class VerifyCheck(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class VerifyOutcome(BaseModel):
    function: FunctionSpec
    n: int
    checks: List[VerifyCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


class Lemma1Summary(BaseModel):
    function: FunctionSpec
    refused: bool = Field(False, description="The input failed the 3-monotonicity screen")
    trials: int = 0
    violations9: int = 0
    violations10: int = 0
    applicable10: int = 0
    min_slack9: Optional[float] = None
    min_slack10: Optional[float] = None
    worst_window: Optional[List[float]] = None

    @property
    def passed(self) -> bool:
        return not self.refused and self.violations9 == 0 and self.violations10 == 0


# ----- helpers -----


def _partition(cfg: RunConfig, n: Optional[int] = None) -> Partition:
    return make_equidistant(cfg.a, cfg.b, cfg.n if n is None else n)


def _scale(f: Callable, partition: Partition, grid: int) -> float:
    return max(1.0, float(np.max(np.abs(evaluate(f, interval_grid(partition, grid))))))


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def dumps(data: Any) -> str:
    """Deterministic JSON text (numpy scalars and arrays converted)."""
    return json.dumps(data, indent=2, sort_keys=True, default=_to_builtin)


def frame_to_text(frame: pd.DataFrame, fmt: str) -> str:
    if fmt == "json":
        return dumps(frame.to_dict(orient="records"))
    return frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


def write_text(output: str, name: str, text: str) -> Path:
    directory = Path(output)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / name
    path.write_text(text, encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path


# ----- build -----


def build(cfg: RunConfig) -> BuildOutcome:
    """
    Build s for the configured function and measure it.

    Raises:
        AdmissibilityError: the knot plan violates a named condition
        ExpressionSyntaxError: the function text does not parse
    """
    f, spec = resolve(cfg.function)
    partition = _partition(cfg)
    screen = check_function_3monotone(f, (cfg.a, cfg.b), samples=SCREEN_SAMPLES, seed=cfg.seed)
    if not screen:
        logger.warning(f"{cfg.function!r} fails the 3-monotonicity screen on [{cfg.a}, {cfg.b}]")

    spline = build_spline(f, partition)
    xs = interval_grid(partition, cfg.grid)
    fx = evaluate(f, xs)
    sx = np.asarray(spline(xs), dtype=float)
    grid = pd.DataFrame({"x": xs, "f": fx, "s": sx, "f_minus_s": fx - sx})

    return BuildOutcome(
        function=spec,
        partition=partition,
        spline=spline,
        grid=grid,
        intervals=interval_error_report(f, spline, partition, grid=cfg.grid),
        summary=global_error(f, spline, partition, grid=cfg.grid),
        monotonicity=check_3monotone_spline(spline.form24, tol=cfg.tol),
        input_screen=screen,
    )


def save_build(outcome: BuildOutcome, output: str) -> List[Path]:
    intervals = pd.DataFrame([row.model_dump() for row in outcome.intervals])
    return [
        write_text(output, "spline.json", dumps(outcome.to_dict()) + "\n"),
        write_text(output, "grid.csv", frame_to_text(outcome.grid, "csv")),
        write_text(output, "intervals.csv", frame_to_text(intervals, "csv")),
    ]


# ----- verify -----


def _geometry_checks(spline: MonoSpline, partition: Partition) -> List[VerifyCheck]:
    if spline.fallback or not partition.is_equidistant():
        return [VerifyCheck(name="knot_geometry", passed=True, detail="not applicable")]
    meta = theorem_metadata(spline, partition)
    return [
        VerifyCheck(
            name="knot_geometry",
            passed=meta.distances_ok and meta.gaps_ok and meta.knots_in_plan,
            detail=f"max distance {meta.max_distance!r} (<= {1.5 * meta.h!r}), min gap {meta.min_gap!r} (>= {0.5 * meta.h!r})",
        )
    ]


def verify(cfg: RunConfig) -> VerifyOutcome:
    """Run every oracle against s for the configured function and n."""
    f, spec = resolve(cfg.function)
    partition = _partition(cfg)
    domain = (cfg.a, cfg.b)
    checks: List[VerifyCheck] = []

    screen = check_function_3monotone(f, domain, samples=SCREEN_SAMPLES, seed=cfg.seed)
    checks.append(VerifyCheck(name="input_screen", passed=screen))

    spline = build_spline(f, partition)
    report = check_3monotone_spline(spline.form24, tol=cfg.tol)
    jump = report.worst_jump.jump if report.worst_jump else None
    slope = report.worst_slope.slope if report.worst_slope else None
    checks.append(VerifyCheck(name="monotonicity", passed=report.passed, detail=f"worst jump {jump!r}, worst slope {slope!r}"))
    checks.append(VerifyCheck(name="c1", passed=spline.form24.is_c1()))
    checks.extend(_geometry_checks(spline, partition))

    gap = representation_gap(spline.form23, spline.form24, domain, seed=cfg.seed)
    checks.append(VerifyCheck(name="representation", passed=gap <= REPRESENTATION_RTOL, detail=f"relative gap {gap!r}"))

    if partition.n >= 3:
        s3 = build_s3(f, partition)
        gap3 = max(
            representation_gap(s3.piecewise, s3.form6, domain, seed=cfg.seed),
            representation_gap(s3.piecewise, s3.form7, domain, seed=cfg.seed),
        )
        checks.append(VerifyCheck(name="s3_representation", passed=gap3 <= REPRESENTATION_RTOL, detail=f"relative gap {gap3!r}"))

    scale = _scale(f, partition, cfg.grid)
    ends = max(abs(float(spline(cfg.a)) - float(evaluate(f, cfg.a))), abs(float(spline(cfg.b)) - float(evaluate(f, cfg.b))))
    checks.append(VerifyCheck(name="endpoint_interpolation", passed=ends <= REPRESENTATION_RTOL * scale, detail=f"{ends!r}"))

    summary = global_error(f, spline, partition, grid=cfg.grid)
    checks.append(VerifyCheck(
        name="error_ratio", passed=summary.ratio <= ERROR_CONSTANT_ENVELOPE,
        detail=f"||f - s|| = {summary.sup_error!r}, omega4 = {summary.omega4!r}, ratio {summary.ratio!r}",
    ))

    if not spline.fallback:
        admissibility = validate_admissibility(f, spline.table, spline.plan, partition)
        failure = admissibility.first_failure
        checks.append(VerifyCheck(
            name="admissibility", passed=admissibility.passed,
            detail="" if failure is None else f"{failure.name} at {failure.index}: {failure.detail}",
        ))
        bad = gamma_sign_violations(spline)
        checks.append(VerifyCheck(name="gamma_signs", passed=not bad, detail=f"{bad}" if bad else ""))

    outcome = VerifyOutcome(function=spec, n=partition.n, checks=checks)
    logger.info(f"Verification of {cfg.function!r}, n={partition.n}: {'PASS' if outcome.passed else 'FAIL'}")
    return outcome


# ----- sweep -----


def _order(previous: Tuple[int, float], current: Tuple[int, float], floor: float) -> str:
    (n0, e0), (n1, e1) = previous, current
    if e0 <= floor and e1 <= floor:
        return "exact"
    if e1 <= floor:
        return "inf"
    return repr(float(np.log(e0 / e1) / np.log(n1 / n0)))


def sweep(cfg: RunConfig) -> pd.DataFrame:
    """
    ||f - s|| against omega_4(f, h, [a, b]) for every n of the list, with the
    empirical order between consecutive rows. Rows are in list order.
    """
    f, _ = resolve(cfg.function)

    def row(n: int) -> ErrorSummary:
        partition = _partition(cfg, n)
        return global_error(f, build_spline(f, partition), partition, grid=cfg.grid)

    with ThreadPoolExecutor(max_workers=SWEEP_WORKERS) as executor:
        rows = list(executor.map(row, cfg.n_list))

    floor = EXACT_ATOL * _scale(f, _partition(cfg, max(cfg.n_list)), cfg.grid)
    orders = [""] + [
        _order((p.n, p.sup_error), (c.n, c.sup_error), floor) for p, c in zip(rows[:-1], rows[1:])
    ]
    frame = pd.DataFrame([r.model_dump() for r in rows])
    frame["order"] = orders
    logger.info(f"Sweep of {cfg.function!r} over n={list(cfg.n_list)} done")
    return frame


def fitted_order(frame: pd.DataFrame) -> Optional[float]:
    """Least-squares slope of log error against log n, None when any error is at the floor."""
    errors = frame["sup_error"].to_numpy(dtype=float)
    if np.any(errors <= 0.0) or np.any(frame["order"].isin(["exact", "inf"])):
        return None
    slope, _ = np.polyfit(np.log(frame["n"].to_numpy(dtype=float)), np.log(errors), 1)
    return float(-slope)


# ----- compare -----


def compare(cfg: RunConfig) -> pd.DataFrame:
    """Sup error and 3-monotonicity verdict of S_3 and of s on the same partition."""
    f, _ = resolve(cfg.function)
    partition = _partition(cfg)
    spline = build_spline(f, partition)
    candidates = [("S3", build_s3(f, partition).form7), ("s", spline.form24)]

    records = []
    for method, approximant in candidates:
        summary = global_error(f, approximant, partition, grid=cfg.grid)
        report = check_3monotone_spline(approximant, tol=cfg.tol)
        records.append({
            "method": method,
            "n": partition.n,
            "sup_error": summary.sup_error,
            "omega4": summary.omega4,
            "ratio": summary.ratio,
            "monotone": "PASS" if report.passed else "FAIL",
        })
    return pd.DataFrame(records)


# ----- six-point fuzz -----


def random_windows(a: float, b: float, trials: int, seed: int) -> np.ndarray:
    """trials x 6 equidistant points in [a, b], descending within each row."""
    rng = np.random.default_rng(seed)
    length = b - a
    steps = rng.uniform(length / LEMMA1_MIN_STEPS, length / 5.0, size=trials)
    starts = a + rng.uniform(0.0, 1.0, size=trials) * (length - 5.0 * steps)
    windows = np.minimum(starts[:, None] + steps[:, None] * np.arange(6), b)
    return windows[:, ::-1]


def lemma1_fuzz(cfg: RunConfig) -> Lemma1Summary:
    """Check the six-point inequalities on random equidistant windows; refuses inputs that fail the screen."""
    f, spec = resolve(cfg.function)
    if not check_function_3monotone(f, (cfg.a, cfg.b), samples=SCREEN_SAMPLES, seed=cfg.seed):
        logger.warning(f"Refusing {cfg.function!r}: not 3-monotone on [{cfg.a}, {cfg.b}]")
        return Lemma1Summary(function=spec, refused=True)

    violations9 = violations10 = applicable10 = 0
    min9: Optional[float] = None
    min10: Optional[float] = None
    worst: Optional[List[float]] = None
    for six in random_windows(cfg.a, cfg.b, cfg.trials, cfg.seed):
        result = lemma1_check(f, six)
        if not result.ineq9:
            violations9 += 1
            worst = six.tolist()
        min9 = result.slack9 if min9 is None else min(min9, result.slack9)
        if result.ineq10 is not None:
            applicable10 += 1
            min10 = result.slack10 if min10 is None else min(min10, result.slack10)
            if not result.ineq10:
                violations10 += 1
                worst = six.tolist()

    summary = Lemma1Summary(
        function=spec,
        trials=cfg.trials,
        violations9=violations9,
        violations10=violations10,
        applicable10=applicable10,
        min_slack9=min9,
        min_slack10=min10,
        worst_window=worst,
    )
    logger.info(f"Six-point fuzz of {cfg.function!r}: {violations9} + {violations10} violations in {cfg.trials} trials")
    return summary


# ----- pointwise experiment -----


def pointwise(cfg: RunConfig) -> List[PointwiseRow]:
    """Informational pointwise ratios on [-1, 1]."""
    f, _ = resolve(cfg.function)
    partition = _partition(cfg)
    return pointwise_report(f, build_spline(f, partition), partition)
