"""
Command-line interface for the tri-monotone spline toolkit.

Usage:
    trispline build -f "exp(x)" -a -1 -b 1 -n 16 -o out/   # build s, write JSON and CSV
    trispline verify -f x2sign -n 32                         # run every oracle
    trispline sweep -f exp --n-list 8,16,32,64               # convergence table
    trispline compare -f x2sign -n 16                        # S_3 against s
    trispline lemma1 -f "x^3" --trials 10000                 # six-point fuzz

Expressions use x, numbers, + - * / ^, parentheses and exp, abs, sign,
min, max, sinh. Builtins: exp, sinh, x2sign, xplus3, quartic, twokinks,
negcubic and cubic(c3,c2,c1,c0).

Exit codes: 0 success, 1 admissibility or verification failure, 2 usage or
parse error.
"""

import logging
import sys
from contextlib import contextmanager
from typing import Iterator, Optional, Tuple

import click
import pandas as pd
from colorama import Fore, Style
from colorama import init as colorama_init
from pydantic import ValidationError

from app.config.settings import DEFAULT_A, DEFAULT_B, DEFAULT_GRID, DEFAULT_SEED, LEMMA1_TRIALS, LOG_FORMAT, LOG_LEVEL, MONOTONE_TOL
from app.core.exceptions import AdmissibilityError, DomainError, ExpressionSyntaxError, InvalidArgumentError
from app.services import spline_service
from app.services.spline_service import RunConfig

__all__ = [
    "cli",
]

logger = logging.getLogger(__name__)

FUNCTION_HINT = "'-f' / '--function'"


def verdict(passed: bool) -> str:
    """PASS in green or FAIL in red (colour is dropped when stdout is not a terminal)."""
    if passed:
        return f"{Fore.GREEN}PASS{Style.RESET_ALL}"
    return f"{Fore.RED}FAIL{Style.RESET_ALL}"


def parse_n_list(ctx: click.Context, param: click.Parameter, value: Optional[str]) -> Tuple[int, ...]:
    if value is None:
        return ()
    try:
        values = tuple(int(part) for part in value.split(",") if part.strip())
    except ValueError:
        raise click.BadParameter(f"expected comma separated integers, got {value!r}")
    if any(n < 1 for n in values):
        raise click.BadParameter("every n must be >= 1")
    return values


@contextmanager
def exit_codes() -> Iterator[None]:
    """Map package errors to click usage errors (exit 2) or exit 1."""
    try:
        yield
    except ExpressionSyntaxError as e:
        raise click.BadParameter(str(e), param_hint=FUNCTION_HINT)
    except DomainError as e:
        raise click.BadParameter(str(e), param_hint=FUNCTION_HINT)
    except (InvalidArgumentError, ValidationError) as e:
        raise click.UsageError(str(e))
    except AdmissibilityError as e:
        logger.error(f"Admissibility failure: {e}")
        click.echo(f"Error: {e}", err=True)
        sys.exit(1)


def make_config(command: str, **options) -> RunConfig:
    try:
        return RunConfig(command=command, **options)
    except ValidationError as e:
        messages = "; ".join(err["msg"] for err in e.errors())
        raise click.UsageError(messages)


def emit_table(frame: pd.DataFrame, fmt: str, output: Optional[str], name: str) -> None:
    text = spline_service.frame_to_text(frame, fmt)
    click.echo(text, nl=False)
    if output:
        spline_service.write_text(output, f"{name}.{fmt}", text)


def function_option(default: str = "exp"):
    return click.option("-f", "--function", "function", default=default, show_default=True,
                        help="Builtin name, cubic(c3,c2,c1,c0) or an expression in x")


def common_options(command):
    """-a, -b, --grid, --tol, --seed, --format and -o shared by every subcommand."""
    options = [
        click.option("-a", "a", type=float, default=DEFAULT_A, show_default=True, help="Left endpoint"),
        click.option("-b", "b", type=float, default=DEFAULT_B, show_default=True, help="Right endpoint"),
        click.option("-o", "--output", type=click.Path(file_okay=False), default=None, help="Output directory"),
        click.option("--grid", type=click.IntRange(min=32), default=DEFAULT_GRID, show_default=True,
                     help="Sample points per partition interval"),
        click.option("--tol", type=float, default=MONOTONE_TOL, show_default=True, help="Monotonicity tolerance"),
        click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True, help="Seed for randomized checks"),
        click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True,
                     help="Format of tables on stdout and in -o"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


n_option = click.option("-n", "n", type=click.IntRange(min=1), default=16, show_default=True,
                        help="Number of partition intervals")


@click.group()
@click.version_option(version="0.1.0", prog_name="trispline")
@click.option("--log-level", default=LOG_LEVEL, show_default=True, help="Logging level (logs go to stderr)")
def cli(log_level: str):
    """
    Shape-preserving cubic spline approximation of 3-monotone functions.

    Examples:

        trispline build -f "exp(x)" -n 16 -o out/

        trispline sweep -f exp --n-list 8,16,32,64

        trispline lemma1 -f "x^3"
    """
    logging.basicConfig(
        level=getattr(logging, log_level.upper(), logging.WARNING),
        format=LOG_FORMAT,
        stream=sys.stderr,
    )
    colorama_init()


@cli.command()
@function_option()
@n_option
@common_options
def build(function: str, n: int, **options):
    """
    Build s and report its error and 3-monotonicity.

    With -o the directory receives spline.json, grid.csv (x, f, s, f - s)
    and intervals.csv (per-interval ratios).
    """
    with exit_codes():
        cfg = make_config("build", function=function, n=n, **options)
        outcome = spline_service.build(cfg)
        if cfg.output:
            spline_service.save_build(outcome, cfg.output)

    summary = outcome.summary
    click.echo(f"function: {cfg.function}  n={summary.n}  h={summary.h!r}")
    if outcome.spline.fallback:
        click.echo("n <= 4: s is the Whitney cubic")
    if not outcome.input_screen:
        click.echo(f"{Fore.YELLOW}warning{Style.RESET_ALL}: input fails the 3-monotonicity screen")
    click.echo(f"max error: {summary.sup_error!r}")
    click.echo(f"omega4(f, h): {summary.omega4!r}  ratio: {summary.ratio!r}")
    intervals = pd.DataFrame([row.model_dump() for row in outcome.intervals])
    click.echo(intervals.to_string(index=False))
    click.echo(f"3-monotone: {verdict(outcome.monotonicity.passed)}")
    if not outcome.monotonicity.passed:
        sys.exit(1)


@cli.command()
@function_option()
@n_option
@common_options
def verify(function: str, n: int, **options):
    """Run every oracle on s; exit 1 if any check fails."""
    with exit_codes():
        cfg = make_config("verify", function=function, n=n, **options)
        outcome = spline_service.verify(cfg)

    for check in outcome.checks:
        detail = f"  {check.detail}" if check.detail else ""
        click.echo(f"{check.name:<24} {verdict(check.passed)}{detail}")
    if cfg.output:
        spline_service.write_text(cfg.output, "verify.json", spline_service.dumps(outcome.model_dump()) + "\n")
    click.echo(f"overall: {verdict(outcome.passed)}")
    if not outcome.passed:
        sys.exit(1)


@cli.command()
@function_option()
@click.option("--n-list", "n_list", callback=parse_n_list, required=True,
              help="Comma separated partition sizes, e.g. 8,16,32,64")
@common_options
def sweep(function: str, n_list: Tuple[int, ...], **options):
    """Convergence table: n, h, sup_error, omega4, ratio, order."""
    with exit_codes():
        cfg = make_config("sweep", function=function, n_list=n_list, **options)
        frame = spline_service.sweep(cfg)
    emit_table(frame, cfg.fmt, cfg.output, "sweep")
    fitted = spline_service.fitted_order(frame)
    if fitted is not None:
        click.echo(f"fitted order: {fitted:.3f}", err=True)


@cli.command()
@function_option()
@n_option
@common_options
def compare(function: str, n: int, **options):
    """Sup error and 3-monotonicity of the unconstrained S_3 against s."""
    with exit_codes():
        cfg = make_config("compare", function=function, n=n, **options)
        frame = spline_service.compare(cfg)
    emit_table(frame, cfg.fmt, cfg.output, "compare")


@cli.command()
@function_option()
@click.option("--trials", type=click.IntRange(min=1), default=LEMMA1_TRIALS, show_default=True,
              help="Number of random six-point windows")
@common_options
def lemma1(function: str, trials: int, **options):
    """Check the six-point divided-difference inequalities on random equidistant windows."""
    with exit_codes():
        cfg = make_config("lemma1", function=function, trials=trials, **options)
        summary = spline_service.lemma1_fuzz(cfg)

    if summary.refused:
        click.echo(f"refused: input not 3-monotone on [{cfg.a}, {cfg.b}]", err=True)
        sys.exit(1)
    if cfg.output:
        spline_service.write_text(cfg.output, "lemma1.json", spline_service.dumps(summary.model_dump()) + "\n")
    click.echo(f"trials: {summary.trials}")
    click.echo(f"upper bound violations: {summary.violations9}  min slack: {summary.min_slack9!r}")
    click.echo(
        f"lower bound violations: {summary.violations10} of {summary.applicable10} applicable"
        f"  min slack: {summary.min_slack10!r}"
    )
    click.echo(f"verdict: {verdict(summary.passed)}")
    if not summary.passed:
        sys.exit(1)


@cli.command()
@function_option()
@n_option
@common_options
def pointwise(function: str, n: int, **options):
    """Pointwise |f - s|(x) / omega_4(f, 1/n^2 + sqrt(1 - x^2)/n) on [-1, 1]; informational only."""
    with exit_codes():
        cfg = make_config("pointwise", function=function, n=n, **options)
        rows = spline_service.pointwise(cfg)
    emit_table(pd.DataFrame([row.model_dump() for row in rows]), cfg.fmt, cfg.output, "pointwise")


if __name__ == "__main__":
    cli()
