"""Command line interface for ctmcrand."""

import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import NoReturn, Optional, Tuple

import click
from rich.console import Console
from rich.logging import RichHandler

from ctmcrand import __version__
from ctmcrand.app import App
from ctmcrand.config import Config, PrecisionConfig
from ctmcrand.sojourn import BoundaryAmbiguous

logger = logging.getLogger(__name__)

EXIT_FAILED = 1
EXIT_INPUT = 2
EXIT_AMBIGUOUS = 3


def _setup_logging(level: str) -> None:
    handler = RichHandler(console=Console(stderr=True), show_path=False, show_time=False)
    logging.basicConfig(level=level.upper(), format="%(message)s", handlers=[handler], force=True)


def _fail(action: str, e: Exception) -> NoReturn:
    """Report ``e`` on stderr and exit with its code."""
    click.echo(f"Error {action}: {e}", err=True)
    sys.exit(EXIT_AMBIGUOUS if isinstance(e, BoundaryAmbiguous) else EXIT_INPUT)


def _q(value: Fraction) -> str:
    return str(Fraction(value))


def _app(ctx: click.Context) -> App:
    return App(ctx.obj["config"])


@click.group()
@click.version_option(version=__version__)
@click.option(
    "--config", "config_path",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Configuration file (default: user config dir or $CTMCRAND_CONFIG)"
)
@click.option(
    "--precision",
    type=click.IntRange(min=1),
    help="Working precision of enclosures, in bits"
)
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    help="Logging level on stderr"
)
@click.pass_context
def cli(
    ctx: click.Context,
    config_path: Optional[Path],
    precision: Optional[int],
    log_level: Optional[str],
) -> None:
    """ctmcrand - algorithmic randomness for continuous-time Markov chains."""
    ctx.ensure_object(dict)
    try:
        config = Config.load(config_path)
        # Flags override the file
        if precision is not None:
            config.precision = PrecisionConfig(
                precision, max(precision, config.precision.max_bits)
            )
        if log_level:
            config.log_level = log_level
    except (ValueError, OSError) as e:
        _fail("loading configuration", e)
    _setup_logging(config.log_level)
    ctx.obj["config"] = config


@cli.command()
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def parse(ctx: click.Context, model: str) -> None:
    """Validate a model file and summarize it."""
    try:
        summary = _app(ctx).parse_model(model)
    except Exception as e:
        _fail("parsing model", e)
    click.echo(f"model={summary.path}")
    click.echo(f"kind={summary.kind}")
    click.echo(f"fingerprint={summary.fingerprint}")
    if summary.species:
        click.echo(f"species={','.join(summary.species)}")
    if summary.states is not None:
        click.echo(f"states={','.join(summary.states)}")
    click.echo(f"reactions={len(summary.reactions)}")
    for line in summary.reactions:
        click.echo(f"reaction={line}")
    for state, weight in summary.initial:
        click.echo(f"init={state}:{_q(weight)}")
    for state in summary.terminal:
        click.echo(f"terminal={state}")


@cli.command()
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=click.IntRange(min=0), required=True, help="Root seed")
@click.option("--events", type=click.IntRange(min=0), default=10_000, show_default=True,
              help="Maximum number of reactions fired")
@click.option("--time", "max_time", type=click.FloatRange(min=0), help="Time limit")
@click.option("--depth", type=click.IntRange(min=0), default=0, show_default=True,
              help="Bits stored per sojourn")
@click.option("--runs", type=click.IntRange(min=1), default=1, show_default=True,
              help="Number of trajectories, one child stream each")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path),
              help="Output file; run i of several goes to NAME.i.SUFFIX")
@click.pass_context
def simulate(
    ctx: click.Context,
    model: str,
    seed: int,
    events: int,
    max_time: Optional[float],
    depth: int,
    runs: int,
    out: Optional[Path],
) -> None:
    """Simulate trajectories with the exact stochastic simulation algorithm."""
    try:
        files = _app(ctx).simulate(model, seed, events, max_time, depth, runs)
        if out is None:
            for text in files:
                click.echo(text, nl=False)
            return
        for i, text in enumerate(files):
            target = out if runs == 1 else out.with_name(f"{out.stem}.{i}{out.suffix}")
            target.write_text(text, encoding="utf-8")
            click.echo(f"wrote={target}")
    except Exception as e:
        _fail("simulating", e)


@cli.command()
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.argument("spec")
@click.pass_context
def measure(ctx: click.Context, model: str, spec: str) -> None:
    """Exact measure of the trajectories a spec names (``q:bits/q:bits``)."""
    try:
        result = _app(ctx).measure(model, spec)
    except Exception as e:
        _fail("measuring", e)
    click.echo(f"spec={result.spec.render() or '()'}")
    click.echo(f"weight={_q(result.weight)}")
    click.echo(f"charged_bits={result.charged_bits}")
    click.echo(f"mu={_q(result.measure)}")


@cli.command()
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.argument("trajectory", type=click.Path(exists=True, dir_okay=False))
@click.option("--martingale", "selector", required=True, help="NAME:key=value:...")
@click.option("--depth", type=click.IntRange(min=0),
              help="Re-encode every sojourn at this many bits")
@click.option("--alpha", default="1", show_default=True, help="Success threshold")
@click.pass_context
def bet(
    ctx: click.Context, model: str, trajectory: str, selector: str, depth: Optional[int],
    alpha: str
) -> None:
    """Run a martingale along an encoded trajectory."""
    try:
        trace = _app(ctx).bet(model, trajectory, selector, depth)
        success = trace.success_at(Fraction(alpha))
    except Exception as e:
        _fail("betting", e)
    for i, capital in enumerate(trace.capitals):
        click.echo(f"step={i} capital={_q(capital)}")
    click.echo(f"final={_q(trace.final)}")
    click.echo(f"peak={_q(trace.peak)}")
    for k, i in trace.crossings():
        click.echo(f"crossing k={k} step={i}")
    click.echo(f"success={'yes' if success else 'no'} alpha={alpha}")


@cli.command()
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.option("--martingale", "selectors", multiple=True, required=True,
              help="NAME:key=value:... (repeatable)")
@click.option("--depth", type=click.IntRange(min=0), help="Largest spec size checked")
@click.pass_context
def verify(
    ctx: click.Context, model: str, selectors: Tuple[str, ...], depth: Optional[int]
) -> None:
    """Check the fairness equations of martingales; exit 1 on any residual."""
    app = _app(ctx)
    failed = False
    for selector in selectors:
        try:
            d, report = app.verify(model, selector, depth)
        except Exception as e:
            _fail(f"verifying {selector}", e)
        click.echo(
            f"martingale={d.name} kind={report.kind.value} depth={report.depth} "
            f"nodes={report.nodes_checked} conditions={report.conditions_checked} "
            f"max_residual={_q(report.max_abs)} passed={'yes' if report.passed else 'no'}"
        )
        for residual in report.residuals:
            click.echo(
                f"residual node={residual.node} condition={residual.condition} "
                f"value={_q(residual.value)}"
            )
        failed = failed or not report.passed
    if failed:
        sys.exit(EXIT_FAILED)


@cli.command("cover-check")
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.argument("cover", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def cover_check(ctx: click.Context, model: str, cover: str) -> None:
    """Check that every stored cover level k has measure at most 2^-k."""
    try:
        report = _app(ctx).cover_check(model, cover)
    except Exception as e:
        _fail("checking cover", e)
    for row in report.rows:
        click.echo(
            f"k={row.k} specs={row.count} total={_q(row.total)} bound={_q(row.bound)} "
            f"passed={'yes' if row.passed else 'no'}"
        )
    click.echo(f"passed={'yes' if report.passed else 'no'}")
    if not report.passed:
        click.echo(
            f"Cover fails at k={','.join(str(row.k) for row in report.failures)}", err=True
        )
        sys.exit(EXIT_FAILED)


@cli.command("prefix-set")
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.option("--martingale", "selector", required=True, help="NAME:key=value:...")
@click.option("-k", "level", type=click.IntRange(min=0), required=True,
              help="Capital threshold 2^k times the initial capital")
@click.option("--depth", type=click.IntRange(min=0), help="Largest spec size searched")
@click.option("--bits", type=click.IntRange(min=1), default=1, show_default=True,
              help="Bits per sojourn before moving to the next state")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path),
              help="Write the set as a cover file")
@click.pass_context
def prefix_set(
    ctx: click.Context,
    model: str,
    selector: str,
    level: int,
    depth: Optional[int],
    bits: int,
    out: Optional[Path],
) -> None:
    """List the specs where a martingale first reaches 2^k and check Kraft's inequality."""
    try:
        found, report, text = _app(ctx).prefix_set(model, selector, level, depth, bits)
        if out is not None:
            out.write_text(text, encoding="utf-8")
    except Exception as e:
        _fail("building prefix set", e)
    for spec in found:
        click.echo(f"spec={spec.render() or '()'}")
    click.echo(f"size={report.size} initial={_q(report.initial)} total={_q(report.total)}")
    click.echo(f"kraft={'holds' if report.holds else 'fails'}")
    if not report.holds:
        sys.exit(EXIT_FAILED)


@cli.command()
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.argument("target")
@click.option("--proxy", help="Compressor proxy (zlib-raw, lzma-raw)")
@click.option("--depth", type=click.IntRange(min=0),
              help="Re-encode a trajectory file at this many bits per sojourn")
@click.pass_context
def deficiency(
    ctx: click.Context, model: str, target: str, proxy: Optional[str], depth: Optional[int]
) -> None:
    """Compare self-information with a compressed-length bound on complexity.

    TARGET is a spec or a trajectory file.
    """
    try:
        report = _app(ctx).deficiency(model, target, proxy, depth)
    except Exception as e:
        _fail("estimating deficiency", e)
    level = report.certified_level
    click.echo(f"proxy={report.proxy}")
    click.echo(f"pairs={len(report.spec)} bits={report.spec.total_bits}")
    click.echo(f"self_information={report.self_information.render()}")
    click.echo(f"k_hat={report.k_hat}")
    click.echo(f"profile_k_hat={report.profile_k_hat}")
    click.echo(f"deficiency={report.deficiency.render()}")
    click.echo(f"certified_level={level if level is not None else '-'}")
    click.echo(f"roundtrip={'ok' if report.roundtrip_ok else 'failed'}")
    click.echo(f"verdict={report.verdict}")


@cli.command()
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.option("--profile", "shape", required=True, help="Bits per sojourn, e.g. 2,2,1")
@click.option("--proxy", help="Compressor proxy (zlib-raw, lzma-raw)")
@click.option("--max-k", type=click.IntRange(min=0), default=7, show_default=True)
@click.pass_context
def tail(ctx: click.Context, model: str, shape: str, proxy: Optional[str], max_k: int) -> None:
    """Mass of high-deficiency specs among all specs of one profile."""
    try:
        profile = [int(n) for n in shape.split(",") if n.strip()]
        report = _app(ctx).tail(model, profile, proxy, tuple(range(max_k + 1)))
    except Exception as e:
        _fail("computing tail masses", e)
    click.echo(f"proxy={report.proxy}")
    click.echo(f"profile={','.join(str(n) for n in report.profile)}")
    for row in report.rows:
        click.echo(f"k={row.k} mass={_q(row.mass)} bound={_q(row.bound)}")
    click.echo(f"c_proxy={report.c_proxy}")


@cli.command()
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.argument("trajectory", type=click.Path(exists=True, dir_okay=False))
@click.option("--bound", type=click.IntRange(min=0),
              help="Count cap for every species (default: the model's bound lines)")
@click.pass_context
def zeno(ctx: click.Context, model: str, trajectory: str, bound: Optional[int]) -> None:
    """Report evidence of explosive behavior in a stored trajectory."""
    try:
        report = _app(ctx).zeno(model, trajectory, bound)
    except Exception as e:
        _fail("inspecting trajectory", e)
    violation = report.first_violation
    click.echo(f"within_bounds={'yes' if report.within_bounds else 'no'}")
    click.echo(f"first_violation={violation if violation is not None else '-'}")
    click.echo(f"max_exit_rate={_q(report.max_exit_rate)}")
    total = report.partial_sums[-1] if report.partial_sums else 0.0
    click.echo(f"elapsed={total!r}")
    click.echo(f"zero_suffix={report.zero_suffix}")
    click.echo(f"detector_capital={_q(report.detector_capital)}")


@cli.command()
@click.pass_context
def martingales(ctx: click.Context) -> None:
    """List the named martingale constructions."""
    for factory in _app(ctx).registry.list_factories():
        click.echo(f"{factory.name()}\t{factory.description()}")


def main() -> None:
    """Main entry point."""
    cli()
