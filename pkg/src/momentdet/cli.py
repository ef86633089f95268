"""
Command-line interface for momentdet.

Usage:
    momentdet analyze --spec gaussian.json          # verdict JSON with every report
    momentdet conditions --spec e1.json --only KstarH,KreinH
    momentdet moments --spec exp.json --kmax 12     # k,ln_mk,err,carleman_term
    momentdet trace --spec gaussian.json --kmax 10  # k,x_k,ln_peak_weight,bound_slack
    momentdet catalog list
    momentdet catalog run --jobs 4
"""

import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

import click
from pydantic import BaseModel, ConfigDict, Field
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from .catalog import catalog, catalog_entry, load_spec_file
from .client import DeterminacyClient
from .core import VERSION, ContradictionError, MomentDetException, SpecError
from .distmodel import AnySpec
from .schemas import Case, ConditionId
from .settings import Settings

__all__ = [
    "cli",
]

logger = logging.getLogger("momentdet")

EXIT_INPUT = 1
EXIT_CONTRADICTION = 2
EXIT_MISMATCH = 3


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    spec: Optional[str] = None
    entry: Optional[str] = None
    case: str = Field("auto", pattern="^(auto|hamburger|stieltjes)$")
    k_max: Optional[int] = Field(None, ge=8, le=200)
    only: Optional[list[ConditionId]] = None
    json_path: Optional[str] = None
    csv_path: Optional[str] = None

    @property
    def resolved_case(self) -> Optional[Case]:
        return None if self.case == "auto" else Case(self.case)


def fmt(value: Optional[float]) -> str:
    """Fixed 12-significant-digit formatting for CSV cells."""
    if value is None:
        return ""
    if math.isinf(value):
        return "-inf" if value < 0 else "inf"
    return f"{value:.12g}"


def configure_logging(verbose: bool):
    handler = RichHandler(console=Console(stderr=True), show_path=False)
    root = logging.getLogger("momentdet")
    root.handlers = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)


def fail(message: str, code: int = EXIT_INPUT):
    click.echo(f"Error: {message}", err=True)
    sys.exit(code)


def load_spec(config: RunConfig) -> AnySpec:
    if (config.spec is None) == (config.entry is None):
        fail("exactly one of --spec and --entry is required")
    try:
        if config.entry is not None:
            return catalog_entry(config.entry).spec
        return load_spec_file(config.spec)
    except OSError as e:
        fail(f"cannot read {config.spec}: {e.strerror}")
    except SpecError as e:
        fail(f"{config.spec or config.entry}: {e}")


def parse_only(value: Optional[str]) -> Optional[list[ConditionId]]:
    if not value:
        return None
    try:
        return [ConditionId(item.strip()) for item in value.split(",") if item.strip()]
    except ValueError as e:
        fail(f"--only: {e}")


def emit(text: str, path: Optional[str] = None):
    """Writes text to standard output, and to path when one is given."""
    click.echo(text, nl=False)
    if path:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)


def to_csv(header: list[str], rows: list[list[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def spec_options(func):
    options = [
        click.option("--spec", "spec", type=click.Path(dir_okay=False), help="Spec JSON file"),
        click.option("--entry", "entry", help="Catalog entry name instead of a spec file"),
        click.option(
            "--case",
            type=click.Choice(["auto", "hamburger", "stieltjes"]),
            default="auto",
            show_default=True,
        ),
        click.option("--kmax", "k_max", type=click.IntRange(8, 200), default=None),
        click.option("--json", "json_path", type=click.Path(dir_okay=False), help="Also write JSON here"),
        click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="Also write CSV here"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.version_option(version=VERSION, prog_name="momentdet")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging on stderr")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override a setting, e.g. tailfit.ratio=1.3")
@click.pass_context
def cli(ctx: click.Context, verbose: bool, overrides: tuple[str, ...]):
    """
    Numerical moment-determinacy diagnostics.

    Examples:

        momentdet analyze --entry gaussian

        momentdet catalog run
    """
    configure_logging(verbose)
    try:
        settings = Settings().with_overrides(overrides)
    except SpecError as e:
        fail(str(e))
    ctx.obj = DeterminacyClient(settings)


@cli.command()
@spec_options
@click.option("--only", help="Comma-separated condition ids")
@click.pass_obj
def analyze(client: DeterminacyClient, only: Optional[str], **options):
    """Runs the full battery and prints the verdict JSON."""
    config = RunConfig(only=parse_only(only), **options)
    spec = load_spec(config)
    try:
        analysis = client.analyze(spec, config.resolved_case, config.only)
    except ContradictionError as e:
        if e.analysis is not None:
            emit(e.analysis.model_dump_json(by_alias=True, indent=2) + "\n", config.json_path)
        fail(str(e), EXIT_CONTRADICTION)
    except MomentDetException as e:
        fail(str(e))
    emit(analysis.model_dump_json(by_alias=True, indent=2) + "\n", config.json_path)


@cli.command()
@spec_options
@click.option("--only", help="Comma-separated condition ids")
@click.pass_obj
def conditions(client: DeterminacyClient, only: Optional[str], **options):
    """Condition reports as CSV: condition,verdict,p_fit,q_fit,notes."""
    config = RunConfig(only=parse_only(only), **options)
    spec = load_spec(config)
    try:
        reports = client.run_battery(spec, config.resolved_case, config.only)
    except MomentDetException as e:
        fail(str(e))
    rows = []
    for report in reports:
        fit = report.evidence.fit if report.evidence is not None else None
        rows.append(
            [
                report.id.value,
                report.verdict.value,
                fmt(fit.p if fit else None),
                fmt(fit.q if fit else None),
                "; ".join(report.notes),
            ]
        )
    emit(to_csv(["condition", "verdict", "p_fit", "q_fit", "notes"], rows), config.csv_path)
    if config.json_path:
        with open(config.json_path, "w", encoding="utf-8") as f:
            f.write("[" + ",".join(r.model_dump_json(by_alias=True) for r in reports) + "]\n")


@cli.command()
@spec_options
@click.pass_obj
def moments(client: DeterminacyClient, **options):
    """Moment table as CSV: k,ln_mk,err,carleman_term."""
    config = RunConfig(**options)
    spec = load_spec(config)
    try:
        if config.resolved_case is not None:
            client.resolve_case(spec, config.resolved_case)
        table = client.moments.moment_table(spec, config.k_max)
        terms = dict(client.moments.carleman_terms(table))
    except MomentDetException as e:
        fail(str(e))
    rows = []
    for entry in table.entries:
        index = entry.k // 2 if table.case == Case.Hamburger else entry.k
        rows.append([str(entry.k), fmt(entry.log_value), fmt(entry.error), fmt(terms[index])])
    emit(to_csv(["k", "ln_mk", "err", "carleman_term"], rows), config.csv_path)
    if config.json_path:
        with open(config.json_path, "w", encoding="utf-8") as f:
            f.write(table.model_dump_json(indent=2) + "\n")


@cli.command()
@spec_options
@click.pass_obj
def trace(client: DeterminacyClient, **options):
    """Maximizer trace as CSV: k,x_k,ln_peak_weight,bound_slack."""
    config = RunConfig(**options)
    spec = load_spec(config)
    try:
        result = client.maximizer.build_trace(spec, config.k_max)
        slack = {row.k: row.slack for row in client.maximizer.verify_step5_bound(spec, result)}
    except MomentDetException as e:
        fail(str(e))
    rows = [
        [str(p.k), fmt(p.x), fmt(p.log_weight), fmt(slack.get(p.k))] for p in result.points
    ]
    emit(to_csv(["k", "x_k", "ln_peak_weight", "bound_slack"], rows), config.csv_path)
    if config.json_path:
        with open(config.json_path, "w", encoding="utf-8") as f:
            f.write(result.model_dump_json(indent=2) + "\n")


@cli.group(name="catalog")
def catalog_group():
    """Built-in distributions with known verdicts."""


@catalog_group.command(name="list")
def catalog_list():
    """Prints every entry with its parameters and expected verdict."""
    table = Table(title="momentdet catalog")
    table.add_column("name")
    table.add_column("parameters")
    table.add_column("expected")
    for entry in catalog():
        params = ", ".join(f"{k}={v:g}" for k, v in entry.parameters.items())
        expected = entry.expected_verdict
        table.add_row(
            entry.name,
            params or "-",
            f"{expected.conclusion} via {expected.rule}" if expected else "-",
        )
    Console().print(table)


def run_entry(name: str, settings: dict) -> dict:
    """Analyzes one catalog entry; module level so worker processes can import it."""
    client = DeterminacyClient(Settings.model_validate(settings))
    entry = catalog_entry(name)
    try:
        analysis = client.analyze(entry.spec)
    except ContradictionError as e:
        return {"name": name, "conclusion": "Conflict", "fired": [], "error": str(e)}
    except MomentDetException as e:
        return {"name": name, "conclusion": "Error", "fired": [], "error": str(e)}
    return {
        "name": name,
        "conclusion": analysis.verdict.conclusion.value,
        "fired": [r.rule.value for r in analysis.verdict.fired_rules],
        "error": None,
    }


@catalog_group.command(name="run")
@click.option("--jobs", "-j", type=click.IntRange(1, 64), default=1, show_default=True)
@click.option("--only", "names", help="Comma-separated entry names")
@click.pass_obj
def catalog_run(client: DeterminacyClient, jobs: int, names: Optional[str]):
    """Runs the catalog and exits with code 3 on any verdict mismatch."""
    entries = catalog()
    if names:
        wanted = [n.strip() for n in names.split(",") if n.strip()]
        try:
            entries = [catalog_entry(n) for n in wanted]
        except SpecError as e:
            fail(str(e))
    settings = client.settings.model_dump()
    ordered = [e.name for e in entries]
    if jobs == 1:
        results = [run_entry(n, settings) for n in ordered]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_entry, ordered, [settings] * len(ordered)))

    table = Table(title="momentdet catalog run")
    for column in ("name", "conclusion", "fired rules", "expected", "match"):
        table.add_column(column)
    mismatches = 0
    for entry, result in zip(entries, results):
        expected = entry.expected_verdict
        match = expected is None or (
            result["conclusion"] == expected.conclusion.value and expected.rule.value in result["fired"]
        )
        mismatches += not match
        table.add_row(
            entry.name,
            result["conclusion"],
            ", ".join(result["fired"]) or (result["error"] or "-"),
            f"{expected.conclusion} via {expected.rule}" if expected else "-",
            "yes" if match else "NO",
        )
    Console().print(table)
    if mismatches:
        fail(f"{mismatches} catalog entr{'y' if mismatches == 1 else 'ies'} did not match", EXIT_MISMATCH)
