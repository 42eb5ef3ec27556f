"""Command-line interface: skeleton, simulate, serve.

Exit codes: 0 success, 1 usage error (bad flags or parameter values),
2 data error (unreadable config, unwritable output, corrupt store).
"""

import json
import sys
from pathlib import Path

import click

from . import __version__
from .config import ConfigError, build_manifest, load_study
from .core import build_skeleton
from .eventlog import EventLogError
from .presets import PRESETS, load_preset, preset_names
from .simulate import (
    RESULTS_COLUMNS,
    SELECTION_COLUMNS,
    results_rows,
    run_study,
    selection_rows,
    write_csv,
)

EXIT_USAGE = 1
EXIT_DATA = 2


class DataError(Exception):
    """I/O or content failure distinct from user flag misuse."""


@click.group()
@click.version_option(version=__version__, prog_name="titeprog")
def cli():
    """Dose-finding engine: design, simulation, and live trial conduct."""


@cli.command()
@click.option("--target", type=float, required=True, help="Target toxicity probability.")
@click.option("--halfwidth", type=float, required=True, help="Indifference half-width.")
@click.option("--nu", type=int, required=True, help="Prior MTD position (1-based).")
@click.option("--k", "num_doses", type=int, required=True, help="Number of dose levels.")
def skeleton(target, halfwidth, nu, num_doses):
    """Print the indifference-interval skeleton to four decimals."""
    try:
        sk = build_skeleton(target, halfwidth, nu, num_doses)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    click.echo(" ".join(f"{p:.4f}" for p in sk.probs))


@cli.command()
@click.argument("config")
@click.option("--replicates", type=int, default=None, help="Override replicate count.")
@click.option("--seed", type=int, default=None, help="Override base seed.")
@click.option("--out", type=click.Path(), default="out", help="Output directory.")
@click.option("--jobs", type=int, default=None, help="Worker processes.")
def simulate(config, replicates, seed, out, jobs):
    """Run a study from a preset name, a flat config file, or a manifest.

    Writes results.csv, selection.csv and manifest.json into --out.
    """
    if config in PRESETS:
        study = load_preset(config)
    else:
        path = Path(config)
        if not path.exists():
            raise click.UsageError(
                f"{config!r} is neither a preset ({', '.join(preset_names())}) "
                "nor a readable file"
            )
        try:
            study = load_study(path)
        except ConfigError as exc:
            raise DataError(str(exc)) from None
    if replicates is not None:
        if replicates < 1:
            raise click.UsageError("--replicates must be >= 1")
        study = _replace(study, replicates=replicates)
    if seed is not None:
        study = _replace(study, base_seed=seed)
    if jobs is not None:
        if jobs < 1:
            raise click.UsageError("--jobs must be >= 1")
        study = _replace(study, workers=jobs)

    out_dir = Path(out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise DataError(f"output directory not writable: {exc}") from None

    click.echo(
        f"running {len(study.scenarios)} scenario(s) x {len(study.strategies)} "
        f"strategies x {len(study.phis)} phi value(s), R={study.replicates}",
        err=True,
    )
    result = run_study(study)

    results_path = out_dir / "results.csv"
    selection_path = out_dir / "selection.csv"
    manifest_path = out_dir / "manifest.json"
    try:
        write_csv(results_path, RESULTS_COLUMNS, results_rows(result))
        write_csv(selection_path, SELECTION_COLUMNS, selection_rows(result))
        manifest = build_manifest(
            study,
            {"results": results_path.name, "selection": selection_path.name},
        )
        manifest_path.write_text(
            json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        raise DataError(f"cannot write outputs: {exc}") from None
    click.echo(f"wrote {results_path}, {selection_path}, {manifest_path}", err=True)


def _replace(study, **kw):
    from dataclasses import replace

    return replace(study, **kw)


@cli.command()
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--store", "store_path", type=click.Path(), default=None,
              help="Event-log directory; omit for in-memory mode.")
def serve(port, host, store_path):
    """Run the live trial conduct service until interrupted."""
    import uvicorn

    from .service import TrialStore, create_app

    if store_path is None:
        click.echo("warning: no --store given; trials will not survive restarts",
                   err=True)
    try:
        store = TrialStore(store_path)
    except EventLogError as exc:
        raise DataError(f"corrupt event log: {exc}") from None
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataError(f"corrupt store: {exc}") from None
    app = create_app(store)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main():
    try:
        cli.main(sys.argv[1:], standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        sys.exit(EXIT_USAGE)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_USAGE)
    except click.exceptions.Abort:
        sys.exit(EXIT_USAGE)
    except DataError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    return 0


if __name__ == "__main__":
    sys.exit(main())
