"""Command-line entry point.

Exit codes (stable contract): 0 success, 1 verification-check failure,
2 divergence during a run, 3 configuration error.
"""
from __future__ import annotations

import sys
from pathlib import Path

import click

from .config import parse_config
from .errors import ConfigError, MflError
from .runner import (EXIT_CHECK_FAILED, EXIT_CONFIG_ERROR, EXIT_OK, SWEEP_AXES,
                     cmd_run, cmd_sweep, read_bands_csv)


@click.group()
def main():
    """Particle-based mean-field optimization experiments."""


def _load_config(path):
    try:
        return parse_config(path)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)


@main.command("run")
@click.option("--config", "config_path", required=True,
              type=click.Path(), help="JSON experiment config.")
@click.option("--workers", default=1, show_default=True,
              help="Parallel workers across seeds.")
def run_command(config_path, workers):
    """Run the configured experiment for every seed."""
    config = _load_config(config_path)
    try:
        sys.exit(cmd_run(config, workers=workers))
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)


@main.command("sweep")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--axis", required=True, type=click.Choice(SWEEP_AXES))
@click.option("--values", required=True,
              help="Comma-separated axis values, e.g. 64,256,1024.")
@click.option("--workers", default=1, show_default=True)
def sweep_command(config_path, axis, values, workers):
    """Repeat the experiment along one axis, one subdirectory per value."""
    config = _load_config(config_path)
    try:
        parsed = [float(v) for v in values.split(",") if v.strip()]
    except ValueError:
        click.echo(f"configuration error: --values is not numeric: {values!r}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    try:
        sys.exit(cmd_sweep(config, axis, parsed, workers=workers))
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)


@main.command("check")
@click.option("--level", default="fast", show_default=True,
              type=click.Choice(["fast", "full"]))
@click.option("--out", default="check_results.csv", show_default=True,
              type=click.Path(), help="Machine-readable results CSV.")
def check_command(level, out):
    """Run the self-verification suite against independent oracles."""
    from .checks import run_checks  # deferred: pulls in mpmath/scipy
    results = run_checks(level)
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        click.echo(f"{r.name:<{width}}  {status}  {r.detail}")
    lines = ["name,passed,detail"]
    lines += [f"{r.name},{int(r.passed)},\"{r.detail}\"" for r in results]
    Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    failed = [r.name for r in results if not r.passed]
    if failed:
        click.echo(f"failed checks: {', '.join(failed)}", err=True)
        sys.exit(EXIT_CHECK_FAILED)
    sys.exit(EXIT_OK)


@main.command("plot")
@click.option("--dir", "run_dir", required=True, type=click.Path())
def plot_command(run_dir):
    """Render loss.svg (log-scale loss with min-max band) for a run or sweep."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    root = Path(run_dir)
    sources = []
    if (root / "bands.csv").is_file():
        sources.append((root.name, root / "bands.csv"))
    else:
        for sub in sorted(p for p in root.iterdir() if p.is_dir()):
            if (sub / "bands.csv").is_file():
                sources.append((sub.name, sub / "bands.csv"))
    if not sources:
        click.echo(f"error: no bands.csv under {root}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)

    fig, ax = plt.subplots(figsize=(7, 5))
    plotted = 0
    for label, path in sources:
        try:
            bands = read_bands_csv(path)
        except MflError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_CONFIG_ERROR)
        if not bands:
            continue
        steps = [b[0] for b in bands]
        ax.plot(steps, [b[1] for b in bands], label=label)
        ax.fill_between(steps, [b[2] for b in bands], [b[3] for b in bands],
                        alpha=0.25)
        plotted += 1
    if plotted == 0:
        click.echo("error: bands are empty, nothing to plot", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.legend()
    fig.tight_layout()
    out = root / "loss.svg"
    fig.savefig(out, format="svg")
    plt.close(fig)
    click.echo(str(out))
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
