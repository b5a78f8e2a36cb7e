"""``affine-snn`` command line: thin wrapper over :mod:`affine_snn.experiments`."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
from threadpoolctl import threadpool_limits

from . import experiments
from .errors import AffineSnnError, ConfigError


def _thread_cap() -> int | None:
    raw = os.environ.get("AFFINE_SNN_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise click.UsageError(f"AFFINE_SNN_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise click.UsageError("AFFINE_SNN_THREADS must be >= 1")
    return n


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise click.BadParameter(f"{path}: invalid JSON ({exc})")
    if not isinstance(cfg, dict):
        raise click.BadParameter(f"{path}: config must be a JSON object")
    return cfg


def _run(name: str, config: str, out: str) -> None:
    cfg = _load_config(config)
    with threadpool_limits(limits=_thread_cap()):
        try:
            if name == "bounds":
                Path(out).write_text(experiments.run_bounds(cfg).to_json() + "\n")
            else:
                experiments.RUNNERS[name](cfg).write(out)
        except experiments.AssertFailed as exc:
            click.echo(f"assertion failed: {exc}", err=True)
            sys.exit(2)
        except (ConfigError, AffineSnnError, FileNotFoundError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
    click.echo(f"wrote {out}")


_config = click.option("--config", required=True, type=click.Path(exists=True, dir_okay=False), help="JSON config")
_out = click.option("--out", required=True, type=click.Path(dir_okay=False), help="output path")


@click.group()
def main() -> None:
    """Affine spiking network experiments and bound calculators."""


def _register(name: str, help_text: str) -> None:
    @main.command(name=name, help=help_text)
    @_config
    @_out
    def cmd(config, out):
        _run(name, config, out)


_register("minmax", "Min/max emulation error over an eps grid (CSV).")
_register("teacher", "Teacher-student regression with linear, ReLU and SNN students (CSV).")
_register("mnist", "MNIST subset training, positive vs general weights (CSV).")
_register("discontinuity", "Spike-time jumps of general-weight neurons (CSV).")
_register("fem", "Finite-element emulation error on a grid (CSV).")
_register("bounds", "Lipschitz, covering and generalization bounds for a saved model (JSON).")


@main.command("prepare-mnist")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="directory for the IDX files")
def prepare_mnist(out):
    """Write the MNIST sample bundled with mlxtend as IDX files."""
    try:
        experiments.prepare_mnist(out)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
