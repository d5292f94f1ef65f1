"""``qcst-lab`` command line entry point.

Exit codes: 0 on success, 2 for configuration or input errors, 3 when a
numerical routine fails.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .engine import sample_husimi
from .fock import FockState
from .gaussian import PhaseSampleSet
from .harness import ConfigError, NumericalFailure, run_experiment, validate_config
from .tomography import MleConfig, mle_fit

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _fail(msg: str, code: int):
    click.echo(msg, err=True)
    sys.exit(code)


def _read_config(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        _fail(f"{path}: {exc.strerror}", EXIT_CONFIG)
    try:
        return validate_config(text)
    except ConfigError as exc:
        _fail("\n".join(f"{path}:{e}" for e in exc.errors), EXIT_CONFIG)


@click.group()
def main():
    """Coherent state transform experiments."""


@main.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
def validate(config_path):
    """Check a config file and report every problem found."""
    cfg = _read_config(config_path)
    click.echo(f"ok: {cfg.experiment} (seed {cfg.seed})")


@main.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
def run(config_path):
    """Run the experiment described by CONFIG_PATH."""
    cfg = _read_config(config_path)
    try:
        res = run_experiment(cfg)
    except ConfigError as exc:
        _fail("\n".join(exc.errors), EXIT_CONFIG)
    except NumericalFailure as exc:
        _fail(f"numerical failure: {exc}", EXIT_NUMERICAL)
    click.echo(f"{cfg.experiment}: {len(res.rows)} rows written to {cfg.output}")


def _load_state(path: str) -> FockState:
    try:
        obj = json.loads(Path(path).read_text())
        return FockState.from_json(obj)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        _fail(f"{path}: cannot read state ({exc})", EXIT_CONFIG)


@main.command()
@click.option("--state", "state_path", required=True, help="State JSON {dim, coeffs: [[re, im], ...]}.")
@click.option("--m", "m", type=int, required=True, help="Number of samples.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def sample(state_path, m, seed, out):
    """Draw Husimi samples of a pure state into a CSV (``re,im``)."""
    if m < 0:
        _fail("--m must be non-negative", EXIT_CONFIG)
    psi = _load_state(state_path)
    try:
        samples = sample_husimi(psi, m, seed=seed)
    except RuntimeError as exc:
        _fail(f"numerical failure: {exc}", EXIT_NUMERICAL)
    samples.to_csv(out)
    click.echo(f"{m} samples written to {out}")


@main.command()
@click.option("--samples", "samples_path", required=True, type=click.Path(dir_okay=False))
@click.option("--gamma", type=int, default=32, show_default=True, help="Fock cutoff.")
@click.option("--restarts", type=int, default=8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def tomo(samples_path, gamma, restarts, seed, out):
    """Maximum-likelihood reconstruction from a sample CSV."""
    try:
        samples = PhaseSampleSet.from_csv(samples_path)
        cfg = MleConfig(gamma=gamma, restarts=restarts, seed=seed)
    except (OSError, ValueError) as exc:
        _fail(f"{samples_path}: {exc}", EXIT_CONFIG)
    try:
        rep = mle_fit(samples, cfg)
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        _fail(f"numerical failure: {exc}", EXIT_NUMERICAL)
    Path(out).write_text(json.dumps(rep.to_json(), indent=2) + "\n")
    click.echo(f"reconstruction written to {out} (nll {rep.neg_log_likelihood:.6f})")


if __name__ == "__main__":
    main()
