"""Declarative experiment runner.

A run is described by a small YAML document::

    experiment: fig5-windows
    seed: 1234
    output: out/fig5
    params:
      n: 8
      lam: 0.5

Every experiment writes ``<output>/<experiment>.csv`` and a metadata file
``<output>/<experiment>.json``. The CSV depends only on the config, so a
rerun with the same seed reproduces it byte for byte; wall-clock time is
kept in the JSON only. Trial ``t`` of a sweep draws from
``numpy.random.default_rng(seed + t)`` with ``t`` counted across the whole
sweep.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from . import __version__
from .calibration import (
    BeamSplitterParams,
    angle_error,
    beam_splitter_trials,
    displacement_cv_trials,
    displacement_dv_trials,
    rotation_trials,
)
from .discrete import discrete_qcst_amplitudes, error_sweep, make_window, window_spectrum
from .engine import qcst_circuit_verify, qgt_circuit_verify, sample_husimi
from .fock import FockState, fock_basis, make_coherent, vacuum
from .gaussian import SqueezeParams, estimate_moments, fit_squeezing, sample_gaussian, squeezed_coherent_model
from .tomography import MleConfig, mle_fit, padua_interpolate, padua_points, pointwise_estimate, q_l1_distance


class ConfigError(Exception):
    """Raised with the full list of problems found in a config."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


class NumericalFailure(RuntimeError):
    """A downstream numerical routine failed while running an experiment."""


# ---------------------------------------------------------------------------
# named states


def _fig3_state() -> FockState:
    c = np.zeros(5, dtype=complex)
    c[0], c[2], c[4] = 0.5, 1j / math.sqrt(2), 0.5
    return FockState(c)


def _fock13_state() -> FockState:
    c = np.zeros(4, dtype=complex)
    c[1], c[3] = 1 / math.sqrt(2), 1 / math.sqrt(2)
    return FockState(c)


def parse_state(name: str) -> FockState:
    """Build a state from a short name.

    Accepted forms: ``vacuum``, ``fock:N``, ``coherent:RE`` or
    ``coherent:RE,IM``, ``fig3`` (the tomography test state) and
    ``fock13`` (equal superposition of one and three photons).
    """
    name = name.strip()
    if name == "vacuum":
        return vacuum(1)
    if name == "fig3":
        return _fig3_state()
    if name == "fock13":
        return _fock13_state()
    head, _, arg = name.partition(":")
    if head == "fock" and arg:
        n = int(arg)
        if n < 0:
            raise ValueError("photon number must be non-negative")
        return fock_basis(n, n + 1)
    if head == "coherent" and arg:
        parts = [float(x) for x in arg.split(",")]
        if len(parts) not in (1, 2):
            raise ValueError(f"bad coherent amplitude {arg!r}")
        alpha = complex(parts[0], parts[1] if len(parts) == 2 else 0.0)
        dim = max(24, int(math.ceil(4 * abs(alpha) ** 2 + 12 * abs(alpha) + 16)))
        return make_coherent(alpha, dim)
    raise ValueError(f"unknown state {name!r}")


# ---------------------------------------------------------------------------
# schema


@dataclass(frozen=True)
class Param:
    kind: str  # int, float, str, ints, floats, strs
    default: Any = None
    check: Callable[[Any], str | None] | None = None
    required: bool = False


def _positive(v):
    vals = v if isinstance(v, list) else [v]
    return None if all(x > 0 for x in vals) else "must be positive"


def _non_negative(v):
    vals = v if isinstance(v, list) else [v]
    return None if all(x >= 0 for x in vals) else "must be non-negative"


def _power_of_two(v):
    vals = v if isinstance(v, list) else [v]
    return None if all(x >= 2 and x & (x - 1) == 0 for x in vals) else "must be a power of two >= 2"


def _one_of(*choices):
    def check(v):
        vals = v if isinstance(v, list) else [v]
        bad = [x for x in vals if x not in choices]
        return None if not bad else f"must be one of {', '.join(choices)} (got {', '.join(map(str, bad))})"

    return check


def _states(v):
    vals = v if isinstance(v, list) else [v]
    for s in vals:
        try:
            parse_state(s)
        except ValueError as exc:
            return str(exc)
    return None


def _all(*checks):
    def check(v):
        for c in checks:
            msg = c(v)
            if msg:
                return msg
        return None

    return check


SCHEMAS: dict[str, dict[str, Param]] = {
    "fig2-squeeze": {
        "ms": Param("ints", [256, 1024, 4096], _positive),
        "alphas": Param("floats", [2.0, 4.0, 8.0], _positive),
        "reps": Param("int", 200, _positive),
        "r_max": Param("float", 1.0, _positive),
    },
    "fig34-tomography": {
        "state": Param("str", "fig3", _states),
        "ms": Param("ints", [1024], _positive),
        "trials": Param("int", 1, _positive),
        "gamma": Param("int", 32, _positive),
        "restarts": Param("int", 8, _non_negative),
        "radius": Param("float", 5.0, _positive),
        "step": Param("float", 0.05, _positive),
        "padua_degree": Param("int", 32, _non_negative),
        "shots": Param("int", 1024, _positive),
    },
    "fig5-windows": {
        "n": Param("int", 8, _power_of_two),
        "lam": Param("float", 0.5, _positive),
        "kinds": Param("strs", ["unf", "sin"], _one_of("unf", "sin", "gauss")),
        "points": Param("int", 401, _positive),
    },
    "fig67-discrete": {
        "state": Param("str", "fig3", _states),
        "ns": Param("ints", [64], _power_of_two),
        "n_lambdas": Param("floats", [float(x) for x in np.arange(1.0, 10.5, 0.5)], _positive),
        "kind": Param("str", "gauss", _one_of("unf", "sin", "gauss")),
        "grid_n": Param("int", 0, _non_negative),
        "grid_lam": Param("float", 0.5, _positive),
    },
    "bs-calibration": {
        "alphas": Param("floats", [2.0, 4.0, 8.0, 16.0], _positive),
        "theta": Param("float", 0.7),
        "phi": Param("float", 0.3),
        "trials": Param("int", 2000, _positive),
    },
    "rot-calibration": {
        "alphas": Param("floats", [2.0, 4.0, 8.0, 16.0], _positive),
        "theta": Param("float", 0.7),
        "trials": Param("int", 2000, _positive),
    },
    "disp-calibration": {
        "mode": Param("str", "cv", _one_of("cv", "dv")),
        "alpha": Param("floats", [0.3, -0.2]),
        "lams": Param("floats", [1.0, 2.0, 4.0, 8.0], _positive),
        "trials": Param("int", 10000, _positive),
        "n": Param("int", 64, _power_of_two),
        "kind": Param("str", "sin", _one_of("unf", "sin", "gauss")),
    },
    "qcst-verify": {
        "states": Param("strs", ["vacuum", "fock:1", "coherent:0.5"], _states),
        "dim": Param("int", 16, _all(_positive, lambda v: None if v >= 8 else "must be at least 8")),
        "p_max": Param("float", 3.0, _positive),
        "points": Param("int", 13, _positive),
    },
    "qgt-verify": {
        "states": Param("strs", ["vacuum", "fock:2"], _states),
        "r": Param("float", 0.3, lambda v: None if abs(v) <= 0.7 else "|r| must be at most 0.7"),
        "dim": Param("int", 24, _all(_positive, lambda v: None if v >= 16 else "must be at least 16")),
        "p_max": Param("float", 3.0, _positive),
        "points": Param("int", 13, _positive),
    },
}

TOP_KEYS = {"experiment", "seed", "output", "params"}


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    seed: int = 0
    output: str = "results"

    def as_dict(self) -> dict:
        return {"experiment": self.experiment, "seed": self.seed, "output": self.output, "params": self.params}


@dataclass
class ExperimentResult:
    experiment: str
    columns: list[str]
    rows: list[tuple]
    metadata: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def _line(node) -> int:
    return node.start_mark.line + 1


def _coerce(kind: str, value):
    """Coerce a parsed YAML value, returning ``(value, error)``."""
    scalar = kind.rstrip("s") if kind in ("ints", "floats", "strs") else kind
    if kind in ("ints", "floats", "strs"):
        if not isinstance(value, list):
            value = [value]
        out = []
        for v in value:
            c, err = _coerce(scalar, v)
            if err:
                return None, err
            out.append(c)
        return out, None
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            return None, f"expected an integer, got {value!r}"
        return value, None
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            return None, f"expected a finite number, got {value!r}"
        return float(value), None
    if kind == "str":
        if not isinstance(value, str):
            return None, f"expected a string, got {value!r}"
        return value, None
    raise AssertionError(kind)


def validate_config(text: str) -> ExperimentConfig:
    """Parse and validate a config, raising :class:`ConfigError` with every problem found."""
    loader = yaml.SafeLoader(text)
    try:
        try:
            root = loader.get_single_node()
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"line {mark.line + 1}: " if mark else ""
            raise ConfigError([f"{where}invalid YAML ({getattr(exc, 'problem', exc)})"]) from None
        if root is None or not isinstance(root, yaml.MappingNode):
            raise ConfigError(["line 1: config must be a mapping"])
        errors = []
        top = {}
        for knode, vnode in root.value:
            key = loader.construct_object(knode, deep=True)
            if key not in TOP_KEYS:
                errors.append(f"line {_line(knode)}: unknown key {key!r} (allowed: {', '.join(sorted(TOP_KEYS))})")
                continue
            top[key] = (knode, vnode)

        exp = None
        if "experiment" not in top:
            errors.append("line 1: missing required key 'experiment'")
        else:
            knode, vnode = top["experiment"]
            exp = loader.construct_object(vnode, deep=True)
            if exp not in SCHEMAS:
                errors.append(f"line {_line(vnode)}: unknown experiment {exp!r}; valid ids: {', '.join(SCHEMAS)}")
                exp = None

        seed = 0
        if "seed" in top:
            vnode = top["seed"][1]
            v = loader.construct_object(vnode, deep=True)
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                errors.append(f"line {_line(vnode)}: seed must be a non-negative integer, got {v!r}")
            else:
                seed = v
        output = "results"
        if "output" in top:
            vnode = top["output"][1]
            v = loader.construct_object(vnode, deep=True)
            if not isinstance(v, str) or not v:
                errors.append(f"line {_line(vnode)}: output must be a non-empty path string")
            else:
                output = v

        params = {}
        if exp is not None:
            schema = SCHEMAS[exp]
            given = {}
            if "params" in top:
                pnode = top["params"][1]
                if isinstance(pnode, yaml.ScalarNode) and pnode.value in ("", "~", "null"):
                    pass
                elif not isinstance(pnode, yaml.MappingNode):
                    errors.append(f"line {_line(pnode)}: params must be a mapping")
                else:
                    for knode, vnode in pnode.value:
                        given[loader.construct_object(knode, deep=True)] = vnode
            for key, vnode in given.items():
                if key not in schema:
                    errors.append(
                        f"line {_line(vnode)}: unknown parameter {key!r} for {exp} (allowed: {', '.join(schema)})"
                    )
                    continue
                spec = schema[key]
                value, err = _coerce(spec.kind, loader.construct_object(vnode, deep=True))
                if err is None and spec.check is not None:
                    err = spec.check(value)
                if err:
                    errors.append(f"line {_line(vnode)}: {key}: {err}")
                else:
                    params[key] = value
            for key, spec in schema.items():
                if key not in given:
                    if spec.required:
                        errors.append(f"line {_line(root)}: missing required parameter {key!r}")
                    else:
                        params[key] = spec.default
    finally:
        loader.dispose()
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(exp, params, seed, output)


def config_to_text(cfg: ExperimentConfig) -> str:
    """Serialize a config in the accepted YAML form."""
    return yaml.safe_dump(cfg.as_dict(), sort_keys=False, default_flow_style=None)


# ---------------------------------------------------------------------------
# experiments


def _rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(seed + trial)


def _fig2(p, seed):
    rows = []
    t = 0
    for m in p["ms"]:
        for a in p["alphas"]:
            sq = []
            for _ in range(p["reps"]):
                rng = _rng(seed, t)
                t += 1
                xi = math.sqrt(rng.uniform()) * p["r_max"] * np.exp(1j * rng.uniform(0, 2 * math.pi))
                model = squeezed_coherent_model(SqueezeParams(xi, a))
                est = estimate_moments(sample_gaussian(model, m, rng=rng))
                fit = fit_squeezing(est.mu, est.sigma, a, r_max=p["r_max"])
                sq.append(abs(fit.xi - xi) ** 2)
            rows.append((m, a, math.sqrt(float(np.mean(sq))), p["reps"]))
    return ["M", "alpha", "rms_xi_error", "reps"], rows, {}


def _fig34(p, seed):
    psi = parse_state(p["state"])
    rows = []
    t = 0
    for m in p["ms"]:
        for trial in range(p["trials"]):
            s = seed + t
            samples = sample_husimi(psi, m, seed=s)
            rep = mle_fit(samples, MleConfig(gamma=p["gamma"], restarts=p["restarts"], seed=s), truth=psi,
                          l1_radius=p["radius"], l1_step=p["step"])
            rows.append(("mle", m, trial, s, rep.l1_error, rep.fidelity))
            t += 1
    if p["padua_degree"] > 0:
        grid = padua_points(p["padua_degree"], p["radius"])
        for trial in range(p["trials"]):
            s = seed + t
            vals = pointwise_estimate(psi, grid, p["shots"], seed=s)
            err = q_l1_distance(psi, padua_interpolate(grid, vals), p["radius"], p["step"])
            rows.append(("padua", len(grid.points) * p["shots"], trial, s, err, float("nan")))
            t += 1
    return ["method", "M", "trial", "seed", "l1_error", "fidelity"], rows, {}


def _fig5(p, seed):
    rows = []
    dps = np.linspace(-0.5, 0.5, p["points"])
    for kind in p["kinds"]:
        w = make_window(kind, p["n"], p["lam"])
        for dp, val in zip(dps, window_spectrum(w, dps)):
            rows.append((kind, float(dp), float(val)))
    return ["kind", "dp", "spectrum"], rows, {}


def _fig67(p, seed):
    psi = parse_state(p["state"])
    rows = []
    for n in p["ns"]:
        rows.extend(error_sweep(psi, n, [nl / n for nl in p["n_lambdas"]], kind=p["kind"]))
    extra = {}
    if p["grid_n"]:
        extra["amplitudes"] = discrete_qcst_amplitudes(psi, make_window(p["kind"], p["grid_n"], p["grid_lam"]))
    return ["N", "lambda", "N_lambda", "epsilon"], rows, extra


def _bs(p, seed):
    params = BeamSplitterParams(p["theta"], p["phi"])
    rows = []
    for i, a in enumerate(p["alphas"]):
        res = beam_splitter_trials(a, params, p["trials"], seed + i * p["trials"])
        ident = float(np.mean([e.identifiable for e in res.estimates]))
        dphi = angle_error([e.phi for e in res.estimates], params.phi)
        rows.append((a, res.rms_error, float(np.sqrt(np.mean(dphi**2))), ident))
    return ["alpha", "rms_theta", "rms_phi", "identifiable_fraction"], rows, {}


def _rot(p, seed):
    rows = []
    for i, a in enumerate(p["alphas"]):
        res = rotation_trials(a, p["theta"], p["trials"], seed + i * p["trials"])
        rows.append((a, res.rms_error))
    return ["alpha", "rms_theta"], rows, {}


def _disp(p, seed):
    if len(p["alpha"]) != 2:
        raise ConfigError(["alpha must be a pair [re, im]"])
    alpha = complex(*p["alpha"])
    rows = []
    for i, lam in enumerate(p["lams"]):
        s = seed + i
        if p["mode"] == "cv":
            res = displacement_cv_trials(alpha, lam, p["trials"], s)
        else:
            res = displacement_dv_trials(alpha, make_window(p["kind"], p["n"], lam), p["trials"], s)
        est = np.array(res.estimates)
        bias = est.mean() - alpha
        rows.append((lam, res.rms_error, float(bias.real), float(bias.imag), ";".join(res.flags)))
    return ["lambda", "rms", "bias_re", "bias_im", "flags"], rows, {}


def _verify(p, seed, squeezed: bool):
    grid = np.linspace(-p["p_max"], p["p_max"], p["points"])
    rows = []
    reports = {}
    for name in p["states"]:
        psi = parse_state(name)
        if squeezed:
            rep = qgt_circuit_verify(psi, p["r"], p["dim"], grid)
        else:
            rep = qcst_circuit_verify(psi, p["dim"], grid)
        reports[name] = rep.to_json()
        rows.append((name, p["dim"], rep.squeeze_r, rep.max_amp_error, rep.ancilla_reset_fidelity))
    return ["state", "dim", "r", "max_amp_error", "reset_fidelity"], rows, {"reports": reports}


RUNNERS = {
    "fig2-squeeze": _fig2,
    "fig34-tomography": _fig34,
    "fig5-windows": _fig5,
    "fig67-discrete": _fig67,
    "bs-calibration": _bs,
    "rot-calibration": _rot,
    "disp-calibration": _disp,
    "qcst-verify": lambda p, s: _verify(p, s, False),
    "qgt-verify": lambda p, s: _verify(p, s, True),
}


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_rows(path: Path, columns: list[str], rows: list[tuple]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Run one configured experiment and (optionally) write its CSV and metadata."""
    if cfg.experiment not in RUNNERS:
        raise ConfigError([f"unknown experiment {cfg.experiment!r}; valid ids: {', '.join(SCHEMAS)}"])
    start = time.perf_counter()
    try:
        columns, rows, extra = RUNNERS[cfg.experiment](cfg.params, cfg.seed)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise NumericalFailure(f"{cfg.experiment}: {exc}") from exc
    except (np.linalg.LinAlgError, RuntimeError, FloatingPointError) as exc:
        raise NumericalFailure(f"{cfg.experiment}: {exc}") from exc
    runtime = time.perf_counter() - start
    meta = {
        "config": cfg.as_dict(),
        "seed": cfg.seed,
        "seed_rule": "trial t uses numpy default_rng(seed + t)",
        "code_version": __version__,
        "runtime_seconds": runtime,
        "columns": columns,
    }
    if "reports" in extra:
        meta["reports"] = extra["reports"]
    result = ExperimentResult(cfg.experiment, columns, rows, meta, extra)
    if write:
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        write_rows(out / f"{cfg.experiment}.csv", columns, rows)
        if "amplitudes" in extra:
            extra["amplitudes"].to_csv(out / f"{cfg.experiment}-amplitudes.csv")
        (out / f"{cfg.experiment}.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    return result
