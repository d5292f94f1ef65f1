"""Single-shot gate calibration from Husimi samples and phase kicks.

Each trial consumes one Husimi sample per output mode. Repetitions only
exist to measure the RMS error of the single-shot estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fock import canonical_matrices, make_coherent
from .discrete import WindowRegister, window_phase_distribution, wrapped_index
from .gaussian import GaussianModel, sample_gaussian

TWO_PI = 2 * math.pi
SQRT2 = math.sqrt(2)


def wrap_angle(x):
    """Wrap into ``[0, 2 pi)``."""
    return np.mod(x, TWO_PI)


def angle_error(est, truth):
    """Signed angular difference in ``(-pi, pi]``."""
    d = np.mod(np.asarray(est) - np.asarray(truth) + math.pi, TWO_PI) - math.pi
    return d


@dataclass(frozen=True)
class BeamSplitterParams:
    theta: float
    phi: float
    identifiable: bool = True
    residual: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", float(wrap_angle(self.theta)))
        object.__setattr__(self, "phi", float(wrap_angle(self.phi)))


@dataclass
class CalibrationResult:
    truth: object
    estimates: list
    rms_error: float | None = None
    flags: list = field(default_factory=list)
    seed: object = None

    def to_json(self) -> dict:
        def enc(v):
            if isinstance(v, complex):
                return [v.real, v.imag]
            if isinstance(v, BeamSplitterParams):
                return {"theta": v.theta, "phi": v.phi}
            return v

        return {
            "truth": enc(self.truth),
            "estimates": [enc(e) for e in self.estimates],
            "rms": self.rms_error,
            "flags": self.flags,
            "seed": self.seed,
        }


def beam_splitter_output(alpha: complex, beta: complex, params: BeamSplitterParams) -> tuple[complex, complex]:
    c = math.cos(params.theta / 2)
    s = math.sin(params.theta / 2)
    e = np.exp(1j * params.phi)
    a_out = alpha * c + 1j * beta * s * e
    b_out = beta * c + 1j * alpha * s * np.conj(e)
    return complex(a_out), complex(b_out)


def calibrate_beam_splitter(
    alpha: complex, beta: complex, alpha_hat: complex, beta_hat: complex, s_stderr: float | None = None
) -> BeamSplitterParams:
    """Estimate ``(theta, phi)`` from known inputs and estimated outputs.

    The raw pair ``(c, s)`` is projected with ``theta = 2 atan2(|s|, Re c)``
    and ``phi = arg s``; ``Im c`` is returned as ``residual``. ``phi`` is
    flagged unidentifiable when ``|s|`` is below three standard errors
    (``s_stderr``, defaulting to the single-shot value for two coherent
    readouts).
    """
    energy = abs(alpha) ** 2 + abs(beta) ** 2
    if energy == 0:
        raise ValueError("alpha and beta cannot both be zero")
    c = (alpha_hat * np.conj(alpha) + beta * np.conj(beta_hat)) / energy
    s = 1j * (alpha * np.conj(beta_hat) - alpha_hat * np.conj(beta)) / energy
    if s_stderr is None:
        s_stderr = math.sqrt(0.5 * energy) / energy
    theta = 2 * math.atan2(abs(s), c.real)
    phi = float(np.angle(s)) if s != 0 else 0.0
    return BeamSplitterParams(theta, phi, identifiable=abs(s) >= 3 * s_stderr, residual=float(c.imag))


def calibrate_rotation(alpha: complex, alpha_hat: complex) -> float:
    """``theta`` with ``R(theta)|alpha> = |exp(-i theta) alpha>``."""
    if alpha == 0:
        raise ValueError("rotation cannot be calibrated from the vacuum")
    return float(wrap_angle(-np.angle(alpha_hat / alpha)))


def _coherent_readout(beta: complex, rng: np.random.Generator) -> complex:
    return complex(sample_gaussian(GaussianModel.coherent(beta), 1, rng=rng).samples[0])


def beam_splitter_trials(alpha: float, params: BeamSplitterParams, trials: int, seed: int) -> CalibrationResult:
    """Single-shot beam-splitter calibration with ``alpha = beta`` inputs."""
    a_out, b_out = beam_splitter_output(alpha, alpha, params)
    est = []
    for t in range(trials):
        rng = np.random.default_rng([seed + t, 1])
        est.append(calibrate_beam_splitter(alpha, alpha, _coherent_readout(a_out, rng), _coherent_readout(b_out, rng)))
    dtheta = angle_error([e.theta for e in est], params.theta)
    flags = [] if all(e.identifiable for e in est) else ["phi-unidentifiable-in-some-trials"]
    return CalibrationResult(params, est, float(np.sqrt(np.mean(dtheta**2))), flags, seed)


def rotation_trials(alpha: complex, theta: float, trials: int, seed: int) -> CalibrationResult:
    rotated = complex(np.exp(-1j * theta) * alpha)
    est = []
    for t in range(trials):
        rng = np.random.default_rng([seed + t, 2])
        est.append(calibrate_rotation(alpha, _coherent_readout(rotated, rng)))
    err = angle_error(est, theta)
    return CalibrationResult(theta, est, float(np.sqrt(np.mean(err**2))), [], seed)


def heisenberg_moments(alpha: complex, phi: float, dim: int) -> tuple[float, float]:
    """Mean and variance of the beam-splitter generator on ``|alpha>|alpha>``."""
    psi = make_coherent(alpha, dim)
    if psi.deficit > 1e-8:
        raise ValueError(f"dim={dim} too small for alpha={alpha}: truncation deficit {psi.deficit:.2e}")
    a, *_ = canonical_matrices(dim)
    ad = a.conj().T
    h = 0.5 * (np.exp(1j * phi) * np.kron(ad, a) + np.exp(-1j * phi) * np.kron(a, ad))
    v = np.kron(psi.coeffs, psi.coeffs)
    hv = h @ v
    mean = np.vdot(v, hv).real
    second = np.vdot(hv, hv).real
    return float(mean), float(second - mean**2)


def displacement_cv_calibration(alpha_true: complex, lam: float, seed=None, rng=None) -> complex:
    """One shot of the CV-ancilla displacement calibration.

    The ancilla momenta are Gaussian with means ``-sqrt(2) lam Im(alpha)``
    and ``-sqrt(2) lam Re(alpha)`` and variance 1/2 each.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    alpha_true = complex(alpha_true)
    rng = np.random.default_rng(seed) if rng is None else rng
    sd = math.sqrt(0.5)
    p1 = rng.normal(-SQRT2 * lam * alpha_true.imag, sd)
    p2 = rng.normal(-SQRT2 * lam * alpha_true.real, sd)
    return complex(-(p2 + 1j * p1) / (SQRT2 * lam))


def displacement_cv_trials(alpha_true: complex, lam: float, trials: int, seed: int) -> CalibrationResult:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    alpha_true = complex(alpha_true)
    rng = np.random.default_rng(seed)
    sd = math.sqrt(0.5)
    p1 = rng.normal(-SQRT2 * lam * alpha_true.imag, sd, size=trials)
    p2 = rng.normal(-SQRT2 * lam * alpha_true.real, sd, size=trials)
    est = -(p2 + 1j * p1) / (SQRT2 * lam)
    rms = float(np.sqrt(np.mean(np.abs(est - alpha_true) ** 2)))
    return CalibrationResult(alpha_true, [complex(z) for z in est], rms, [], seed)


def displacement_dv_calibration(alpha_true: complex, window: WindowRegister, seed=None, rng=None) -> tuple[complex, list[str]]:
    """One shot of the two-register phase-kick displacement calibration.

    Each register picks up a phase ``2 lam x`` per index (``x`` is
    ``Im alpha`` for the first register, ``Re alpha`` for the second) and
    is read out by an inverse QFT. Returns the estimate and any flags.
    """
    alpha_true = complex(alpha_true)
    rng = np.random.default_rng(seed) if rng is None else rng
    lam, n = window.lam, window.n
    flags = []
    parts = []
    for x in (alpha_true.imag, alpha_true.real):
        phase = 2 * lam * x
        if abs(phase) >= math.pi:
            flags.append("wrapped")
        pr = window_phase_distribution(window, phase)
        j = rng.choice(n, p=pr)
        parts.append(TWO_PI * wrapped_index(j, n) / n / (2 * lam))
    return complex(parts[1], parts[0]), flags


def displacement_dv_trials(alpha_true: complex, window: WindowRegister, trials: int, seed: int) -> CalibrationResult:
    """Vectorised repeated shots (same law as :func:`displacement_dv_calibration`)."""
    alpha_true = complex(alpha_true)
    rng = np.random.default_rng(seed)
    lam, n = window.lam, window.n
    est = np.zeros(trials, dtype=complex)
    flags = []
    for comp, x in ((1j, alpha_true.imag), (1, alpha_true.real)):
        phase = 2 * lam * x
        if abs(phase) >= math.pi:
            flags.append("wrapped")
        pr = window_phase_distribution(window, phase)
        j = rng.choice(n, p=pr, size=trials)
        est += comp * (TWO_PI * wrapped_index(j, n) / n / (2 * lam))
    rms = float(np.sqrt(np.mean(np.abs(est - alpha_true) ** 2)))
    return CalibrationResult(alpha_true, [complex(z) for z in est], rms, flags, seed)
