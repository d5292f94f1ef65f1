"""Coherent state transform toolkit.

Truncated Fock-space simulation, Husimi sampling, Gaussian fast paths,
gate calibration, Q-function tomography and the discrete-register
transform, plus a small experiment harness (``qcst-lab``).
"""

from .fock import FockState, MultiModeState, make_coherent, vacuum, fock_basis
from .gaussian import GaussianModel, PhaseSampleSet, SqueezeParams, fit_squeezing
from .engine import QFunction, husimi_q_pure, sample_husimi, sample_q, qcst_circuit_verify, qgt_circuit_verify
from .tomography import MleConfig, mle_fit, padua_points, padua_interpolate, q_l1_distance
from .discrete import WindowRegister, make_window, discrete_qcst_amplitudes, discrete_qcst_error

__version__ = "0.1.0"

__all__ = [
    "FockState",
    "MultiModeState",
    "make_coherent",
    "vacuum",
    "fock_basis",
    "GaussianModel",
    "PhaseSampleSet",
    "SqueezeParams",
    "fit_squeezing",
    "QFunction",
    "husimi_q_pure",
    "sample_husimi",
    "sample_q",
    "qcst_circuit_verify",
    "qgt_circuit_verify",
    "MleConfig",
    "mle_fit",
    "padua_points",
    "padua_interpolate",
    "q_l1_distance",
    "WindowRegister",
    "make_window",
    "discrete_qcst_amplitudes",
    "discrete_qcst_error",
]
