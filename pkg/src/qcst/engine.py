"""Coherent state transform: exact Husimi Q evaluation, Husimi sampling and
brute-force checks of the three-mode transform circuits.

The transform maps ``|0>|0>|psi>`` to a state whose joint momentum
amplitude over the two ancillas is ``<alpha|psi> / (2 sqrt(pi))`` with
``alpha = (p1 + i p2) / 2``, leaving the third mode in vacuum. Momentum
kets are never built; amplitudes are compared on a grid.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaincc

from .fock import (
    FockState,
    MultiModeState,
    apply_to_modes,
    momentum_basis,
    project_mode,
    squeeze_matrix,
    two_mode_sum_gate,
    vacuum,
)
from .gaussian import GaussianModel, PhaseSampleSet, gaussian_q_eval, sample_gaussian

MIN_ACCEPTANCE = 1e-4
AMP_NORM = 1 / (2 * math.sqrt(math.pi))

SQRT2 = math.sqrt(2)


def coherent_overlap(psi: FockState, alpha) -> np.ndarray:
    """``<alpha|psi>`` evaluated by Horner's rule in ``conj(alpha)``."""
    a = np.asarray(alpha, dtype=complex)
    z = a.conj()
    c = psi.coeffs
    acc = np.full(a.shape, c[-1], dtype=complex)
    for k in range(c.size - 1, 0, -1):
        acc = acc * z / math.sqrt(k) + c[k - 1]
    return np.exp(-0.5 * np.abs(a) ** 2) * acc


def husimi_q_pure(psi: FockState, alpha):
    """``Q(alpha) = |<alpha|psi>|^2 / pi``."""
    q = np.abs(coherent_overlap(psi, alpha)) ** 2 / math.pi
    return float(q) if np.ndim(q) == 0 else q


@dataclass(frozen=True)
class QFunction:
    """A Husimi function backed either by Fock coefficients or a Gaussian model."""

    kind: str
    payload: FockState | GaussianModel

    def __post_init__(self):
        expected = {"pure-fock": FockState, "gaussian": GaussianModel}
        if self.kind not in expected:
            raise ValueError(f"unknown Q-function kind {self.kind!r}")
        if not isinstance(self.payload, expected[self.kind]):
            raise TypeError(f"{self.kind} Q-function needs a {expected[self.kind].__name__}")

    @classmethod
    def of(cls, obj) -> "QFunction":
        if isinstance(obj, QFunction):
            return obj
        if isinstance(obj, FockState):
            return cls("pure-fock", obj)
        if isinstance(obj, GaussianModel):
            return cls("gaussian", obj)
        raise TypeError(f"cannot build a Q-function from {type(obj).__name__}")

    def __call__(self, alpha):
        if self.kind == "pure-fock":
            return husimi_q_pure(self.payload, alpha)
        return gaussian_q_eval(self.payload, alpha)


def leaked_mass_bound(psi: FockState, radius: float) -> float:
    """Exact Q mass outside the disk ``|alpha| > radius``.

    The disk is inscribed in the sampling square, so this bounds the mass
    the square misses. Cross terms vanish by rotational symmetry, leaving
    ``sum_k |psi_k|^2 Gamma(k+1, R^2)/k!``.
    """
    k = np.arange(psi.dim)
    return float(np.sum(np.abs(psi.coeffs) ** 2 * gammaincc(k + 1, radius**2)))


def sampling_radius(psi: FockState) -> float:
    return math.sqrt(2 * psi.mean_photon() + 1) + 4


def sample_husimi(psi: FockState, m: int, seed=None, rng: np.random.Generator | None = None) -> PhaseSampleSet:
    """Draw ``m`` samples with density ``Q`` by rejection from a uniform square.

    The acceptance probability of a proposal is ``pi Q(alpha) <= 1``.
    """
    if m < 0:
        raise ValueError("sample count must be non-negative")
    radius = sampling_radius(psi)
    leak = leaked_mass_bound(psi, radius)
    rate = math.pi / (4 * radius**2) * (1 - leak)
    meta = {"radius": radius, "leaked_mass_bound": leak, "expected_acceptance": rate}
    if rate < MIN_ACCEPTANCE:
        raise RuntimeError(
            f"expected acceptance {rate:.2e} is below {MIN_ACCEPTANCE:g}; "
            "use the Gaussian fast path or shift the state towards the origin"
        )
    rng = np.random.default_rng(seed) if rng is None else rng
    out = []
    have = 0
    while have < m:
        batch = max(1024, math.ceil(1.25 * (m - have) / rate))
        prop = rng.uniform(-radius, radius, size=(batch, 2))
        u = rng.uniform(size=batch)
        alpha = prop[:, 0] + 1j * prop[:, 1]
        keep = alpha[u < math.pi * husimi_q_pure(psi, alpha)]
        out.append(keep)
        have += keep.size
    samples = np.concatenate(out)[:m] if out else np.empty(0, dtype=complex)
    return PhaseSampleSet(samples, seed=seed, source="rejection", meta=meta)


def sample_q(qfunc, m: int, seed=None, rng: np.random.Generator | None = None) -> PhaseSampleSet:
    """Husimi sampling dispatched on the Q-function backing."""
    qfunc = QFunction.of(qfunc)
    if qfunc.kind == "gaussian":
        return sample_gaussian(qfunc.payload, m, seed=seed, rng=rng)
    return sample_husimi(qfunc.payload, m, seed=seed, rng=rng)


def qcst_analytic_amplitude(psi: FockState, p1, p2):
    """Joint momentum amplitude density of the transformed ancillas."""
    alpha = (np.asarray(p1) + 1j * np.asarray(p2)) / 2
    return AMP_NORM * coherent_overlap(psi, alpha)


def qgt_analytic_amplitude(psi: FockState, r: float, p1, p2, work_dim: int | None = None):
    """Amplitude ``<alpha, r|psi> / (2 sqrt(pi))`` with ``<alpha, r| = <alpha| S(r)^dag``."""
    if r == 0:
        return qcst_analytic_amplitude(psi, p1, p2)
    work_dim = work_dim or max(96, 2 * psi.dim)
    s = squeeze_matrix(r, work_dim)
    rotated = FockState(s.conj().T @ psi.padded(work_dim).coeffs)
    return qcst_analytic_amplitude(rotated, p1, p2)


@dataclass
class QcstVerificationReport:
    p_grid: list
    max_amp_error: float
    ancilla_reset_fidelity: float
    per_mode_dim: int
    squeeze_r: float = 0.0
    reliable: bool = True
    gates: list = field(default_factory=list)

    @property
    def grid(self) -> list[tuple[float, float]]:
        return [(a, b) for a in self.p_grid for b in self.p_grid]

    def to_json(self) -> dict:
        return asdict(self)


def qcst_gates(r: float = 0.0) -> list[tuple[float, str, str, int]]:
    """Gate list ``(g, quad_ancilla, quad_target, ancilla_mode)`` acting as ``exp(i g A B)``.

    The last entry couples ``p`` of the first ancilla to ``p`` of the target;
    with that choice the last three gates compose to ``D(-alpha)`` on the
    target and reset it.
    """
    er, emr = math.exp(r), math.exp(-r)
    return [
        (er / SQRT2, "q", "q", 0),
        (SQRT2 * emr, "q", "p", 1),
        (er / SQRT2, "q", "q", 0),
        (emr / (2 * SQRT2), "p", "p", 0),
        (-er / SQRT2, "p", "q", 1),
        (emr / (2 * SQRT2), "p", "p", 0),
    ]


def run_transform_circuit(psi: FockState, per_mode_dim: int, r: float = 0.0) -> MultiModeState:
    d = per_mode_dim
    state = MultiModeState.product(vacuum(d), vacuum(d), psi.padded(d))
    for g, qa, qb, anc in qcst_gates(r):
        state = apply_to_modes(two_mode_sum_gate(g, qa, qb, d, d), state, (anc, 2))
    return state


def _verify(psi: FockState, per_mode_dim: int, p_grid, r: float) -> QcstVerificationReport:
    p_grid = np.asarray(p_grid, dtype=float)
    d = per_mode_dim
    final = run_transform_circuit(psi, d, r)
    if r == 0:
        reset = vacuum(d)
    else:
        work = max(64, 2 * d)
        reset = FockState(squeeze_matrix(r, work)[:, 0][:d])
    ancillas, fidelity = project_mode(final, 2, reset)
    basis = momentum_basis(d, p_grid)
    amp = basis.T @ ancillas @ basis
    pp1, pp2 = np.meshgrid(p_grid, p_grid, indexing="ij")
    ref = qgt_analytic_amplitude(psi, r, pp1, pp2)
    k = np.unravel_index(np.argmax(np.abs(ref)), ref.shape)
    gauge = ref[k] / amp[k]
    gauge /= abs(gauge)
    err = float(np.max(np.abs(amp * gauge - ref)))
    return QcstVerificationReport(
        p_grid=p_grid.tolist(),
        max_amp_error=err,
        ancilla_reset_fidelity=min(1.0, fidelity),
        per_mode_dim=d,
        squeeze_r=r,
        reliable=fidelity >= 0.9,
        gates=[list(g) for g in qcst_gates(r)],
    )


def qcst_circuit_verify(psi: FockState, per_mode_dim: int, p_grid) -> QcstVerificationReport:
    """Simulate the six-gate transform circuit and compare with the closed form."""
    if per_mode_dim < 8:
        raise ValueError("per_mode_dim must be at least 8")
    return _verify(psi, per_mode_dim, p_grid, 0.0)


def qgt_circuit_verify(psi: FockState, r: float, per_mode_dim: int, p_grid) -> QcstVerificationReport:
    """Same check for the squeezed (Gaussian) transform with reset target ``S(r)|0>``."""
    if abs(r) > 0.7:
        raise ValueError("|r| must be at most 0.7 for a trustworthy truncation")
    if r != 0 and per_mode_dim < 16:
        raise ValueError("per_mode_dim must be at least 16 for r != 0")
    if r == 0:
        return qcst_circuit_verify(psi, per_mode_dim, p_grid)
    return _verify(psi, per_mode_dim, p_grid, r)
