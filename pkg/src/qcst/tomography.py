"""Husimi Q-function tomography.

Two reconstructions are provided: maximum likelihood over pure states with
a Fock cutoff, fitted to Husimi samples, and the pointwise baseline that
estimates ``Q`` at Padua points from binary outcomes and interpolates.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .engine import QFunction, husimi_q_pure
from .fock import FockState, make_coherent
from .gaussian import PhaseSampleSet

log = logging.getLogger(__name__)

Q_FLOOR = 1e-300


@dataclass(frozen=True)
class MleConfig:
    gamma: int = 32
    max_iters: int = 3000
    gtol: float = 1e-7
    restarts: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.gamma < 1:
            raise ValueError("Fock cutoff must be at least 1")
        if self.restarts < 0 or self.max_iters < 1:
            raise ValueError("restarts must be >= 0 and max_iters >= 1")


@dataclass
class ReconstructionReport:
    psi_hat: FockState
    neg_log_likelihood: float
    l1_error: float | None = None
    fidelity: float | None = None
    iterations: int = 0
    floored: int = 0
    history: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "psi_hat": self.psi_hat.to_json(),
            "neg_log_likelihood": self.neg_log_likelihood,
            "l1_error": self.l1_error,
            "fidelity": self.fidelity,
            "iterations": self.iterations,
            "floored": self.floored,
        }


def design_matrix(alpha: np.ndarray, gamma: int) -> np.ndarray:
    """Rows ``<alpha_j|k>`` for ``k < gamma``."""
    alpha = np.asarray(alpha, dtype=complex).reshape(-1, 1)
    k = np.arange(gamma)
    with np.errstate(divide="ignore", invalid="ignore"):
        logmag = k * np.log(np.abs(alpha)) - 0.5 * gammaln(k + 1) - 0.5 * np.abs(alpha) ** 2
    out = np.exp(logmag) * np.exp(-1j * k * np.angle(alpha))
    out[:, 0] = np.exp(-0.5 * np.abs(alpha[:, 0]) ** 2)
    return out


def neg_log_likelihood(psi: np.ndarray, phi: np.ndarray) -> tuple[float, int]:
    """Mean negative log Q over the samples for coefficient vector ``psi`` (not renormalized)."""
    q = np.abs(phi @ psi) ** 2 / math.pi
    low = q < Q_FLOOR
    return float(-np.mean(np.log(np.where(low, Q_FLOOR, q)))), int(np.count_nonzero(low))


def nll_gradient(psi: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Gradient ``d/dRe + i d/dIm`` of :func:`neg_log_likelihood`."""
    f = phi @ psi
    f = np.where(np.abs(f) ** 2 / math.pi < Q_FLOOR, math.sqrt(math.pi * Q_FLOOR), f)
    return -(2.0 / phi.shape[0]) * (phi.conj().T @ (1.0 / f.conj()))


def gauge_fix(c: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(c)))
    return c * np.exp(-1j * np.angle(c[k]))


def _descend(psi: np.ndarray, phi: np.ndarray, cfg: MleConfig) -> tuple[np.ndarray, float, int, list]:
    """Projected gradient descent on the unit sphere with Armijo backtracking.

    Trial steps start from a Barzilai-Borwein length; backtracking keeps the
    objective non-increasing.
    """
    psi = psi / np.linalg.norm(psi)
    val, _ = neg_log_likelihood(psi, phi)
    g = nll_gradient(psi, phi)
    g -= np.vdot(psi, g).real * psi
    step = 1.0
    history = [val]
    it = 0
    for it in range(1, cfg.max_iters + 1):
        gn2 = np.vdot(g, g).real
        if math.sqrt(gn2) < cfg.gtol:
            break
        t = step
        while True:
            cand = psi - t * g
            cand /= np.linalg.norm(cand)
            cval, _ = neg_log_likelihood(cand, phi)
            if cval <= val - 1e-4 * t * gn2 or t < 1e-14:
                break
            t *= 0.5
        if cval > val:
            break
        gnew = nll_gradient(cand, phi)
        gnew -= np.vdot(cand, gnew).real * cand
        s = cand - psi
        y = gnew - g
        sy = np.vdot(s, y).real
        step = np.vdot(s, s).real / sy if sy > 1e-300 else 2 * t
        step = min(max(step, 1e-6), 1e3)
        improved = val - cval
        psi, val, g = cand, cval, gnew
        history.append(val)
        if improved < 1e-13 * max(1.0, abs(val)):
            break
    return psi, val, it, history


def _informed_start(samples: np.ndarray, gamma: int) -> np.ndarray:
    # the Husimi mean equals <a>; start from the coherent state there
    mean = complex(np.mean(samples))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return make_coherent(mean, gamma).coeffs.copy() if gamma > 1 else np.ones(1, dtype=complex)


def mle_fit(samples: PhaseSampleSet, cfg: MleConfig = MleConfig(), truth: FockState | None = None,
            l1_radius: float = 5.0, l1_step: float = 0.05) -> ReconstructionReport:
    """Pure-state maximum-likelihood fit of the Husimi function to samples."""
    m = len(samples)
    if m == 0:
        raise ValueError("empty sample set")
    if m < cfg.gamma:
        warnings.warn(f"{m} samples for {cfg.gamma} unknown amplitudes", stacklevel=2)
    if np.ptp(samples.samples.real) == 0 and np.ptp(samples.samples.imag) == 0:
        warnings.warn("all samples coincide; the fit is degenerate", stacklevel=2)
    phi = design_matrix(samples.samples, cfg.gamma)
    rng = np.random.default_rng(cfg.seed)
    starts = [_informed_start(samples.samples, cfg.gamma)]
    for _ in range(cfg.restarts):
        starts.append(rng.standard_normal(cfg.gamma) + 1j * rng.standard_normal(cfg.gamma))
    best = None
    for k, s in enumerate(starts):
        psi, val, iters, hist = _descend(s, phi, cfg)
        log.debug("start %d: nll=%.8f after %d iterations", k, val, iters)
        if best is None or val < best[1]:
            best = (psi, val, iters, hist)
    psi, val, iters, hist = best
    _, floored = neg_log_likelihood(psi, phi)
    psi_hat = FockState(gauge_fix(psi))
    report = ReconstructionReport(psi_hat, val, iterations=iters, floored=floored, history=hist)
    if truth is not None:
        dim = max(truth.dim, psi_hat.dim)
        a, b = truth.padded(dim).coeffs, psi_hat.padded(dim).coeffs
        report.fidelity = float(min(1.0, abs(np.vdot(a, b)) ** 2))
        report.l1_error = q_l1_distance(truth, psi_hat, l1_radius, l1_step)
    return report


@dataclass(frozen=True)
class PaduaGrid:
    degree: int
    points: np.ndarray
    radius: float
    weights: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.points.size

    @property
    def unit(self) -> np.ndarray:
        return np.column_stack([self.points.real, self.points.imag]) / self.radius


def padua_points(n: int, radius: float) -> PaduaGrid:
    """First-family Padua points of degree ``n`` scaled to ``[-R, R]^2``.

    ``(cos(j pi/n), cos(k pi/(n+1)))`` with ``j + k`` even, together with the
    cubature weights of the interpolation formula.
    """
    if n < 1 or radius <= 0:
        raise ValueError("need degree >= 1 and radius > 0")
    pts, wts = [], []
    for j in range(n + 1):
        for k in range(n + 2):
            if (j + k) % 2:
                continue
            x, y = math.cos(j * math.pi / n), math.cos(k * math.pi / (n + 1))
            edges = (j in (0, n)) + (k in (0, n + 1))
            wts.append({0: 2.0, 1: 1.0, 2: 0.5}[edges] / (n * (n + 1)))
            pts.append(complex(x, y))
    return PaduaGrid(n, radius * np.array(pts), float(radius), np.array(wts))


def _cheb_normalized(n: int, x: np.ndarray) -> np.ndarray:
    """``sqrt(2) T_k(x)`` for ``k >= 1`` and ``1`` for ``k = 0``; shape ``(len(x), n+1)``."""
    t = np.cos(np.outer(np.arccos(np.clip(x, -1, 1)), np.arange(n + 1)))
    t[:, 1:] *= math.sqrt(2)
    return t


class PaduaInterpolant:
    """Degree-``n`` Padua interpolant held as a Chebyshev coefficient matrix.

    Outside the square the interpolant is reported as zero.
    """

    def __init__(self, grid: PaduaGrid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (len(grid),):
            raise ValueError(f"expected {len(grid)} values, got shape {values.shape}")
        n = grid.degree
        u = grid.unit
        t1, t2 = _cheb_normalized(n, u[:, 0]), _cheb_normalized(n, u[:, 1])
        coef = (t1 * (grid.weights * values)[:, None]).T @ t2
        coef[np.add.outer(np.arange(n + 1), np.arange(n + 1)) > n] = 0.0
        coef[n, 0] *= 0.5
        self.grid = grid
        self.coef = coef

    def __call__(self, alpha):
        a = np.asarray(alpha, dtype=complex)
        shape = a.shape
        x = a.real.ravel() / self.grid.radius
        y = a.imag.ravel() / self.grid.radius
        n = self.grid.degree
        val = np.einsum("ij,jk,ik->i", _cheb_normalized(n, x), self.coef, _cheb_normalized(n, y))
        inside = (np.abs(x) <= 1 + 1e-12) & (np.abs(y) <= 1 + 1e-12)
        out = np.where(inside, val, 0.0).reshape(shape)
        return float(out) if out.ndim == 0 else out


def padua_interpolate(grid: PaduaGrid, values) -> PaduaInterpolant:
    return PaduaInterpolant(grid, values)


def pointwise_estimate(psi: FockState, grid: PaduaGrid, shots_per_point: int, seed=None,
                       rng: np.random.Generator | None = None) -> np.ndarray:
    """Binary-outcome estimate of ``Q`` at each grid point.

    Each shot succeeds with probability ``|<alpha|psi>|^2``; the success
    fraction divided by ``pi`` estimates ``Q(alpha)``.
    """
    if shots_per_point < 1:
        raise ValueError("need at least one shot per point")
    rng = np.random.default_rng(seed) if rng is None else rng
    prob = np.clip(math.pi * husimi_q_pure(psi, grid.points), 0.0, 1.0)
    return rng.binomial(shots_per_point, prob) / shots_per_point / math.pi


def _as_callable(q) -> Callable:
    if callable(q) and not isinstance(q, (FockState,)):
        return q
    return QFunction.of(q)


def q_l1_distance(q_true, q_hat, radius: float, step: float) -> float:
    """Midpoint-rule ``int |Q - max(Q_hat, 0)|`` over ``[-R, R]^2``."""
    if step <= 0:
        raise ValueError("step must be positive")
    qa, qb = _as_callable(q_true), _as_callable(q_hat)
    n = int(round(2 * radius / step))
    h = 2 * radius / n
    x = -radius + h * (np.arange(n) + 0.5)
    alpha = x[:, None] + 1j * x[None, :]
    diff = np.abs(np.asarray(qa(alpha)) - np.maximum(np.asarray(qb(alpha)), 0.0))
    return float(np.sum(diff) * h * h)


def write_q_grid(path, q_true, q_hat, radius: float, step: float) -> None:
    """Dense ``re,im,q_true,q_hat`` table for plotting."""
    qa, qb = _as_callable(q_true), _as_callable(q_hat)
    n = int(round(2 * radius / step))
    x = -radius + (2 * radius / n) * (np.arange(n) + 0.5)
    alpha = (x[:, None] + 1j * x[None, :]).ravel()
    ta, tb = np.asarray(qa(alpha)), np.asarray(qb(alpha))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re", "im", "q_true", "q_hat"])
        for z, a, b in zip(alpha, ta, tb):
            w.writerow([repr(float(z.real)), repr(float(z.imag)), repr(float(a)), repr(float(b))])
