"""Gaussian Husimi Q-functions: evaluation, sampling, moment estimates and
the squeezed-coherent fit used for single-mode squeezing calibration.

Phase-space points are handled as complex numbers ``alpha`` and, where a
real vector is needed, as ``(Re alpha, Im alpha)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

VACUUM_VAR = 0.25


@dataclass(frozen=True)
class GaussianModel:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(2)
        sigma = np.array(self.sigma, dtype=float).reshape(2, 2)
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise ValueError("model parameters must be finite")
        if np.max(np.abs(sigma - sigma.T)) > 1e-12:
            raise ValueError("covariance must be symmetric")
        sigma = 0.5 * (sigma + sigma.T)
        mu.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def is_physical(self) -> bool:
        """Whether the covariance respects the vacuum floor of a Husimi function."""
        return bool(np.min(np.linalg.eigvalsh(self.sigma)) >= VACUUM_VAR - 1e-9)

    @classmethod
    def coherent(cls, beta: complex) -> "GaussianModel":
        return cls([beta.real, beta.imag], 0.5 * np.eye(2))


@dataclass(frozen=True)
class SqueezeParams:
    xi: complex
    alpha0: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha0) and np.isfinite(complex(self.xi).real) and np.isfinite(complex(self.xi).imag)):
            raise ValueError("squeeze parameters must be finite")
        if self.alpha0 < 0:
            raise ValueError("alpha0 must be non-negative")
        object.__setattr__(self, "xi", complex(self.xi))
        object.__setattr__(self, "alpha0", float(self.alpha0))

    @property
    def r(self) -> float:
        return abs(self.xi)

    @property
    def theta(self) -> float:
        return float(np.angle(self.xi)) % (2 * math.pi)


@dataclass(frozen=True)
class PhaseSampleSet:
    """Ordered phase-space samples with their provenance."""

    samples: np.ndarray
    seed: object = None
    source: str = "external-file"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s = np.array(self.samples, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def points(self) -> np.ndarray:
        """Samples as an ``(M, 2)`` real array."""
        return np.column_stack([self.samples.real, self.samples.imag])

    def to_csv(self, path, sidecar: bool = True) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["re", "im"])
            for z in self.samples:
                w.writerow([repr(float(z.real)), repr(float(z.imag))])
        if sidecar:
            meta = {"seed": self.seed, "source": self.source, "count": len(self), **self.meta}
            path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path) -> "PhaseSampleSet":
        path = Path(path)
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [h.strip() for h in rows[0]] != ["re", "im"]:
            raise ValueError(f"{path}: expected header 're,im'")
        data = [complex(float(a), float(b)) for a, b in rows[1:]]
        seed, source = None, "external-file"
        side = path.with_suffix(path.suffix + ".json")
        if side.exists():
            meta = json.loads(side.read_text())
            seed = meta.get("seed")
        return cls(np.array(data, dtype=complex), seed=seed, source=source)


def _as_points(alpha) -> np.ndarray:
    a = np.asarray(alpha, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1)


def gaussian_q_eval(model: GaussianModel, alpha):
    """Bivariate normal density of ``(Re alpha, Im alpha)``."""
    evals = np.linalg.eigvalsh(model.sigma)
    if evals[0] <= 0:
        raise np.linalg.LinAlgError(f"covariance is not positive definite (eigenvalues {evals})")
    d = _as_points(alpha) - model.mu
    inv = np.linalg.inv(model.sigma)
    quad = np.einsum("...i,ij,...j->...", d, inv, d)
    out = np.exp(-0.5 * quad) / (2 * math.pi * math.sqrt(np.linalg.det(model.sigma)))
    return float(out) if np.ndim(out) == 0 else out


def _half_rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


def model_arrays(xi: complex, alpha0: float) -> tuple[np.ndarray, np.ndarray]:
    """Husimi mean and covariance of ``S(xi)|alpha0>`` for real ``alpha0``."""
    r, theta = abs(xi), float(np.angle(xi))
    rot = _half_rotation(theta)
    mu = rot @ np.array([alpha0 * math.exp(-r) * math.cos(theta / 2), -alpha0 * math.exp(r) * math.sin(theta / 2)])
    diag = np.diag([(1 + math.exp(-2 * r)) / 4, (1 + math.exp(2 * r)) / 4])
    return mu, rot @ diag @ rot.T


def squeezed_coherent_model(params: SqueezeParams) -> GaussianModel:
    mu, sigma = model_arrays(params.xi, params.alpha0)
    return GaussianModel(mu, sigma)


def sample_gaussian(model: GaussianModel, m: int, seed=None, rng: np.random.Generator | None = None) -> PhaseSampleSet:
    """Draw ``m`` i.i.d. points through the Cholesky factor of the covariance."""
    if m < 0:
        raise ValueError("sample count must be non-negative")
    chol = np.linalg.cholesky(model.sigma)
    rng = np.random.default_rng(seed) if rng is None else rng
    z = rng.standard_normal((m, 2))
    pts = model.mu + z @ chol.T
    return PhaseSampleSet(pts[:, 0] + 1j * pts[:, 1], seed=seed, source="analytic-gaussian")


def estimate_moments(samples: PhaseSampleSet) -> GaussianModel:
    """Sample mean and unbiased (``1/(M-1)``) sample covariance."""
    m = len(samples)
    if m < 2:
        raise ValueError(f"need at least 2 samples for a covariance, got {m}")
    pts = samples.points
    mu = pts.mean(axis=0)
    d = pts - mu
    sigma = d.T @ d / (m - 1)
    return GaussianModel(mu, sigma)


@dataclass(frozen=True)
class SqueezeFit:
    xi: complex
    loss: float


def squeeze_loss(xi: complex, alpha0: float, mu_t: np.ndarray, sigma_t: np.ndarray) -> float:
    mu, sigma = model_arrays(xi, alpha0)
    return float(np.linalg.norm(mu - mu_t) + np.linalg.norm(sigma - sigma_t, "fro"))


def _grid_losses(rs: np.ndarray, thetas: np.ndarray, alpha0: float, mu_t, sigma_t) -> np.ndarray:
    r = rs[:, None]
    h = thetas[None, :] / 2
    c, s = np.cos(h), np.sin(h)
    u = alpha0 * np.exp(-r) * c
    v = -alpha0 * np.exp(r) * s
    mx, my = c * u - s * v, s * u + c * v
    a, b = (1 + np.exp(-2 * r)) / 4, (1 + np.exp(2 * r)) / 4
    sxx = a * c**2 + b * s**2
    syy = a * s**2 + b * c**2
    sxy = (a - b) * c * s
    lm = np.hypot(mx - mu_t[0], my - mu_t[1])
    ls = np.sqrt((sxx - sigma_t[0, 0]) ** 2 + (syy - sigma_t[1, 1]) ** 2 + (sxy - sigma_t[0, 1]) ** 2 + (sxy - sigma_t[1, 0]) ** 2)
    return lm + ls


def fit_squeezing(mu_t, sigma_t, alpha0: float, r_max: float = 1.0, grid: int = 64, starts: int = 4) -> SqueezeFit:
    """Least-loss ``xi`` with ``|xi| <= r_max`` for estimated Husimi moments.

    A ``grid x grid`` polar scan seeds Nelder-Mead refinements in Cartesian
    ``(Re xi, Im xi)`` from the ``starts`` best cells; each refinement is
    restarted once from its own end point because the simplex can stall on
    the kinks of the loss. The disk constraint is kept by radial clipping.
    Ties go to the smaller angle.
    """
    mu_t = np.asarray(mu_t, dtype=float).reshape(2)
    sigma_t = np.asarray(sigma_t, dtype=float).reshape(2, 2)
    if not (np.all(np.isfinite(mu_t)) and np.all(np.isfinite(sigma_t)) and np.isfinite(alpha0)):
        raise ValueError("fit inputs must be finite")
    if alpha0 <= 0:
        raise ValueError("alpha0 must be positive")

    rs = np.linspace(0.0, r_max, grid)
    thetas = np.arange(grid) * (2 * math.pi / grid)
    losses = _grid_losses(rs, thetas, alpha0, mu_t, sigma_t)
    # stable sort keeps row-major order on ties, i.e. smaller r then smaller theta
    order = np.argsort(losses, axis=None, kind="stable")[:starts]

    def clip(x):
        z = complex(x[0], x[1])
        return z if abs(z) <= r_max else z * (r_max / abs(z))

    def f(x):
        return squeeze_loss(clip(x), alpha0, mu_t, sigma_t)

    best = None
    for flat in order:
        i, j = np.unravel_index(flat, losses.shape)
        z = rs[i] * np.exp(1j * thetas[j])
        h = rs[1] - rs[0]
        for _ in range(2):
            res = minimize(
                f,
                [z.real, z.imag],
                method="Nelder-Mead",
                options={"xatol": 1e-11, "fatol": 1e-14, "maxiter": 4000, "initial_simplex": _simplex(z, h)},
            )
            z, h = complex(*res.x), 1e-3
        if best is None or res.fun < best[1] - 1e-15:
            best = (clip(res.x), float(res.fun))
    xi = best[0]
    return SqueezeFit(xi=xi, loss=squeeze_loss(xi, alpha0, mu_t, sigma_t))


def _simplex(z: complex, h: float) -> np.ndarray:
    return np.array([[z.real, z.imag], [z.real + h, z.imag], [z.real, z.imag + h]])
