"""Truncated Fock-space linear algebra.

Dense states and operators on a number basis cut at ``dim`` levels. This is
the reference simulator that every closed-form result in the package is
checked against, so it favours clarity over speed.

Conventions: ``a = (q + i p) / sqrt(2)``, ``D(alpha) = exp(alpha a^dag -
alpha^* a)``, ``S(xi) = exp((xi^* a^2 - xi a^dag^2) / 2)``. Multi-mode
coefficient tensors are row-major with mode 0 as the slowest index.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

NORM_TOL = 1e-9


def _check_finite(value: complex, name: str) -> None:
    if not np.isfinite(complex(value).real) or not np.isfinite(complex(value).imag):
        raise ValueError(f"{name} must be finite, got {value!r}")


def _check_dim(dim: int, minimum: int) -> None:
    if int(dim) != dim or dim < minimum:
        raise ValueError(f"dimension must be an integer >= {minimum}, got {dim!r}")


@dataclass(frozen=True)
class FockState:
    """Normalized pure state on a truncated number basis.

    ``deficit`` is the probability weight that was lost to truncation
    before renormalization (zero for states built from explicit
    coefficients).
    """

    coeffs: np.ndarray
    deficit: float = 0.0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).ravel()
        if c.size < 1:
            raise ValueError("a Fock state needs at least one level")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        norm = np.linalg.norm(c)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        c = c / norm
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def dim(self) -> int:
        return self.coeffs.size

    def padded(self, dim: int) -> "FockState":
        """Embed into a larger truncation (or drop trailing zeros)."""
        if dim >= self.dim:
            c = np.zeros(dim, dtype=complex)
            c[: self.dim] = self.coeffs
            return FockState(c, self.deficit)
        tail = self.coeffs[dim:]
        lost = float(np.vdot(tail, tail).real)
        if lost > 1e-12:
            raise ValueError(f"cannot truncate to {dim} levels, weight {lost:.3g} would be lost")
        return FockState(self.coeffs[:dim], self.deficit)

    def mean_photon(self) -> float:
        n = np.arange(self.dim)
        return float(np.sum(n * np.abs(self.coeffs) ** 2))

    def to_json(self) -> dict:
        return {"dim": self.dim, "coeffs": [[float(z.real), float(z.imag)] for z in self.coeffs]}

    @classmethod
    def from_json(cls, obj: dict) -> "FockState":
        coeffs = np.array([complex(re, im) for re, im in obj["coeffs"]])
        if "dim" in obj and int(obj["dim"]) != coeffs.size:
            raise ValueError(f"dim={obj['dim']} does not match {coeffs.size} coefficients")
        return cls(coeffs)


def fock_basis(n: int, dim: int) -> FockState:
    _check_dim(dim, 1)
    if not 0 <= n < dim:
        raise ValueError(f"level {n} outside truncation {dim}")
    c = np.zeros(dim, dtype=complex)
    c[n] = 1.0
    return FockState(c)


def vacuum(dim: int) -> FockState:
    return fock_basis(0, dim)


def make_coherent(alpha: complex, dim: int) -> FockState:
    """Truncated coherent state ``|alpha>``, renormalized after the cut."""
    _check_dim(dim, 1)
    _check_finite(alpha, "alpha")
    alpha = complex(alpha)
    if abs(alpha) ** 2 > dim / 4:
        warnings.warn(
            f"|alpha|^2 = {abs(alpha) ** 2:.3g} is large for dim={dim}; truncation error may be significant",
            stacklevel=2,
        )
    c = np.empty(dim, dtype=complex)
    c[0] = math.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, dim):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    kept = float(np.vdot(c, c).real)
    return FockState(c, deficit=max(0.0, 1.0 - kept))


@dataclass(frozen=True)
class MultiModeState:
    """Pure state on a product of truncated modes (mode 0 slowest)."""

    mode_dims: tuple[int, ...]
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.mode_dims)
        c = np.array(self.coeffs, dtype=complex).reshape(-1)
        if int(np.prod(dims)) != c.size:
            raise ValueError(f"mode dims {dims} need {int(np.prod(dims))} coefficients, got {c.size}")
        norm = np.linalg.norm(c)
        if abs(norm - 1) > NORM_TOL:
            raise ValueError(f"state norm {norm:.12g} differs from 1; use MultiModeState.normalized")
        c.setflags(write=False)
        object.__setattr__(self, "mode_dims", dims)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def normalized(cls, mode_dims: Sequence[int], coeffs) -> "MultiModeState":
        c = np.array(coeffs, dtype=complex).reshape(-1)
        return cls(tuple(mode_dims), c / np.linalg.norm(c))

    @classmethod
    def product(cls, *states: FockState) -> "MultiModeState":
        c = np.ones(1, dtype=complex)
        for s in states:
            c = np.kron(c, s.coeffs)
        return cls(tuple(s.dim for s in states), c)

    @property
    def tensor(self) -> np.ndarray:
        return self.coeffs.reshape(self.mode_dims)

    def reduced_density(self, mode: int) -> np.ndarray:
        t = np.moveaxis(self.tensor, mode, 0).reshape(self.mode_dims[mode], -1)
        return t @ t.conj().T


def canonical_matrices(dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return truncated ``(a, q, p, n)``."""
    _check_dim(dim, 2)
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)
    ad = a.conj().T
    q = (a + ad) / math.sqrt(2)
    p = (a - ad) / (1j * math.sqrt(2))
    n = ad @ a
    return a, q, p, n


def quadrature(tag: str, dim: int) -> np.ndarray:
    _, q, p, _ = canonical_matrices(dim)
    if tag == "q":
        return q
    if tag == "p":
        return p
    raise ValueError(f"quadrature tag must be 'q' or 'p', got {tag!r}")


def displacement_matrix(alpha: complex, dim: int) -> np.ndarray:
    _check_dim(dim, 2)
    _check_finite(alpha, "alpha")
    alpha = complex(alpha)
    if alpha == 0:
        return np.eye(dim, dtype=complex)
    a, *_ = canonical_matrices(dim)
    return expm(alpha * a.conj().T - alpha.conjugate() * a)


def squeeze_matrix(xi: complex, dim: int) -> np.ndarray:
    _check_dim(dim, 4)
    _check_finite(xi, "xi")
    xi = complex(xi)
    if xi == 0:
        return np.eye(dim, dtype=complex)
    if abs(xi) > 1.5:
        warnings.warn(f"|xi| = {abs(xi):.3g} > 1.5; truncation error may be significant", stacklevel=2)
    a, *_ = canonical_matrices(dim)
    ad = a.conj().T
    gen = 0.5 * (xi.conjugate() * (a @ a) - xi * (ad @ ad))
    u = expm(gen)
    # the generator only links equal parities; keep the zero pattern exact
    n = np.arange(dim)
    u[(n[:, None] + n[None, :]) % 2 == 1] = 0.0
    return u


def two_mode_sum_gate(g: float, quad_a: str, quad_b: str, dim_a: int, dim_b: int) -> np.ndarray:
    """``exp(i g A (x) B)`` for truncated quadratures ``A`` of mode a and ``B`` of mode b.

    Built from the eigenbases of the two Hermitian quadratures, so the
    result is unitary to machine precision and gates of the same family
    commute and add exactly.
    """
    _check_dim(dim_a, 2)
    _check_dim(dim_b, 2)
    ea, va = np.linalg.eigh(quadrature(quad_a, dim_a))
    eb, vb = np.linalg.eigh(quadrature(quad_b, dim_b))
    if g == 0:
        return np.eye(dim_a * dim_b, dtype=complex)
    phase = np.exp(1j * g * np.outer(ea, eb)).reshape(-1)
    v = np.kron(va, vb)
    return (v * phase) @ v.conj().T


def apply_to_modes(u: np.ndarray, state: MultiModeState, modes: int | Sequence[int]) -> MultiModeState:
    """Apply ``u`` to the listed modes (in the listed order) of ``state``."""
    modes = (modes,) if isinstance(modes, (int, np.integer)) else tuple(modes)
    nm = len(state.mode_dims)
    if len(set(modes)) != len(modes):
        raise ValueError(f"repeated mode index in {modes}")
    for m in modes:
        if not 0 <= m < nm:
            raise IndexError(f"mode {m} out of range for {nm} modes")
    sub = [state.mode_dims[m] for m in modes]
    k = int(np.prod(sub))
    if u.shape != (k, k):
        raise ValueError(f"operator shape {u.shape} does not match target dims {sub}")
    t = np.moveaxis(state.tensor, modes, range(len(modes)))
    rest = t.shape[len(modes):]
    out = (u @ t.reshape(k, -1)).reshape(tuple(sub) + rest)
    out = np.moveaxis(out, range(len(modes)), modes)
    return MultiModeState.normalized(state.mode_dims, out)


def project_mode(state: MultiModeState, mode: int, bra: FockState) -> tuple[np.ndarray, float]:
    """Contract ``mode`` with ``<bra|``.

    Returns the unnormalized coefficient tensor over the remaining modes
    together with its squared norm. Projecting the only mode returns a
    0-d array holding the overlap ``<bra|state>``.
    """
    if not 0 <= mode < len(state.mode_dims):
        raise IndexError(f"mode {mode} out of range")
    if bra.dim != state.mode_dims[mode]:
        raise ValueError(f"bra dim {bra.dim} does not match mode dim {state.mode_dims[mode]}")
    out = np.tensordot(bra.coeffs.conj(), state.tensor, axes=([0], [mode]))
    return out, float(np.vdot(out, out).real)


def hermite_functions(nmax: int, x: np.ndarray) -> np.ndarray:
    """Rows ``n = 0..nmax-1`` of normalized Hermite functions at ``x``."""
    x = np.asarray(x, dtype=float)
    h = np.zeros((nmax,) + x.shape)
    h[0] = np.pi ** -0.25 * np.exp(-x**2 / 2)
    if nmax > 1:
        h[1] = math.sqrt(2) * x * h[0]
    for n in range(1, nmax - 1):
        h[n + 1] = math.sqrt(2 / (n + 1)) * x * h[n] - math.sqrt(n / (n + 1)) * h[n - 1]
    return h


def position_wavefunction(state: FockState, q_grid) -> np.ndarray:
    q_grid = np.asarray(q_grid, dtype=float)
    if q_grid.size == 0:
        raise ValueError("empty grid")
    return state.coeffs @ hermite_functions(state.dim, q_grid)


def momentum_basis(nmax: int, p_grid) -> np.ndarray:
    """``<p|n>`` for ``n < nmax``, shape ``(nmax, len(p_grid))``."""
    return (-1j) ** np.arange(nmax)[:, None] * hermite_functions(nmax, p_grid)


def momentum_wavefunction(state: FockState, p_grid) -> np.ndarray:
    p_grid = np.asarray(p_grid, dtype=float)
    if p_grid.size == 0:
        raise ValueError("empty grid")
    if not np.all(np.isfinite(p_grid)):
        raise ValueError("grid must be finite")
    if np.any(np.diff(p_grid) < 0):
        raise ValueError("grid must be sorted")
    return state.coeffs @ momentum_basis(state.dim, p_grid)


def expectation(op: np.ndarray, state: FockState | MultiModeState) -> complex:
    c = state.coeffs
    return complex(np.vdot(c, op @ c))


def safe_block(dim: int) -> slice:
    """Levels kept when asserting tolerances: drops the top ceil(dim/8)."""
    return slice(0, dim - math.ceil(dim / 8))
