import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import kstest

from qcst.engine import (
    QFunction,
    coherent_overlap,
    husimi_q_pure,
    leaked_mass_bound,
    qcst_analytic_amplitude,
    qcst_circuit_verify,
    qcst_gates,
    qgt_analytic_amplitude,
    qgt_circuit_verify,
    sample_husimi,
    sample_q,
    sampling_radius,
)
from qcst.fock import FockState, displacement_matrix, fock_basis, make_coherent, vacuum
from qcst.gaussian import GaussianModel, SqueezeParams, squeezed_coherent_model

FIG3 = FockState([0.5, 0, 1j / math.sqrt(2), 0, 0.5])
P_GRID = np.arange(-3, 3.0001, 0.5)


STATES = {
    "vacuum": vacuum(1),
    "fock1": fock_basis(1, 2),
    "coherent": make_coherent(0.5, 16),
    "fig3": FIG3,
    "fock13": FockState([0, 1, 0, 1]),
    "coherent1.5": make_coherent(1.5, 32),
}


def grid_integral(f, half, step):
    x = np.arange(-half, half + step / 2, step)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    vals = f(xx + 1j * yy)
    return np.trapezoid(np.trapezoid(vals, x, axis=1), x)


class TestHusimi:
    def test_vacuum_peak(self):
        assert husimi_q_pure(vacuum(3), 0) == pytest.approx(1 / math.pi)

    @given(st.complex_numbers(max_magnitude=4, allow_nan=False))
    @settings(max_examples=50)
    def test_one_photon(self, a):
        expected = math.exp(-abs(a) ** 2) * abs(a) ** 2 / math.pi
        assert husimi_q_pure(fock_basis(1, 3), a) == pytest.approx(expected, abs=1e-14)

    def test_overlap_matches_displaced_vacuum(self):
        rng = np.random.default_rng(0)
        psi = FockState(rng.standard_normal(10) + 1j * rng.standard_normal(10))
        for a in (0.3 - 0.2j, -1.1 + 0.7j):
            ket = displacement_matrix(a, 64)[:, 0]
            assert coherent_overlap(psi, a) == pytest.approx(np.vdot(ket, psi.padded(64).coeffs), abs=1e-10)

    def test_fig3_normalization(self):
        assert grid_integral(lambda a: husimi_q_pure(FIG3, a), 5, 0.05) == pytest.approx(1, abs=1e-4)

    @pytest.mark.parametrize("name", list(STATES))
    def test_normalization_all_states(self, name):
        assert grid_integral(lambda a: husimi_q_pure(STATES[name], a), 7, 0.05) == pytest.approx(1, abs=1e-3)

    @pytest.mark.parametrize("name", list(STATES))
    def test_bounded_by_one_over_pi(self, name):
        rng = np.random.default_rng(1)
        pts = rng.uniform(-4, 4, 10_000) + 1j * rng.uniform(-4, 4, 10_000)
        q = husimi_q_pure(STATES[name], pts)
        assert np.all(q >= 0)
        assert np.max(q) <= 1 / math.pi + 1e-12

    def test_global_phase_invisible(self):
        pts = np.array([0.2, 1j, -0.5 + 0.3j])
        assert np.allclose(husimi_q_pure(FIG3, pts), husimi_q_pure(FockState(FIG3.coeffs * 1j), pts))


class TestQFunction:
    def test_dispatch(self):
        assert QFunction.of(vacuum(2))(0) == pytest.approx(1 / math.pi)
        assert QFunction.of(GaussianModel.coherent(0))(0) == pytest.approx(1 / math.pi)

    def test_kind_checked(self):
        with pytest.raises(ValueError):
            QFunction("mixed", vacuum(1))
        with pytest.raises(TypeError):
            QFunction("gaussian", vacuum(1))
        with pytest.raises(TypeError):
            QFunction.of(3.0)

    def test_gaussian_and_fock_agree_for_coherent(self):
        pts = np.array([0.5, 1 + 1j, -0.3j])
        assert np.allclose(QFunction.of(make_coherent(0.8, 32))(pts), QFunction.of(GaussianModel.coherent(0.8))(pts))


class TestSampling:
    def test_empty(self):
        assert len(sample_husimi(vacuum(1), 0, seed=0)) == 0

    def test_negative_count(self):
        with pytest.raises(ValueError):
            sample_husimi(vacuum(1), -1)

    def test_coherent_variance(self):
        beta = 0.7 - 0.4j
        s = sample_husimi(make_coherent(beta, 24), 100_000, seed=3).samples - beta
        assert np.var(s.real, ddof=1) == pytest.approx(0.5, rel=0.03)
        assert np.var(s.imag, ddof=1) == pytest.approx(0.5, rel=0.03)

    def test_vacuum_second_moment(self):
        s = sample_husimi(vacuum(1), 100_000, seed=4).samples
        assert np.mean(np.abs(s) ** 2) == pytest.approx(1, rel=0.03)

    def test_deterministic(self):
        a = sample_husimi(FIG3, 300, seed=12)
        b = sample_husimi(FIG3, 300, seed=12)
        assert a.samples.tobytes() == b.samples.tobytes()
        assert a.source == "rejection"

    @pytest.mark.parametrize("name", list(STATES))
    def test_leaked_mass_small(self, name):
        psi = STATES[name]
        assert leaked_mass_bound(psi, sampling_radius(psi)) < 1e-6

    def test_leak_bound_matches_quadrature(self):
        # mass outside radius 1.5 for the fig3 state, by direct polar quadrature
        r = np.linspace(1.5, 9, 1501)
        t = np.linspace(0, 2 * math.pi, 401)
        rr, tt = np.meshgrid(r, t, indexing="ij")
        q = husimi_q_pure(FIG3, rr * np.exp(1j * tt)) * rr
        outside = np.trapezoid(np.trapezoid(q, t, axis=1), r)
        assert leaked_mass_bound(FIG3, 1.5) == pytest.approx(outside, abs=1e-6)

    def test_low_acceptance_aborts(self):
        with pytest.raises(RuntimeError, match="acceptance"):
            sample_husimi(fock_basis(4000, 4001), 10, seed=0)

    @pytest.mark.parametrize("part", ["real", "imag"])
    def test_marginals_kolmogorov_smirnov(self, part):
        s = getattr(sample_husimi(FIG3, 10_000, seed=21).samples, part)
        x = np.linspace(-8, 8, 3201)
        y = np.linspace(-8, 8, 3201)
        xx, yy = np.meshgrid(x, y, indexing="ij")
        alpha = xx + 1j * yy if part == "real" else yy + 1j * xx
        marginal = np.trapezoid(husimi_q_pure(FIG3, alpha), y, axis=1)
        cdf = np.concatenate([[0], np.cumsum(0.5 * (marginal[1:] + marginal[:-1]) * np.diff(x))])
        cdf /= cdf[-1]
        assert kstest(s, lambda v: np.interp(v, x, cdf)).pvalue > 1e-3

    def test_gaussian_fast_path(self):
        m = squeezed_coherent_model(SqueezeParams(0.3, 1))
        s = sample_q(m, 10, seed=1)
        assert s.source == "analytic-gaussian"
        assert sample_q(FIG3, 10, seed=1).source == "rejection"

    def test_meta_reports_leak(self):
        s = sample_husimi(FIG3, 5, seed=0)
        assert s.meta["leaked_mass_bound"] < 1e-6
        assert s.meta["radius"] == pytest.approx(math.sqrt(2 * FIG3.mean_photon() + 1) + 4)


class TestAnalyticAmplitude:
    def test_vacuum_origin(self):
        assert qcst_analytic_amplitude(vacuum(1), 0, 0) == pytest.approx(1 / (2 * math.sqrt(math.pi)))

    def test_density_normalization(self):
        psi = make_coherent(1, 24)
        p = np.arange(-10, 10.0001, 0.05)
        p1, p2 = np.meshgrid(p, p, indexing="ij")
        dens = np.abs(qcst_analytic_amplitude(psi, p1, p2)) ** 2
        assert np.trapezoid(np.trapezoid(dens, p, axis=1), p) == pytest.approx(1, abs=1e-4)

    @given(st.floats(-6, 6), st.floats(-6, 6))
    @settings(max_examples=50)
    def test_density_is_scaled_husimi(self, p1, p2):
        amp = qcst_analytic_amplitude(FIG3, p1, p2)
        assert abs(amp) ** 2 / 0.25 == pytest.approx(husimi_q_pure(FIG3, (p1 + 1j * p2) / 2), abs=1e-10)

    def test_qgt_reduces_at_zero_squeezing(self):
        assert qgt_analytic_amplitude(FIG3, 0, 0.4, -1.2) == qcst_analytic_amplitude(FIG3, 0.4, -1.2)


class TestCircuit:
    def test_gate_list(self):
        gates = qcst_gates(0)
        assert [g[1:] for g in gates] == [
            ("q", "q", 0),
            ("q", "p", 1),
            ("q", "q", 0),
            ("p", "p", 0),
            ("p", "q", 1),
            ("p", "p", 0),
        ]
        s2 = math.sqrt(2)
        assert np.allclose([g[0] for g in gates], [1 / s2, s2, 1 / s2, 1 / (2 * s2), -1 / s2, 1 / (2 * s2)])

    @pytest.mark.parametrize("psi", [vacuum(1), fock_basis(1, 2), make_coherent(0.5, 16)], ids=["vac", "fock1", "coh"])
    def test_transform_at_dim_16(self, psi):
        rep = qcst_circuit_verify(psi, 16, P_GRID)
        assert rep.ancilla_reset_fidelity >= 0.99
        assert rep.max_amp_error <= 5e-3
        assert rep.reliable
        assert len(rep.grid) == P_GRID.size**2
        json.dumps(rep.to_json())

    def test_small_dim_flagged(self):
        rep = qcst_circuit_verify(fock_basis(3, 4), 8, P_GRID)
        assert 0 <= rep.ancilla_reset_fidelity <= 1
        assert rep.reliable == (rep.ancilla_reset_fidelity >= 0.9)
        with pytest.raises(ValueError):
            qcst_circuit_verify(vacuum(1), 6, P_GRID)

    def test_qgt_zero_reduces(self):
        a = qgt_circuit_verify(vacuum(1), 0, 16, P_GRID)
        b = qcst_circuit_verify(vacuum(1), 16, P_GRID)
        assert a.max_amp_error == b.max_amp_error
        assert a.ancilla_reset_fidelity == b.ancilla_reset_fidelity

    def test_qgt_vacuum_reset(self):
        assert qgt_circuit_verify(vacuum(1), 0.4, 24, P_GRID).ancilla_reset_fidelity >= 0.98

    def test_qgt_two_photons(self):
        assert qgt_circuit_verify(fock_basis(2, 3), 0.3, 24, P_GRID).max_amp_error <= 1e-2

    def test_qgt_preconditions(self):
        with pytest.raises(ValueError):
            qgt_circuit_verify(vacuum(1), 0.8, 24, P_GRID)
        with pytest.raises(ValueError):
            qgt_circuit_verify(vacuum(1), 0.2, 12, P_GRID)
