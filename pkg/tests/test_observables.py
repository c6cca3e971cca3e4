import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from nvsqueeze.dynamics import twisting_state
from nvsqueeze.exceptions import (
    DimensionMismatchError,
    InvalidParameterError,
    ProtocolConstraintError,
    UndefinedDirectionError,
)
from nvsqueeze.observables import (
    ghz_fidelity,
    optimal_theta_formula,
    spin_moments,
    squeezing_kitagawa,
    squeezing_record,
    squeezing_wineland,
    to_dB,
)
from nvsqueeze.opalg import HilbertSpec, QState, thermal_state


def one_axis_twisting(N, theta):
    """Kitagawa-Ueda closed form for exp(i theta J_x^2) acting on a coherent state."""
    mu = 2 * theta
    A = 1 - math.cos(mu) ** (N - 2)
    B = 4 * math.sin(mu / 2) * math.cos(mu / 2) ** (N - 2)
    return 1 + (N - 1) / 4 * (A - math.sqrt(A * A + B * B))


@given(st.integers(3, 60), st.floats(1e-3, 0.6))
def test_kitagawa_matches_closed_form(N, theta):
    xi, _ = squeezing_kitagawa(twisting_state(N, theta))
    assert math.isclose(xi, one_axis_twisting(N, theta), rel_tol=1e-8, abs_tol=1e-10)


@given(st.integers(3, 60), st.floats(1e-3, 0.6))
def test_wineland_matches_closed_form(N, theta):
    mean_len = N / 2 * math.cos(theta) ** (N - 1)
    assume(mean_len > 1e-3)
    expected = (N / (2 * mean_len)) ** 2 * one_axis_twisting(N, theta)
    assert math.isclose(squeezing_wineland(twisting_state(N, theta)), expected, rel_tol=1e-7)


@given(st.integers(2, 40))
def test_coherent_state_is_unsqueezed(N):
    rho = np.zeros((N + 1, N + 1), dtype=complex)
    rho[0, 0] = 1
    rec = squeezing_record(rho)
    assert math.isclose(rec.xi_s_sq, 1.0, rel_tol=1e-12)
    assert math.isclose(rec.xi_R_sq, 1.0, rel_tol=1e-12)
    assert abs(rec.xi_R_dB) < 1e-10
    assert rec.J_mean[2] == -N / 2
    assert math.isclose(rec.phase_uncertainty, 1 / math.sqrt(N))


@given(st.integers(2, 30), st.floats(0, 2 * math.pi))
def test_ghz_fidelity_of_ideal_ghz(half, phi):
    N = 2 * half
    psi = np.zeros(N + 1, dtype=complex)
    psi[0] = 1 / math.sqrt(2)
    psi[N] = np.exp(1j * phi) / math.sqrt(2)
    rec = ghz_fidelity(psi)
    assert math.isclose(rec.F, 1.0, rel_tol=1e-12)
    assert cmath.isclose(np.exp(1j * rec.optimal_phase), np.exp(1j * phi), abs_tol=1e-9)


def test_ghz_mixture_fidelity():
    rho = np.zeros((5, 5), dtype=complex)
    rho[0, 0] = rho[4, 4] = 0.5  # incoherent mixture
    assert math.isclose(ghz_fidelity(rho).F, 0.5)
    with pytest.raises(ProtocolConstraintError):
        ghz_fidelity(np.eye(4) / 4)


def test_vanishing_mean_spin():
    # GHZ state has <J> = 0
    psi = twisting_state(6, math.pi / 2)
    xi, _, fallback = squeezing_kitagawa(psi, return_flag=True)
    assert fallback
    assert xi >= 0
    with pytest.raises(UndefinedDirectionError):
        squeezing_wineland(psi)


def test_spin_moments_covariance_symmetric():
    psi = twisting_state(8, 0.2)
    mean, cov = spin_moments(np.outer(psi, psi.conj()))
    assert np.allclose(cov, cov.T)
    assert np.linalg.eigvalsh(cov)[0] >= -1e-12


def test_accepts_composite_state():
    spec = HilbertSpec(4, 12)
    spin = np.outer(twisting_state(4, 0.3), twisting_state(4, 0.3).conj())
    q = QState.product(spin, thermal_state(0.2, 12), spec)
    assert math.isclose(squeezing_kitagawa(q)[0], squeezing_kitagawa(spin)[0], rel_tol=1e-12)
    with pytest.raises(DimensionMismatchError):
        squeezing_kitagawa(spin, N=5)


def test_to_dB():
    assert math.isclose(to_dB(0.1), 10.0)
    assert math.isclose(to_dB(0.68), 1.675, rel_tol=1e-3)
    with pytest.raises(InvalidParameterError):
        to_dB(0.0)


def test_optimal_theta_formula_anchor():
    assert math.isclose(optimal_theta_formula(50), 0.0868, rel_tol=1e-3)


def test_literal_formula_reported_with_variants():
    rec = squeezing_record(twisting_state(50, optimal_theta_formula(50)))
    # frozen values; the literal expression is not a squeezing parameter
    assert math.isclose(rec.xi_s_sq, 0.07505292375829711, rel_tol=1e-9)
    assert math.isclose(rec.xi_s_sq_paper, 6.825160115804747, rel_tol=1e-9)
    assert math.isclose(rec.diagnostics["formula_with_mean_sq"], 7.325160115804746, rel_tol=1e-9)


@given(st.integers(3, 40), st.floats(1e-3, 0.5))
def test_jminus_reading_of_literal_formula_is_kitagawa(N, theta):
    rec = squeezing_record(twisting_state(N, theta))
    assert math.isclose(rec.diagnostics["formula_with_jminus_sq"], rec.xi_s_sq, rel_tol=1e-8, abs_tol=1e-10)
