"""Runnable oracle suites for the propagators and observables.

Each suite returns ``{"suite", "passed", "checks"}`` where every check is a
dict with ``name``, ``value``, ``threshold`` and ``passed``. Failures are
report entries, never exceptions.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from .dynamics import (
    LindbladRHS,
    ModelParams,
    choose_phonon_dim,
    dopri5,
    evolve_exact,
    evolve_lindblad,
    initial_state,
    magnus_propagator,
)
from .exceptions import InvalidParameterError, NVSqueezeError, TruncationError
from .observables import ghz_fidelity, optimal_theta_formula, spin_moments, squeezing_kitagawa, squeezing_record
from .opalg import HilbertSpec, QState, build_boson_ops, operator_set, thermal_populations, thermal_state

SUITES = ("magnus", "bruteforce", "split_invariance", "truncation")


def _check(name, value, threshold, passed=None, **info):
    value = float(value)
    if passed is None:
        passed = value < threshold
    return dict(name=name, value=value, threshold=threshold, passed=bool(passed), **info)


def trace_distance(a, b) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(a - b)).sum())


def _vacuum_product(spec: HilbertSpec):
    psi = np.zeros(spec.dim, dtype=complex)
    psi[0] = 1.0
    return psi


def magnus_suite(Ns=(2, 4, 10), gs=(0.01, 0.05), ms=(1, 3), rtol=1e-10, atol=1e-12):
    """Integrator against the closed-form propagator at ``t_m`` (no damping),
    plus spin-phonon decoupling for different initial phonon occupations."""
    checks = []
    for N in Ns:
        for g in gs:
            for m in ms:
                p = ModelParams(N=N, g_over_wm=g, Q_m=math.inf, m_periods=m)
                dim = choose_phonon_dim(p) + 8
                ops = operator_set(N, dim)
                psi0 = _vacuum_product(ops.spec)
                state = QState(np.outer(psi0, psi0.conj()), ops.spec)
                label = dict(N=N, g_over_wm=g, m=m, phonon_dim=dim)
                try:
                    res = evolve_lindblad(state, p, ops, p.t_final, rtol=rtol, atol=atol)
                except NVSqueezeError as exc:
                    checks.append(_check("magnus_fidelity_deficit", math.nan, 1e-6, False, error=str(exc), **label))
                    continue
                psi = magnus_propagator(p, ops, p.t_final, frame="lab") @ psi0
                deficit = 1.0 - float(np.real(psi.conj() @ res.final.rho @ psi))
                checks.append(_check("magnus_fidelity_deficit", abs(deficit), 1e-6, **label))
                checks.append(_check("trace_drift_per_period", res.drift_per_period, 1e-8, **label))
                checks.append(_check("min_eigenvalue", res.min_eig, -1e-7, res.min_eig >= -1e-7, **label))
    checks.extend(decoupling_checks(rtol=rtol * 0.1, atol=atol * 0.1))
    return checks


def decoupling_checks(N=4, g=0.05, occupations=(0.0, 0.5, 2.0), phonon_dim=60, rtol=1e-11, atol=1e-13):
    """Reduced spin state at ``t_1`` must not depend on the initial phonon occupation."""
    spins = []
    for n in occupations:
        p = ModelParams(N=N, g_over_wm=g, n_th=n, Q_m=math.inf)
        ops = operator_set(N, phonon_dim)
        res = evolve_lindblad(initial_state(p, phonon_dim), p, ops, p.t_final, rtol=rtol, atol=atol)
        spins.append(res.final.spin_reduced())
    ref = evolve_exact(ModelParams(N=N, g_over_wm=g, Q_m=math.inf))[0]
    checks = []
    for n, rho in zip(occupations[1:], spins[1:]):
        checks.append(_check("decoupling_trace_distance", trace_distance(rho, spins[0]), 1e-8,
                             N=N, n_initial=n, phonon_dim=phonon_dim))
    checks.append(_check("decoupling_vs_closed_form", trace_distance(spins[0], ref), 1e-8, N=N))
    return checks


# -- brute force: two explicit spins, no Holstein-Primakoff map -------------

_SYMMETRIC = np.array([
    [1, 0, 0, 0],
    [0, 1 / math.sqrt(2), 1 / math.sqrt(2), 0],
    [0, 0, 0, 1],
], dtype=complex)


def _two_spin_ops():
    """Collective operators on two qubits in the basis |00>, |01>, |10>, |11> (1 = excited)."""
    sp_ = np.array([[0, 0], [1, 0]], dtype=complex)
    eye = np.eye(2)
    J_plus = np.kron(sp_, eye) + np.kron(eye, sp_)
    J_x = 0.5 * (J_plus + J_plus.conj().T)
    return J_x


def bruteforce_state(params: ModelParams, phonon_dim: int, rtol=1e-11, atol=1e-13):
    """Spin state of two explicit spins and the phonon at ``t_m``, projected
    onto the symmetric subspace (3x3, HP number basis); also the leaked weight."""
    if params.N != 2:
        raise InvalidParameterError("the brute-force model is for N = 2")
    b, b_dag, n_b = build_boson_ops(phonon_dim)
    J_x = sp.csr_matrix(_two_spin_ops())
    eye_s = sp.identity(4, format="csr")
    H = 2 * params.g_over_wm * sp.kron(J_x, b + b_dag) + sp.kron(eye_s, n_b)
    n_sim, gamma = params.bath(emulate=True)
    jumps = [((n_sim + 1) * gamma, sp.kron(eye_s, b)), (n_sim * gamma, sp.kron(eye_s, b_dag))]
    spin0 = np.zeros((4, 4), dtype=complex)
    spin0[0, 0] = 1.0
    rho0 = np.kron(spin0, thermal_state(n_sim, phonon_dim))
    (rho,), stats = dopri5(LindbladRHS(H, jumps), rho0, [params.t_final], rtol=rtol, atol=atol)
    spin = rho.reshape(4, phonon_dim, 4, phonon_dim).trace(axis1=1, axis2=3)
    sym = _SYMMETRIC @ spin @ _SYMMETRIC.conj().T
    return sym, 1.0 - float(np.trace(sym).real)


BRUTEFORCE_POINTS = (
    dict(g_over_wm=0.05, n_th=0.0, Q_m=math.inf, m_periods=1),
    dict(g_over_wm=0.1, n_th=1.0, Q_m=200.0, m_periods=1),
    dict(g_over_wm=0.04, n_th=0.5, Q_m=100.0, m_periods=2),
)


def bruteforce_suite(points=BRUTEFORCE_POINTS, tol=1e-8, rtol=1e-11, atol=1e-13):
    checks = []
    for kw in points:
        p = ModelParams(N=2, **kw)
        dim = choose_phonon_dim(p)
        label = dict(kw, phonon_dim=dim)
        ops = operator_set(2, dim)
        hp = evolve_lindblad(initial_state(p, dim), p, ops, p.t_final, rtol=rtol, atol=atol).final.spin_reduced()
        bf, leak = bruteforce_state(p, dim, rtol=rtol, atol=atol)
        mean_hp, _ = spin_moments(hp)
        mean_bf, _ = spin_moments(bf)
        checks.append(_check("xi_s_sq_deviation", abs(squeezing_kitagawa(hp)[0] - squeezing_kitagawa(bf)[0]), tol, **label))
        checks.append(_check("mean_spin_deviation", np.abs(mean_hp - mean_bf).max(), tol, **label))
        checks.append(_check("ghz_fidelity_deviation", abs(ghz_fidelity(hp).F - ghz_fidelity(bf).F), tol, **label))
        checks.append(_check("symmetric_subspace_leakage", abs(leak), tol, **label))
    return checks


def split_invariance_suite(Ns=(10,), noise=0.01, splits=(2, 5, 10), Q_m=1e6, tol=0.01):
    """Same physical noise ``n_th gamma`` carried by different simulated occupations."""
    checks = []
    for N in Ns:
        theta = optimal_theta_formula(N)
        values = []
        for n_sim in splits:
            p = ModelParams.for_noise(N, theta, noise, Q_m=Q_m, n_th_sim=float(n_sim))
            values.append(squeezing_record(evolve_exact(p)[0]).xi_R_sq)
        spread = (max(values) - min(values)) / float(np.mean(values))
        physical = squeezing_record(evolve_exact(ModelParams.for_noise(N, theta, noise, Q_m=Q_m))[0]).xi_R_sq
        checks.append(_check("xi_R_sq_split_spread", spread, tol, N=N, noise=noise, splits=list(splits),
                             xi_R_sq=values, xi_R_sq_physical=physical))
    return checks


def truncation_suite(N=4, n_th=2.0, Q_m=100.0, steps=(0, 8, 16), tol=1e-3):
    """Convergence of the truncated integrator in the phonon cutoff, its
    agreement with the untruncated closed form, and the thermal tail guard."""
    p = ModelParams.for_phase(N, optimal_theta_formula(N), n_th=n_th, Q_m=Q_m)
    base = choose_phonon_dim(p)
    values, states = [], []
    for extra in steps:
        dim = base + extra
        res = evolve_lindblad(initial_state(p, dim), p, operator_set(N, dim), p.t_final)
        states.append(res.final.spin_reduced())
        values.append(squeezing_record(states[-1]).xi_R_sq)
    checks = []
    for extra, v in zip(steps[1:], values[1:]):
        checks.append(_check("cutoff_shift", abs(v - values[0]) / values[0], tol, N=N, phonon_dim=base + extra,
                             base_dim=base))
    exact = evolve_exact(p, emulate=True)[0]
    checks.append(_check("closed_form_xi_R_sq_rel_error",
                         abs(squeezing_record(exact).xi_R_sq - values[-1]) / values[-1], tol, N=N))
    checks.append(_check("closed_form_trace_distance", trace_distance(exact, states[-1]), tol, N=N))
    try:
        thermal_populations(5.0, 20)
        guard = False
    except TruncationError as exc:
        guard = exc.min_dim is not None and exc.min_dim > 20
    checks.append(_check("thermal_tail_guard", 0.0 if guard else 1.0, 0.5, guard))
    return checks


def validate(suite: str, **options) -> dict:
    if suite not in SUITES:
        raise InvalidParameterError(f"unknown suite {suite!r}; expected one of {SUITES}")
    runner = dict(magnus=magnus_suite, bruteforce=bruteforce_suite, split_invariance=split_invariance_suite,
                  truncation=truncation_suite)[suite]
    try:
        checks = runner(**options)
    except NVSqueezeError as exc:
        checks = [dict(name="suite_error", value=math.nan, threshold=None, passed=False, error=str(exc))]
    return dict(suite=suite, passed=all(c["passed"] for c in checks), checks=checks)
