"""Master-equation propagation on the truncated composite space.

The right-hand side is applied through sparse left/right products on the
dense density matrix; the superoperator is never assembled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..exceptions import DimensionMismatchError, IntegrationError
from ..opalg import OperatorSet, QState, thermal_min_dim, thermal_state
from .hamiltonians import build_H_HP
from .params import ModelParams

POSITIVITY_ABORT = -1e-6

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


@dataclass
class EvolutionResult:
    times: list
    states: list
    trace_drift: float
    min_eig: float
    steps: int
    rejected: int
    nfev: int
    periods: float = 1.0
    info: dict = field(default_factory=dict)

    @property
    def final(self) -> QState:
        return self.states[-1]

    @property
    def drift_per_period(self) -> float:
        return self.trace_drift / max(self.periods, 1.0)


class LindbladRHS:
    """``L(rho) = -i[H, rho] + sum_k D[A_k] rho`` for hermitian ``rho``.

    Uses ``H_eff = H - i/2 sum_k A_k^dag A_k`` so one sparse product gives
    both commutator and anticommutator parts.
    """

    def __init__(self, H, jumps):
        H_eff = sp.csr_matrix(H, dtype=complex)
        self.jumps = []
        for rate, A in jumps:
            if rate == 0:
                continue
            A = sp.csr_matrix(A, dtype=complex)
            H_eff = H_eff - 0.5j * rate * (A.conj().T @ A)
            self.jumps.append((rate, A))
        self.H_eff = H_eff.tocsr()
        # upper bound on the spectral radius of the generator (1-norms)
        norm1 = lambda M: float(abs(M).sum(axis=0).max()) if M.nnz else 0.0
        self.spectral_bound = 2 * norm1(self.H_eff) + sum(r * norm1(A) ** 2 for r, A in self.jumps)

    def __call__(self, rho):
        # the shortcut below reads rho^dag for rho; on an anti-hermitian part
        # it would act as a growing generator, so rounding noise is removed first
        rho = 0.5 * (rho + rho.conj().T)
        X = self.H_eff @ rho
        out = -1j * X + 1j * X.conj().T
        for rate, A in self.jumps:
            Y = A @ rho
            out += rate * (A @ Y.conj().T).conj().T
        return out


def lindblad_rhs(params: ModelParams, ops: OperatorSet, H=None) -> LindbladRHS:
    n_sim, gamma_sim = params.bath(emulate=True)
    if H is None:
        H = build_H_HP(params, ops)
    return LindbladRHS(H, [((n_sim + 1) * gamma_sim, ops.b), (n_sim * gamma_sim, ops.b_dag)])


def _rms(x):
    return math.sqrt(float(np.mean(np.abs(x) ** 2)))


#: step cap as a multiple of 1 / spectral radius; inside the stability region
STABILITY_FACTOR = 2.5


def dopri5(f, y0, checkpoints, rtol=1e-8, atol=1e-10, h0=None, max_steps=10_000_000, h_max=None):
    """Adaptive Dormand-Prince integration hitting every checkpoint exactly.

    ``f`` is autonomous. Returns ``(states, stats)`` where ``states`` holds a
    copy of the solution at each checkpoint (in increasing order).

    Components with tiny amplitude but fast frequencies (high Fock levels)
    never trip the error control, so the step is also capped at ``h_max``,
    by default ``STABILITY_FACTOR / f.spectral_bound`` when ``f`` has one.
    """
    if h_max is None:
        bound = getattr(f, "spectral_bound", 0.0)
        h_max = STABILITY_FACTOR / bound if bound else math.inf
    checkpoints = sorted(float(t) for t in checkpoints)
    y = np.array(y0, dtype=complex)
    t = 0.0
    k1 = f(y)
    nfev = 1
    if h0 is None:
        d0, d1 = _rms(y / (atol + rtol * np.abs(y))), _rms(k1 / (atol + rtol * np.abs(y)))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h = min(h0, h_max)
    steps = rejected = 0
    out = []
    for t_stop in checkpoints:
        if t_stop < t:
            raise ValueError("checkpoints must be >= 0")
        while t < t_stop:
            if steps + rejected > max_steps:
                raise IntegrationError(f"exceeded {max_steps} steps at t={t:.6g}")
            last = t + h >= t_stop
            h_step = t_stop - t if last else h
            if h_step < 1e-14 * max(1.0, abs(t)):
                raise IntegrationError(f"step size underflow (h={h_step:.3g}) at t={t:.6g}")
            k = [k1]
            for i in range(1, 7):
                yi = y.copy()
                for a, kj in zip(_A[i], k):
                    if a:
                        yi += (h_step * a) * kj
                k.append(f(yi))
            nfev += 6
            y_new = yi  # the 7th stage is evaluated at the 5th-order solution
            err = sum((h_step * e) * kj for e, kj in zip(_E, k) if e)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = _rms(err / scale)
            if err_norm <= 1.0:
                t = t_stop if last else t + h_step
                y = y_new
                k1 = k[6]
                steps += 1
                factor = 10.0 if err_norm == 0 else min(10.0, max(0.2, 0.9 * err_norm**-0.2))
                if not last or factor < 1.0:
                    h = min(h_step * factor, h_max)
            else:
                rejected += 1
                h = h_step * max(0.2, 0.9 * err_norm**-0.2)
        out.append(y.copy())
    return out, dict(steps=steps, rejected=rejected, nfev=nfev)


def choose_phonon_dim(params: ModelParams) -> int:
    """Initial phonon cutoff for the truncated integrator.

    Thermal headroom plus the mean occupation of the largest spin-conditioned
    displacement ``2 lam / delta * max|jbar_x| = 2 N g``, and never below the
    cutoff the thermal initial state itself needs.
    """
    if params.phonon_dim is not None:
        return int(params.phonon_dim)
    n_sim, _ = params.bath(emulate=True)
    heuristic = math.ceil(4 * n_sim + (2 * params.N * params.g_over_wm) ** 2 + 10)
    return max(heuristic, thermal_min_dim(n_sim))


def initial_state(params: ModelParams, phonon_dim: int | None = None) -> QState:
    """All spins in ``|m_s = 0>`` (HP vacuum) times a thermal phonon state."""
    from ..opalg import HilbertSpec

    dim = phonon_dim or choose_phonon_dim(params)
    spec = HilbertSpec(params.N, dim)
    n_sim, _ = params.bath(emulate=True)
    spin = np.zeros((spec.spin_dim, spec.spin_dim), dtype=complex)
    spin[0, 0] = 1.0
    return QState.product(spin, thermal_state(n_sim, dim), spec, n_phonon=n_sim)


def evolve_lindblad(state: QState, params: ModelParams, ops: OperatorSet, t_final: float,
                    checkpoint_times=(), rtol: float = 1e-8, atol: float = 1e-10, H=None,
                    check_positivity: bool = True) -> EvolutionResult:
    """Integrate the thermal-bath master equation from ``state``.

    The bath enters as ``(n_sim + 1) gamma_sim D[b] + n_sim gamma_sim D[b^dag]``
    (see ``ModelParams.bath``). The trace is never renormalized; its drift is
    reported instead.
    """
    if state.spec != ops.spec:
        raise DimensionMismatchError(f"state spec {state.spec} differs from operator spec {ops.spec}")
    times = sorted({float(t) for t in checkpoint_times if t <= t_final} | {float(t_final)})
    f = lindblad_rhs(params, ops, H)
    rhos, stats = dopri5(f, state.rho, times, rtol=rtol, atol=atol)
    drift, min_eig = 0.0, math.inf
    states = []
    for t, rho in zip(times, rhos):
        rho = (rho + rho.conj().T) / 2
        q = QState(rho, state.spec, dict(t=t))
        drift = max(drift, abs(q.trace() - 1.0))
        if check_positivity:
            ev = q.min_eigenvalue()
            min_eig = min(min_eig, ev)
            if ev < POSITIVITY_ABORT:
                raise IntegrationError(f"positivity lost at t={t:.6g}: min eigenvalue {ev:.3g}")
        states.append(q)
    return EvolutionResult(times=times, states=states, trace_drift=float(drift), min_eig=float(min_eig),
                           periods=max(t_final / (2 * math.pi), 1.0), **stats)
