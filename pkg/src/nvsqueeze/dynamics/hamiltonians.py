from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ..exceptions import DimensionMismatchError, UnsupportedRegimeError
from ..opalg import OperatorSet
from .params import ModelParams


def _check(params: ModelParams, ops: OperatorSet):
    if ops.spec.N != params.N:
        raise DimensionMismatchError(f"operator set built for N={ops.spec.N}, params have N={params.N}")


def build_H_HP(params: ModelParams, ops: OperatorSet) -> sp.csr_matrix:
    """``w0 n_a + lam (b + b^dag) Jbar_x + n_b`` with omega_m = 1."""
    _check(params, ops)
    x_b = ops.b + ops.b_dag
    H = params.w0_over_wm * ops.n_a + params.lam * (x_b @ ops.Jbar_x) + ops.n_b
    return sp.csr_matrix(H)


def build_H_dicke(params: ModelParams, ops: OperatorSet) -> sp.csr_matrix:
    """Large-N limit: ``Jbar_x`` replaced by ``(a + a^dag) / 2``."""
    _check(params, ops)
    x_b = ops.b + ops.b_dag
    H = params.w0_over_wm * ops.n_a + 0.5 * params.lam * (x_b @ (ops.a + ops.a_dag)) + ops.n_b
    return sp.csr_matrix(H)


def theta_of_t(g_over_wm: float, t):
    """Geometric phase ``(2 g)^2 (t - sin t)`` (detuning = omega_m = 1)."""
    t = np.asarray(t, dtype=float)
    return (2.0 * g_over_wm) ** 2 * (t - np.sin(t))


def alpha_of_t(t):
    """Loop amplitude ``1 - exp(i t)``; vanishes at every full period."""
    return 1.0 - np.exp(1j * np.asarray(t, dtype=float))


def magnus_propagator(params: ModelParams, ops: OperatorSet, t: float, frame: str = "interaction") -> np.ndarray:
    """Closed-form propagator of the coherent dynamics at the level crossing.

    ``exp(i N theta(t) Jbar_x^2) exp(lam [alpha b^dag - alpha^* b] Jbar_x)`` in
    the frame rotating with the free oscillator. ``frame="lab"`` multiplies by
    ``exp(-i t n_b)`` so the result can be compared with Schrodinger-picture
    evolution at arbitrary times; both frames coincide at ``t = 2 pi m``.
    """
    _check(params, ops)
    if params.w0_over_wm != 0:
        raise UnsupportedRegimeError("the Magnus form is exact only at the level crossing (w0 = 0)")
    if t < 0:
        raise ValueError("t must be >= 0")
    jbar = ops.Jbar_x.toarray()
    twist = 1j * params.N * float(theta_of_t(params.g_over_wm, t)) * (jbar @ jbar)
    alpha = complex(alpha_of_t(t))
    disp = params.lam * ((alpha * ops.b_dag - np.conj(alpha) * ops.b) @ ops.Jbar_x).toarray()
    U = sla.expm(twist) @ sla.expm(disp)
    if frame == "lab":
        U = np.exp(-1j * t * ops.n_b.diagonal())[:, None] * U
    elif frame != "interaction":
        raise ValueError(f"unknown frame {frame!r}")
    return U


def twisting_state(N: int, theta: float) -> np.ndarray:
    """Spin state ``exp(i theta J_x^2)|vac>`` left by the propagator at ``t_m``.

    This is the spin factor of ``magnus_propagator`` at a full period, using
    ``N theta Jbar_x^2 = theta J_x^2``; the exponential is applied in the
    ``J_x`` eigenbasis.
    """
    from .gaussian import jx_eigenbasis

    w, V = jx_eigenbasis(N)
    c = V.conj().T[:, 0]
    return V @ (np.exp(1j * theta * w**2) * c)
