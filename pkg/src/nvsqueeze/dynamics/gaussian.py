"""Exact reduced spin dynamics of the thermal-bath master equation.

At the level crossing ``Jbar_x`` commutes with the Hamiltonian and with the
phonon dissipators, so in the ``J_x`` eigenbasis every block
``rho_kl = <x_k| rho |x_l>`` of the composite state evolves on its own under

    d rho_kl / dt = -i (H_k rho_kl - rho_kl H_l) + bath terms,
    H_k = b^dag b + f_k (b + b^dag),   f_k = lam * x_k / sqrt(N).

Starting from a product of a spin state and a thermal phonon state, the
phonon trace of each block is ``rho_spin(0)_kl * exp(c0_kl(t))``. The
characteristic function of the block stays Gaussian, and its coefficients
obey linear equations with closed-form solutions. No phonon truncation is
involved, so physical occupations of 10^5 are handled directly.
"""

from __future__ import annotations

import math

import numpy as np

from ..exceptions import UnsupportedRegimeError
from ..opalg import spin_operators
from .params import ModelParams


def jx_eigenbasis(N: int):
    """Eigenvalues (exact half-integers) and eigenvectors of ``J_x``."""
    w, V = np.linalg.eigh(spin_operators(N)["J_x"].toarray())
    return np.round(2 * w) / 2, V


def log_coherence(f_k, f_l, t, n_bath, gamma, n_initial=None):
    """``c0`` such that ``Tr_b rho_kl(t) = exp(c0) Tr_b rho_kl(0)``.

    ``f_k``, ``f_l`` are the spin-conditioned forces (broadcastable arrays),
    ``n_bath`` and ``gamma`` the bath occupation and damping, and
    ``n_initial`` the occupation of the initial thermal phonon state
    (defaults to ``n_bath``).

    With ``z = i - gamma/2`` the first-order coefficients of the
    characteristic function obey
    ``c1' = z c1 + i S + i D C(t)``, ``c2' = z* c2 + i S - i D C(t)``, where
    ``S = (f_k + f_l)/2``, ``D = f_k - f_l`` and
    ``C(t) = -(n_bath + 1/2) + (n_bath - n_initial) exp(-gamma t)`` is the
    Gaussian width; then ``c0' = -i D (c1 - c2)``. The imaginary part of
    ``c0`` is the geometric phase, the real part the thermal dephasing.
    """
    if n_initial is None:
        n_initial = n_bath
    f_k = np.asarray(f_k, dtype=float)
    f_l = np.asarray(f_l, dtype=float)
    z = complex(-gamma / 2, 1.0)
    abs_z2 = abs(z) ** 2
    S = 0.5 * (f_k + f_l)
    D = f_k - f_l
    # G = int_0^t (exp(z s) - 1) / z ds, split so the secular parts are exact
    e1_over_z = complex(np.expm1(z * t)) / z**2
    g_re = e1_over_z.real + t * (gamma / 2) / abs_z2
    g_im = e1_over_z.imag + t / abs_z2
    c0 = 2j * D * S * g_im - 2 * D**2 * (n_bath + 0.5) * g_re
    kick = n_bath - n_initial
    if kick:
        decay = t if gamma == 0 else -math.expm1(-gamma * t) / gamma
        h = (complex(np.expm1(z * t)) / z - decay) / (z + gamma)
        c0 = c0 + 2 * D**2 * kick * h.real
    return c0


def evolve_exact(params: ModelParams, times=None, spin_rho0=None, emulate: bool | None = None):
    """Reduced spin density matrices at ``times`` (default: ``t_m``).

    The phonon starts thermal at the simulated bath occupation. ``emulate``
    selects the capped occupation of the truncated integrator; by default the
    physical bath is used unless ``params.n_th_sim`` is set.
    Returns a list of ``(N+1) x (N+1)`` matrices in the HP number basis.
    """
    if params.w0_over_wm != 0:
        raise UnsupportedRegimeError("J_x is conserved only at the level crossing (w0 = 0)")
    N = params.N
    if times is None:
        times = [params.t_final]
    if emulate is None:
        emulate = params.n_th_sim is not None
    n_sim, gamma_sim = params.bath(emulate=emulate)
    x, V = jx_eigenbasis(N)
    force = params.lam * x / math.sqrt(N)
    if spin_rho0 is None:
        c = V.conj().T[:, 0]
        r0 = np.outer(c, c.conj())
    else:
        r0 = V.conj().T @ spin_rho0 @ V
    out = []
    for t in times:
        c0 = log_coherence(force[:, None], force[None, :], float(t), n_sim, gamma_sim)
        rho = V @ (r0 * np.exp(c0)) @ V.conj().T
        out.append((rho + rho.conj().T) / 2)
    return out


def spin_state_at(params: ModelParams, t=None, **kwargs) -> np.ndarray:
    return evolve_exact(params, [params.t_final if t is None else t], **kwargs)[0]
