"""Laboratory parameters of the diamond-nanowire device and their mapping
onto the dimensionless model (SI units in, omega_m = 1 units out)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from scipy.constants import Boltzmann, hbar

from .dynamics.params import ModelParams
from .exceptions import InfeasibleTargetError, InvalidParameterError

TWO_PI = 2.0 * math.pi
ZERO_FIELD_SPLITTING = TWO_PI * 2.87e9  # rad/s
ELECTRON_GYROMAGNETIC = TWO_PI * 28e9  # rad/s/T
MAX_GRADIENT = 1e7  # T/m


@dataclass(frozen=True)
class DeviceParams:
    d: float = 9.2e-9
    L: float = 1.45e-6
    E: float = 300e9
    rho_m: float = 3000.0
    T: float = 0.01
    B_z: float = 0.1
    G_B: float | None = None
    mass: float | None = None
    omega_m: float | None = None
    Q_m: float = 1e6
    D: float = ZERO_FIELD_SPLITTING
    gamma_B: float = ELECTRON_GYROMAGNETIC

    def __post_init__(self):
        for name in ("d", "L", "E", "rho_m", "T", "Q_m", "D", "gamma_B"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("mass", "omega_m", "G_B"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise InvalidParameterError(f"{name} must be positive, got {value}")
        if not 0 <= self.B_z <= 0.2:
            raise InvalidParameterError(f"B_z = {self.B_z} T outside the [0, 0.2] T operating band")

    @property
    def resolved_mass(self) -> float:
        """Explicit mass if given, else the cylinder ``rho pi (d/2)^2 L``."""
        if self.mass is not None:
            return self.mass
        return self.rho_m * math.pi * (self.d / 2) ** 2 * self.L

    @property
    def resolved_omega_m(self) -> float:
        if self.omega_m is not None:
            return self.omega_m
        return nanowire_frequency(self.d, self.L, self.E, self.rho_m)


def nanowire_frequency(d, L, E, rho_m):
    """Fundamental flexural mode ``1.88^2 d / L^2 sqrt(E / 16 rho)`` in rad/s."""
    return 1.88**2 * d / L**2 * math.sqrt(E / (16.0 * rho_m))


def zero_point(mass, omega_m):
    return math.sqrt(hbar / (2.0 * mass * omega_m))


def thermal_occupation(omega_m, T):
    if not T > 0:
        raise InvalidParameterError(f"temperature must be positive, got {T}")
    return 1.0 / math.expm1(hbar * omega_m / (Boltzmann * T))


def coupling_rate(G_B, x_zp, gamma_B=ELECTRON_GYROMAGNETIC):
    return gamma_B * G_B * x_zp


def level_splitting(D=ZERO_FIELD_SPLITTING, gamma_B=ELECTRON_GYROMAGNETIC, B_z=0.1):
    """Return ``(omega_0, upper_gap)``: the ``|-1>`` and ``|+1>`` gaps from ``|0>``."""
    return D - gamma_B * B_z, D + gamma_B * B_z


def crossing_field(D=ZERO_FIELD_SPLITTING, gamma_B=ELECTRON_GYROMAGNETIC):
    return D / gamma_B


def to_model_params(device: DeviceParams, N: int, m_periods: int = 1, theta: float | None = None,
                    G_B: float | None = None, **model_kwargs):
    """Dimensionless parameters for a device, either at a target phase or a gradient.

    Exactly one of ``theta`` and ``G_B`` (explicit or on the device) must be
    given. Returns ``(ModelParams, report)``; the report lists every
    intermediate quantity in SI units.
    """
    G_B = G_B if G_B is not None else device.G_B
    if (theta is None) == (G_B is None):
        raise InvalidParameterError("give exactly one of a target phase or a field gradient")
    omega_m = device.resolved_omega_m
    mass = device.resolved_mass
    x_zp = zero_point(mass, omega_m)
    n_bar = thermal_occupation(omega_m, device.T)
    if theta is not None:
        g_x = 0.5 * omega_m * math.sqrt(theta / (TWO_PI * m_periods))
        G_B = g_x / (device.gamma_B * x_zp)
        if G_B > MAX_GRADIENT:
            raise InfeasibleTargetError(f"phase {theta} needs G_B = {G_B:.3g} T/m, above {MAX_GRADIENT:.0e} T/m")
    else:
        g_x = coupling_rate(G_B, x_zp, device.gamma_B)
    omega_0, upper = level_splitting(device.D, device.gamma_B, device.B_z)
    params = ModelParams(N=N, g_over_wm=g_x / omega_m, w0_over_wm=0.0, n_th=n_bar, Q_m=device.Q_m,
                         m_periods=m_periods, **model_kwargs)
    report = dict(
        device=asdict(device),
        omega_m=omega_m,
        f_m_Hz=omega_m / TWO_PI,
        period_s=TWO_PI / omega_m,
        mass_kg=mass,
        x_zp_m=x_zp,
        n_bar=n_bar,
        noise_nbar_over_Q=n_bar / device.Q_m,
        G_B=G_B,
        g_x=g_x,
        g_x_over_2pi_Hz=g_x / TWO_PI,
        g_over_wm=g_x / omega_m,
        theta_tm=params.theta_final,
        omega_0=omega_0,
        omega_0_over_wm=omega_0 / omega_m,
        upper_gap_over_2pi_Hz=upper / TWO_PI,
        crossing_B_z=crossing_field(device.D, device.gamma_B),
    )
    return params, report
