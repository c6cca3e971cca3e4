from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

from ..exceptions import InvalidParameterError

#: occupation cap for the truncated integrator (see ``ModelParams.bath``)
DEFAULT_EMULATION_CAP = 5.0


def coupling_for_phase(theta: float, m_periods: int = 1) -> float:
    """Invert ``theta(t_m) = 2 pi m (2 g)^2`` for ``g / omega_m``."""
    if theta < 0:
        raise InvalidParameterError(f"phase must be >= 0, got {theta}")
    return 0.5 * math.sqrt(theta / (2 * math.pi * m_periods))


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless model definition; all rates in units of omega_m.

    ``n_th`` and ``Q_m`` are the physical bath occupation and quality factor.
    ``n_th_sim`` optionally fixes the occupation actually simulated, with the
    damping rescaled so that ``n_th_sim * gamma_sim == n_th * gamma_m``.
    When it is ``None`` the closed-form propagator uses the physical bath
    directly and the truncated integrator caps the occupation at
    ``emulation_cap``.
    """

    N: int
    g_over_wm: float
    w0_over_wm: float = 0.0
    n_th: float = 0.0
    Q_m: float = 1e6
    m_periods: int = 1
    phonon_dim: int | None = None
    n_th_sim: float | None = None
    emulation_cap: float = DEFAULT_EMULATION_CAP

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise InvalidParameterError(f"need an integer N >= 2, got {self.N}")
        if self.g_over_wm < 0:
            raise InvalidParameterError(f"g_over_wm must be >= 0, got {self.g_over_wm}")
        if not self.Q_m > 0:
            raise InvalidParameterError(f"Q_m must be > 0, got {self.Q_m}")
        if int(self.m_periods) != self.m_periods or self.m_periods < 1:
            raise InvalidParameterError(f"m_periods must be a positive integer, got {self.m_periods}")
        if self.n_th < 0:
            raise InvalidParameterError(f"n_th must be >= 0, got {self.n_th}")
        if self.n_th_sim is not None and self.n_th_sim < 0:
            raise InvalidParameterError(f"n_th_sim must be >= 0, got {self.n_th_sim}")

    @classmethod
    def for_phase(cls, N: int, theta: float, m_periods: int = 1, **kwargs) -> "ModelParams":
        """Parameters whose geometric phase at ``t_m`` equals ``theta``."""
        return cls(N=N, g_over_wm=coupling_for_phase(theta, m_periods), m_periods=m_periods, **kwargs)

    @classmethod
    def for_noise(cls, N: int, theta: float, noise: float, Q_m: float = 1e6, m_periods: int = 1, **kwargs):
        """Parameters at a given ``n_th / Q_m`` ratio, with ``Q_m`` held fixed."""
        return cls.for_phase(N, theta, m_periods, n_th=noise * Q_m, Q_m=Q_m, **kwargs)

    @property
    def gamma_m(self) -> float:
        return 1.0 / self.Q_m

    @property
    def lam(self) -> float:
        """Collective coupling ``2 sqrt(N) g``."""
        return 2.0 * math.sqrt(self.N) * self.g_over_wm

    @property
    def noise(self) -> float:
        return self.n_th / self.Q_m

    @property
    def t_final(self) -> float:
        return 2.0 * math.pi * self.m_periods

    @property
    def theta_final(self) -> float:
        return 2.0 * math.pi * self.m_periods * (2.0 * self.g_over_wm) ** 2

    def bath(self, emulate: bool = True) -> tuple[float, float]:
        """Return ``(n_sim, gamma_sim)`` used in the dissipators.

        The product ``n_sim * gamma_sim`` always equals ``n_th * gamma_m``.
        Without emulation (or when ``n_th`` is already below the cap) the
        physical values are returned unchanged.
        """
        if self.n_th_sim is not None:
            n_sim = self.n_th_sim
        elif emulate:
            n_sim = min(self.n_th, self.emulation_cap)
        else:
            n_sim = self.n_th
        if n_sim == self.n_th:
            return self.n_th, self.gamma_m
        if n_sim == 0:
            raise InvalidParameterError("n_th_sim = 0 cannot carry a nonzero thermal rate")
        return n_sim, self.n_th * self.gamma_m / n_sim

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)
