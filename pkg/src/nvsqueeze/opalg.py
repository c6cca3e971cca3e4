"""Operators on the truncated (HP spin) x (phonon) Hilbert space.

The composite space is always ordered spin first, phonon second, so an
index ``i`` of the full space decomposes as ``i = n_a * phonon_dim + n_b``.
Operators are stored as CSR sparse matrices; density matrices are dense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .exceptions import (
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidParameterError,
    TruncationError,
)

FACTOR_ORDER = ("spin", "phonon")
THERMAL_TAIL_LIMIT = 1e-6


@dataclass(frozen=True)
class HilbertSpec:
    """Truncation of the two factors.

    ``spin_dim`` is always ``N + 1``: the HP occupation never exceeds ``N``
    on the symmetric subspace, so this cutoff loses nothing.
    """

    N: int
    phonon_dim: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise InvalidParameterError(f"need an integer N >= 2, got {self.N}")
        if int(self.phonon_dim) != self.phonon_dim or self.phonon_dim < 2:
            raise InvalidDimensionError(f"phonon_dim must be >= 2, got {self.phonon_dim}")

    @property
    def spin_dim(self) -> int:
        return self.N + 1

    @property
    def dim(self) -> int:
        return self.spin_dim * self.phonon_dim

    @property
    def ordering(self) -> tuple[str, str]:
        return FACTOR_ORDER


def build_boson_ops(dim: int):
    """Return ``(a, a_dag, n)`` for a mode truncated to ``dim`` levels."""
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"boson dimension must be >= 2, got {dim}")
    dim = int(dim)
    a = sp.diags(np.sqrt(np.arange(1, dim, dtype=float)), 1, shape=(dim, dim), format="csr", dtype=complex)
    a_dag = a.conj().T.tocsr()
    n = sp.diags(np.arange(dim, dtype=float), 0, format="csr", dtype=complex)
    return a, a_dag, n


def build_hp_spin_ops(N: int):
    """Collective spin operators in the Holstein-Primakoff boson basis.

    Returns ``(Jbar_x, J_x, J_y, J_z, J_plus, J_minus)`` on the ``N + 1``
    dimensional space, basis index = number of flipped spins.
    """
    if int(N) != N or N < 2:
        raise InvalidParameterError(f"need an integer N >= 2, got {N}")
    N = int(N)
    a, a_dag, n_a = build_boson_ops(N + 1)
    occupation = np.arange(N + 1, dtype=float)
    root = np.sqrt(np.clip(N - occupation, 0.0, None))
    J_plus = (a_dag @ sp.diags(root, 0, dtype=complex)).tocsr()
    J_minus = J_plus.conj().T.tocsr()
    J_z = sp.diags(occupation - N / 2, 0, format="csr", dtype=complex)
    J_x = ((J_plus + J_minus) / 2).tocsr()
    J_y = ((J_plus - J_minus) / 2j).tocsr()
    Jbar_x = (J_x / math.sqrt(N)).tocsr()
    return Jbar_x, J_x, J_y, J_z, J_plus, J_minus


def lift(op, which_factor: str, spec: HilbertSpec):
    """Embed a single-factor operator into the composite space."""
    op = sp.csr_matrix(op)
    if which_factor == "spin":
        if op.shape != (spec.spin_dim, spec.spin_dim):
            raise DimensionMismatchError(f"spin operator has shape {op.shape}, expected {spec.spin_dim}")
        return sp.kron(op, sp.identity(spec.phonon_dim, dtype=complex), format="csr")
    if which_factor == "phonon":
        if op.shape != (spec.phonon_dim, spec.phonon_dim):
            raise DimensionMismatchError(f"phonon operator has shape {op.shape}, expected {spec.phonon_dim}")
        return sp.kron(sp.identity(spec.spin_dim, dtype=complex), op, format="csr")
    raise ValueError(f"which_factor must be 'spin' or 'phonon', got {which_factor!r}")


def thermal_min_dim(n_th: float, tail: float = THERMAL_TAIL_LIMIT) -> int:
    """Smallest cutoff whose discarded thermal tail mass is below ``tail``."""
    if n_th <= 0:
        return 2
    ratio = n_th / (1.0 + n_th)
    return max(2, math.floor(math.log(tail) / math.log(ratio)) + 1)


def thermal_populations(n_th: float, dim: int):
    """Renormalized thermal populations and the tail mass removed by truncation."""
    if n_th < 0:
        raise InvalidParameterError(f"thermal occupation must be >= 0, got {n_th}")
    if dim < 2:
        raise InvalidDimensionError(f"dimension must be >= 2, got {dim}")
    if n_th == 0:
        p = np.zeros(dim)
        p[0] = 1.0
        return p, 0.0
    ratio = n_th / (1.0 + n_th)
    tail = ratio**dim
    if tail >= THERMAL_TAIL_LIMIT:
        need = thermal_min_dim(n_th)
        raise TruncationError(
            f"thermal state with n_th={n_th} truncated at {dim} levels drops mass {tail:.3g}; "
            f"use at least {need} levels",
            min_dim=need,
        )
    p = ratio ** np.arange(dim) / (1.0 + n_th)
    return p / p.sum(), tail


def thermal_state(n_th: float, dim: int) -> np.ndarray:
    p, _ = thermal_populations(n_th, dim)
    return np.diag(p).astype(complex)


@dataclass(frozen=True)
class OperatorSet:
    """All operators of one truncation, lifted to the composite space.

    ``spin`` holds the unlifted HP operators keyed by name for use on reduced
    spin states.
    """

    spec: HilbertSpec
    a: sp.csr_matrix
    a_dag: sp.csr_matrix
    n_a: sp.csr_matrix
    b: sp.csr_matrix
    b_dag: sp.csr_matrix
    n_b: sp.csr_matrix
    Jbar_x: sp.csr_matrix
    J_x: sp.csr_matrix
    J_y: sp.csr_matrix
    J_z: sp.csr_matrix
    J_plus: sp.csr_matrix
    J_minus: sp.csr_matrix
    spin: dict = field(repr=False, compare=False)

    @property
    def identity(self):
        return sp.identity(self.spec.dim, dtype=complex, format="csr")


@lru_cache(maxsize=32)
def spin_operators(N: int) -> dict:
    a, a_dag, n_a = build_boson_ops(N + 1)
    Jbar_x, J_x, J_y, J_z, J_plus, J_minus = build_hp_spin_ops(N)
    ops = dict(a=a, a_dag=a_dag, n_a=n_a, Jbar_x=Jbar_x, J_x=J_x, J_y=J_y, J_z=J_z,
               J_plus=J_plus, J_minus=J_minus)
    for m in ops.values():
        m.data.setflags(write=False)
    return ops


@lru_cache(maxsize=16)
def operator_set(N: int, phonon_dim: int) -> OperatorSet:
    """Build (or fetch from cache) the operator set for a truncation."""
    spec = HilbertSpec(N, phonon_dim)
    spin = spin_operators(N)
    b, b_dag, n_b = build_boson_ops(phonon_dim)
    lifted = {k: lift(v, "spin", spec) for k, v in spin.items()}
    lifted.update(b=lift(b, "phonon", spec), b_dag=lift(b_dag, "phonon", spec), n_b=lift(n_b, "phonon", spec))
    for m in lifted.values():
        m.data.setflags(write=False)
    return OperatorSet(spec=spec, spin=spin, **lifted)


@dataclass
class QState:
    """Density operator on the composite space (spin factor first)."""

    rho: np.ndarray
    spec: HilbertSpec
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.shape != (self.spec.dim, self.spec.dim):
            raise DimensionMismatchError(f"rho has shape {self.rho.shape}, spec needs {self.spec.dim}")

    @property
    def ordering(self):
        return self.spec.ordering

    @classmethod
    def product(cls, spin_rho, phonon_rho, spec: HilbertSpec, **meta):
        return cls(np.kron(spin_rho, phonon_rho), spec, dict(meta))

    def spin_reduced(self) -> np.ndarray:
        s, p = self.spec.spin_dim, self.spec.phonon_dim
        return np.einsum("ipjp->ij", self.rho.reshape(s, p, s, p))

    def phonon_reduced(self) -> np.ndarray:
        s, p = self.spec.spin_dim, self.spec.phonon_dim
        return np.einsum("ipiq->pq", self.rho.reshape(s, p, s, p))

    def trace(self) -> complex:
        return np.trace(self.rho)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh((self.rho + self.rho.conj().T) / 2)[0])

    def check(self, herm_tol=1e-12, trace_tol=1e-9, eig_tol=-1e-8):
        """Raise ``ValueError`` if any density-matrix invariant is violated."""
        if self.hermiticity_error() > herm_tol:
            raise ValueError(f"state not hermitian: {self.hermiticity_error():.3g}")
        if abs(self.trace() - 1) > trace_tol:
            raise ValueError(f"state trace {self.trace()} differs from 1")
        if self.min_eigenvalue() < eig_tol:
            raise ValueError(f"state has negative eigenvalue {self.min_eigenvalue():.3g}")
        return self


def expect(op, state) -> complex:
    """``Tr(op rho)`` for a sparse or dense operator and a QState or matrix."""
    rho = state.rho if isinstance(state, QState) else np.asarray(state)
    if op.shape != rho.shape:
        raise DimensionMismatchError(f"operator {op.shape} does not match state {rho.shape}")
    if sp.issparse(op):
        value = complex(op.multiply(rho.T).sum())
        herm = abs(op - op.conj().T).max() == 0 if op.nnz else True
    else:
        op = np.asarray(op)
        value = complex(np.sum(op * rho.T))
        herm = np.array_equal(op, op.conj().T)
    if herm:
        scale = max(1.0, abs(value))
        if abs(value.imag) > 1e-10 * scale:
            raise ValueError(f"hermitian expectation has imaginary part {value.imag:.3g}")
    return value
