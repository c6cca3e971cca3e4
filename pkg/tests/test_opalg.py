import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from nvsqueeze.exceptions import (
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidParameterError,
    TruncationError,
)
from nvsqueeze.opalg import (
    FACTOR_ORDER,
    HilbertSpec,
    QState,
    build_boson_ops,
    build_hp_spin_ops,
    expect,
    lift,
    operator_set,
    thermal_min_dim,
    thermal_populations,
    thermal_state,
)


def dense(m):
    return m.toarray() if sp.issparse(m) else m


@given(st.integers(2, 40))
def test_boson_commutator_below_cutoff(dim):
    a, a_dag, n = build_boson_ops(dim)
    comm = dense(a @ a_dag - a_dag @ a)
    assert np.allclose(np.diag(comm)[:-1], 1.0)
    assert np.isclose(comm[-1, -1], -(dim - 1))
    assert np.allclose(dense(a_dag @ a), dense(n))


@given(st.integers(2, 30))
def test_hp_spin_algebra_is_exact(N):
    Jbar_x, J_x, J_y, J_z, J_plus, J_minus = (dense(o) for o in build_hp_spin_ops(N))
    assert np.allclose(J_x @ J_y - J_y @ J_x, 1j * J_z)
    assert np.allclose(J_y @ J_z - J_z @ J_y, 1j * J_x)
    casimir = J_x @ J_x + J_y @ J_y + J_z @ J_z
    assert np.allclose(casimir, N / 2 * (N / 2 + 1) * np.eye(N + 1))
    assert np.allclose(Jbar_x * np.sqrt(N), J_x)
    assert np.allclose(J_minus, J_plus.conj().T)


def test_hp_vacuum_is_lowest_weight():
    _, _, _, J_z, J_plus, J_minus = build_hp_spin_ops(4)
    assert dense(J_z)[0, 0] == -2
    assert np.allclose(dense(J_minus)[:, 0], 0)
    assert np.isclose(dense(J_plus)[1, 0], 2.0)  # sqrt(N) for n = 0


def test_invalid_dimensions():
    with pytest.raises(InvalidDimensionError):
        build_boson_ops(1)
    with pytest.raises(InvalidParameterError):
        build_hp_spin_ops(1)
    with pytest.raises(InvalidDimensionError):
        HilbertSpec(4, 1)


def test_lift_ordering_spin_first():
    spec = HilbertSpec(2, 3)
    assert spec.ordering == FACTOR_ORDER == ("spin", "phonon")
    assert spec.dim == 9
    ops = operator_set(2, 3)
    Jz = dense(lift(build_hp_spin_ops(2)[3], "spin", spec))
    assert np.allclose(np.diag(Jz), np.repeat([-1, 0, 1], 3))
    nb = dense(ops.n_b)
    assert np.allclose(np.diag(nb), np.tile([0, 1, 2], 3))
    with pytest.raises(DimensionMismatchError):
        lift(np.eye(4), "spin", spec)
    with pytest.raises(ValueError):
        lift(np.eye(3), "bath", spec)


def test_lifted_operators_commute():
    ops = operator_set(3, 5)
    comm = ops.b @ ops.J_x - ops.J_x @ ops.b
    assert abs(comm).max() == 0


@given(st.floats(0.0, 8.0))
def test_thermal_populations_sum_and_mean(n_th):
    dim = thermal_min_dim(n_th) + 5
    p, tail = thermal_populations(n_th, dim)
    assert np.isclose(p.sum(), 1.0)
    assert tail < 1e-6
    assert abs(p @ np.arange(dim) - n_th) < 1e-4 * max(1.0, n_th)


def test_thermal_truncation_error_reports_min_dim():
    with pytest.raises(TruncationError) as info:
        thermal_populations(5.0, 20)
    assert info.value.min_dim == thermal_min_dim(5.0)
    assert thermal_populations(5.0, info.value.min_dim)[1] < 1e-6
    with pytest.raises(InvalidParameterError):
        thermal_state(-1.0, 5)


def test_qstate_reductions_and_checks():
    spec = HilbertSpec(2, 12)
    spin = np.diag([0.5, 0.3, 0.2]).astype(complex)
    ph = thermal_state(0.3, 12)
    q = QState.product(spin, ph, spec)
    assert np.allclose(q.spin_reduced(), spin)
    assert np.allclose(q.phonon_reduced(), ph)
    assert np.isclose(q.trace(), 1.0)
    q.check()
    bad = QState(q.rho * 2, spec)
    with pytest.raises(ValueError):
        bad.check()
    with pytest.raises(DimensionMismatchError):
        QState(np.eye(5), spec)


def test_expect_hermitian_real():
    ops = operator_set(2, 30)
    q = QState.product(np.diag([1, 0, 0]).astype(complex), thermal_state(0.5, 30), ops.spec)
    assert np.isclose(expect(ops.J_z, q), -1.0)
    assert np.isclose(expect(ops.n_b, q).real, 0.5, atol=1e-6)
    with pytest.raises(DimensionMismatchError):
        expect(np.eye(3), q)


def test_operator_set_cached():
    assert operator_set(3, 6) is operator_set(3, 6)
