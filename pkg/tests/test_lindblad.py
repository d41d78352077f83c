import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdebruijn import linalg, lindblad
from qdebruijn.errors import (
    DegeneracyError,
    NotStationaryError,
    SingularStateError,
    StepSizeError,
    ValidationError,
)
from qdebruijn.lindblad import LindbladModel
from qdebruijn.random_models import random_density, random_hermitian, random_lindblad_model

from conftest import I2, SM, SP, SX, SY, SZ


def dephasing(hbar=1.0, gamma=1.0):
    return LindbladModel(np.zeros((2, 2)), (np.sqrt(hbar * gamma) * SZ,), hbar)


def test_lu_examples():
    m = LindbladModel(SZ, (), 1.0)
    np.testing.assert_allclose(lindblad.apply_lu(m, SZ), 0 * SZ)
    np.testing.assert_allclose(lindblad.apply_lu(m, SX), 2 * SY)
    zero = LindbladModel(np.zeros((2, 2)), (SX,), 1.0)
    np.testing.assert_allclose(lindblad.apply_lu(zero, SY), 0 * SY)


def test_lnu_examples():
    assert np.abs(lindblad.apply_lnu(LindbladModel(SZ, ()), SX)).max() == 0
    np.testing.assert_allclose(lindblad.apply_lnu(LindbladModel(SZ * 0, (SZ,)), I2 / 2), 0 * I2)
    out = lindblad.apply_lnu(LindbladModel(SZ * 0, (SM,)), np.diag([1.0, 0.0]))
    np.testing.assert_allclose(out, np.diag([-1.0, 1.0]))


def test_shape_mismatch():
    m = LindbladModel(SZ, (SM,))
    for fn in (lindblad.apply_lu, lindblad.apply_lnu, lindblad.apply_l1, lindblad.apply_l2, lindblad.apply_l3):
        with pytest.raises(ValidationError):
            fn(m, np.eye(3))


def test_model_validation():
    with pytest.raises(ValidationError):
        LindbladModel(np.array([[0, 1], [0, 0]]), ())
    with pytest.raises(ValidationError):
        LindbladModel(SZ, (np.eye(3),))
    with pytest.raises(ValidationError):
        LindbladModel(SZ, (), hbar=0.0)


def test_cartesian_split_reconstructs(rng):
    m = random_lindblad_model(4, rng, 3)
    for l, a, b in zip(m.lindblads, m.split.a_ops, m.split.b_ops):
        assert np.abs(a + 1j * b - l).max() <= 1e-12
        assert linalg.hermitian_deviation(a)[0] <= 1e-15
        assert linalg.hermitian_deviation(b)[0] <= 1e-15


def test_hermitian_lindblad_has_no_l2_l3(rng):
    m = LindbladModel(random_hermitian(3, rng), (random_hermitian(3, rng),))
    o = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert np.abs(lindblad.apply_l2(m, o)).max() < 1e-12
    assert np.abs(lindblad.apply_l3(m, o)).max() < 1e-12
    np.testing.assert_allclose(lindblad.apply_l1(m, o), lindblad.apply_lnu(m, o), atol=1e-12)


@pytest.mark.parametrize("hbar", [1.0, 0.5, 2.0])
def test_unit_operator_values(hbar):
    m = LindbladModel(np.zeros((2, 2)), (SM,), hbar)
    comm = (SM @ SP - SP @ SM) / (2 * hbar)
    assert np.abs(lindblad.apply_l1(m, I2)).max() == 0
    np.testing.assert_allclose(lindblad.apply_l2(m, I2), comm)
    # L3[1] has the same sign as L2[1]; their difference annihilates the identity
    np.testing.assert_allclose(lindblad.apply_l3(m, I2), comm)
    np.testing.assert_allclose(lindblad.adjoint_apply("2", m, I2), -lindblad.adjoint_apply("3", m, I2))
    np.testing.assert_allclose(lindblad.apply_l2(m, I2 / 2), np.diag([-0.5, 0.5]) / (2 * hbar))


def test_amplitude_damping_split_sums_to_lnu(rng):
    m = LindbladModel(np.zeros((2, 2)), (SM,))
    rho = random_density(2, rng)
    total = lindblad.apply_l1(m, rho) + lindblad.apply_l2(m, rho) + lindblad.apply_l3(m, rho)
    np.testing.assert_allclose(total, lindblad.apply_lnu(m, rho), atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 3), st.floats(0.2, 3.0), st.integers(0, 2**31 - 1))
def test_decomposition_property(dim, k, hbar, seed):
    r = np.random.default_rng(seed)
    m = random_lindblad_model(dim, r, k, hbar)
    o = r.normal(size=(dim, dim)) + 1j * r.normal(size=(dim, dim))
    split = lindblad.apply_l1(m, o) + lindblad.apply_l2(m, o) + lindblad.apply_l3(m, o)
    assert np.linalg.norm(split - lindblad.apply_lnu(m, o)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**31 - 1))
def test_adjoint_properties(dim, seed):
    r = np.random.default_rng(seed)
    m = random_lindblad_model(dim, r, 2)
    a = r.normal(size=(dim, dim)) + 1j * r.normal(size=(dim, dim))
    b = r.normal(size=(dim, dim)) + 1j * r.normal(size=(dim, dim))
    for which in lindblad.GENERATORS:
        lhs = linalg.hs_inner(lindblad.apply(which, m, a), b)
        rhs = linalg.hs_inner(a, lindblad.adjoint_apply(which, m, b))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))
    for which, sign in (("1", 1), ("2", 1), ("3", -1)):
        lhs = linalg.hs_inner(lindblad.apply(which, m, a), b)
        rhs = linalg.hs_inner(a, lindblad.apply(which, m, b))
        assert abs(lhs - sign * rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_adjoint_examples(rng):
    m = LindbladModel(random_hermitian(2, rng), (SM, 0.3 * SX))
    o = random_hermitian(2, rng)
    np.testing.assert_allclose(lindblad.adjoint_apply("3", m, o), -lindblad.apply_l3(m, o), atol=1e-14)
    assert np.abs(lindblad.adjoint_apply("1", m, I2)).max() < 1e-15
    with pytest.raises(ValidationError):
        lindblad.adjoint_apply("bogus", m, o)
    with pytest.raises(ValidationError):
        lindblad.apply("bogus", m, o)


def test_trace_preservation(rng):
    for _ in range(20):
        m = random_lindblad_model(4, rng, 2)
        rho = random_density(4, rng)
        assert abs(np.trace(lindblad.apply_generator(m, rho))) <= 1e-12


def test_superoperator_matches_direct_application(rng):
    m = random_lindblad_model(3, rng, 2, hbar=0.7)
    rho = random_density(3, rng)
    for which in lindblad.GENERATORS:
        via_super = linalg.unvec(lindblad.superoperator(m, which) @ linalg.vec(rho), 3)
        np.testing.assert_allclose(via_super, lindblad.apply(which, m, rho), atol=1e-12)


# -- gauge ---------------------------------------------------------------------


def test_gauge_zero_alphas_identical(rng):
    m = random_lindblad_model(3, rng, 2)
    g = lindblad.gauge_transform(m, [0, 0])
    np.testing.assert_array_equal(g.hamiltonian, m.hamiltonian)
    for a, b in zip(g.lindblads, m.lindblads):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("hbar", [1.0, 0.3, 2.5])
def test_gauge_amplitude_damping_generator_unchanged(hbar, rng):
    m = LindbladModel(np.zeros((2, 2)), (SM,), hbar)
    g = lindblad.gauge_transform(m, [1.0])
    for _ in range(5):
        rho = random_density(2, rng)
        np.testing.assert_allclose(lindblad.apply_generator(g, rho), lindblad.apply_generator(m, rho), atol=1e-13)


def test_gauge_superoperator_shifts(rng):
    m = random_lindblad_model(3, rng, 2, hbar=0.8)
    alphas = rng.normal(size=2) + 1j * rng.normal(size=2)
    g = lindblad.gauge_transform(m, alphas)
    h_shift = lindblad.gauge_hamiltonian_shift(m, alphas)
    shift_model = LindbladModel(h_shift, (), m.hbar)
    o = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    np.testing.assert_allclose(lindblad.apply_l1(g, o), lindblad.apply_l1(m, o), atol=1e-12)
    np.testing.assert_allclose(lindblad.apply_l2(g, o), lindblad.apply_l2(m, o), atol=1e-12)
    np.testing.assert_allclose(
        lindblad.apply_l3(g, o), lindblad.apply_l3(m, o) - lindblad.apply_lu(shift_model, o), atol=1e-12
    )


def test_gauge_wrong_length(rng):
    with pytest.raises(ValidationError):
        lindblad.gauge_transform(random_lindblad_model(2, rng, 2), [1.0])


# -- evolution -----------------------------------------------------------------


def test_evolve_zero_time_returns_input(rng):
    m = random_lindblad_model(3, rng)
    rho = random_density(3, rng)
    np.testing.assert_array_equal(lindblad.evolve(m, rho, 0.0), rho)


def test_evolve_unitary_conjugation(rng):
    hbar = 0.6
    m = LindbladModel(SZ, (), hbar)
    rho = random_density(2, rng)
    t = 1.3
    u = linalg.matrix_exp(-1j * SZ * t / hbar)
    out = lindblad.evolve(m, rho, t)
    np.testing.assert_allclose(out, u @ rho @ u.conj().T, atol=1e-12)
    assert linalg.vn_entropy(out) == pytest.approx(linalg.vn_entropy(rho), abs=1e-12)


@pytest.mark.parametrize("method", ["superop-exp", "rk4"])
def test_dephasing_coherence_decay(method):
    hbar, gamma, t = 0.5, 0.8, 1.1
    rho = np.array([[0.6, 0.2 + 0.1j], [0.2 - 0.1j, 0.4]])
    out = lindblad.evolve(dephasing(hbar, gamma), rho, t, method=method, step=1e-3)
    assert out[0, 1] == pytest.approx(rho[0, 1] * np.exp(-2 * gamma * t), abs=1e-10)
    assert out[0, 0].real == pytest.approx(0.6, abs=1e-12)


def test_evolve_errors(rng):
    m = random_lindblad_model(2, rng)
    rho = random_density(2, rng)
    with pytest.raises(ValidationError):
        lindblad.evolve(m, rho, -1.0)
    with pytest.raises(StepSizeError):
        lindblad.evolve(LindbladModel(np.zeros((2, 2)), (5 * SM, 5 * SZ)), rho, 5.0, method="rk4", step=1.0)
    with pytest.raises(ValidationError):
        lindblad.evolve(m, rho, 1.0, method="euler")


def test_semigroup_property(rng):
    m = random_lindblad_model(3, rng, 2)
    rho = random_density(3, rng)
    a = lindblad.evolve(m, lindblad.evolve(m, rho, 0.4), 0.7)
    np.testing.assert_allclose(a, lindblad.evolve(m, rho, 1.1), atol=1e-12)


# -- entropy rates -----------------------------------------------------------------


def test_unitary_only_rates_vanish(rng):
    m = LindbladModel(random_hermitian(3, rng), ())
    rep = lindblad.entropy_rate_report(m, random_density(3, rng))
    assert rep.delta == 0 and rep.psi == 0
    assert abs(rep.rate_fd) < 1e-8


@pytest.mark.parametrize("hbar", [1.0, 0.25, 4.0])
def test_dephasing_closed_form(hbar):
    # oracle: finite difference of the entropy along the exact flow
    c = 0.25
    rho = I2 / 2 + c * SX
    rep = lindblad.entropy_rate_report(dephasing(hbar), rho)
    closed = 2 * c * np.log((1 + 2 * c) / (1 - 2 * c))
    assert rep.rate_fd == pytest.approx(closed, abs=1e-7)
    assert rep.delta == pytest.approx(closed, abs=1e-12)
    assert rep.delta == pytest.approx(0.5 * np.log(3), abs=1e-12)
    assert rep.psi == 0


def test_diagonal_state_under_dephasing():
    rep = lindblad.entropy_rate_report(dephasing(), np.diag([0.7, 0.3]))
    assert abs(rep.delta) < 1e-15 and abs(rep.psi) < 1e-15
    assert abs(rep.rate_fd) < 1e-12


def test_rank_deficient_state_rejected():
    with pytest.raises(SingularStateError):
        lindblad.entropy_rate_report(dephasing(), np.diag([1.0, 0.0]))


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([2, 3]), st.floats(0.3, 3.0), st.integers(0, 2**31 - 1))
def test_rate_identity_property(dim, hbar, seed):
    r = np.random.default_rng(seed)
    m = random_lindblad_model(dim, r, 2, hbar)
    rep = lindblad.entropy_rate_report(m, random_density(dim, r, 0.05))
    assert rep.residual <= rep.rate_tol
    assert rep.delta >= -1e-9


def test_psi_independent_of_log_normalisation(rng):
    m = random_lindblad_model(3, rng, 2)
    rho = random_density(3, rng)
    log = linalg.matrix_log_psd(rho)
    d1, p1 = lindblad.fluctuation_dissipation_terms(m, rho, log)
    d2, p2 = lindblad.fluctuation_dissipation_terms(m, rho, log + 3.7 * np.eye(3))
    assert d1 == pytest.approx(d2, abs=1e-12)
    assert p1 == pytest.approx(p2, abs=1e-12)


# -- stationary states and Spohn ---------------------------------------------------


def thermal_damping(hbar=1.0):
    return LindbladModel(0.5 * SZ, (np.sqrt(hbar * 1.1) * SM, np.sqrt(hbar * 0.1) * SP), hbar)


def test_stationary_state_thermal_qubit():
    rho_s = lindblad.stationary_state(thermal_damping())
    np.testing.assert_allclose(rho_s, np.diag([0.1, 1.1]) / 1.2, atol=1e-12)


def test_stationary_state_not_unique():
    with pytest.raises(DegeneracyError):
        lindblad.stationary_state(dephasing())


def test_spohn_at_equilibrium():
    m = thermal_damping()
    rho_s = lindblad.stationary_state(m)
    pi, phi = lindblad.spohn_production(m, rho_s, rho_s)
    assert abs(pi) < 1e-9 and abs(phi) < 1e-9


def test_spohn_unitary_maximally_mixed(rng):
    m = LindbladModel(random_hermitian(3, rng), ())
    pi, _ = lindblad.spohn_production(m, random_density(3, rng), np.eye(3) / 3)
    assert abs(pi) < 1e-9


def test_spohn_positive_for_excited_state():
    m = thermal_damping()
    rho_s = lindblad.stationary_state(m)
    pi, phi = lindblad.spohn_production(m, np.diag([0.8, 0.2]), rho_s)
    assert pi > 0.1
    rep = lindblad.entropy_rate_report(m, np.diag([0.8, 0.2]))
    assert phi == pytest.approx(pi - rep.rate_analytic, abs=1e-12)


def test_spohn_requires_stationary_reference():
    m = thermal_damping()
    with pytest.raises(NotStationaryError) as err:
        lindblad.spohn_production(m, np.diag([0.8, 0.2]), I2 / 2)
    assert err.value.residual > 0.1
