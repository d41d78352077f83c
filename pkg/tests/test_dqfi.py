import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdebruijn import dqfi, linalg, lindblad
from qdebruijn.dqfi import UnitaryOrbitFamily
from qdebruijn.errors import DivergenceError, SingularStateError, StepSizeError, ValidationError
from qdebruijn.lindblad import LindbladModel
from qdebruijn.random_models import random_density, random_hermitian, random_lindblad_model

from conftest import I2, SX, SZ


def test_relative_entropy_examples():
    assert dqfi.relative_entropy(I2 / 2, I2 / 2) == pytest.approx(0.0, abs=1e-15)
    a = dqfi.relative_entropy(np.diag([0.75, 0.25]), I2 / 2)
    assert a == pytest.approx(0.75 * np.log(1.5) + 0.25 * np.log(0.5), abs=1e-14)
    assert a == pytest.approx(0.1308, abs=5e-5)
    b = dqfi.relative_entropy(I2 / 2, np.diag([0.75, 0.25]))
    assert b == pytest.approx(0.5 * np.log(2 / 3) + 0.5 * np.log(2), abs=1e-14)
    assert b == pytest.approx(0.1438, abs=5e-5)


def test_relative_entropy_support_violation():
    with pytest.raises(DivergenceError) as err:
        dqfi.relative_entropy(I2 / 2, np.diag([1.0, 0.0]))
    assert err.value.value == np.inf
    # support of rho inside support of sigma is fine
    assert dqfi.relative_entropy(np.diag([1.0, 0.0]), np.diag([0.5, 0.5])) == pytest.approx(np.log(2))


def test_commutator_examples():
    assert dqfi.dqfi_commutator(np.diag([0.3, 0.7]), SZ) == pytest.approx(0.0, abs=1e-15)
    assert dqfi.dqfi_commutator(I2 / 2 + 0.25 * SX, SZ) == pytest.approx(np.log(3), abs=1e-13)
    assert dqfi.dqfi_commutator(random_density(3, np.random.default_rng(1)), np.eye(3)) == pytest.approx(0, abs=1e-14)


def test_commutator_requires_full_rank():
    with pytest.raises(SingularStateError):
        dqfi.dqfi_commutator(np.diag([1.0, 0.0]), SX)


def test_family_divides_by_hbar():
    rho = I2 / 2 + 0.25 * SX
    f = UnitaryOrbitFamily(rho, 2.0 * SZ, hbar=2.0)
    assert dqfi.family_dqfi(f) == pytest.approx(np.log(3), abs=1e-13)


def test_family_validation():
    with pytest.raises(ValidationError):
        UnitaryOrbitFamily(I2 / 2, np.eye(3))
    with pytest.raises(ValidationError):
        UnitaryOrbitFamily(I2 / 2, SX, hbar=-1)


def test_finite_difference_examples():
    f = UnitaryOrbitFamily(I2 / 2 + 0.25 * SX, SZ)
    assert dqfi.dqfi_finite_difference(f, 1e-3) == pytest.approx(np.log(3), abs=1e-4)
    commuting = UnitaryOrbitFamily(np.diag([0.3, 0.7]), SZ)
    assert abs(dqfi.dqfi_finite_difference(commuting)) < 1e-6


def test_relative_entropy_and_slope_vanish_at_zero():
    f = UnitaryOrbitFamily(I2 / 2 + 0.25 * SX, SZ)
    assert dqfi.orbit_relative_entropy(f, 0.0) == pytest.approx(0.0, abs=1e-15)
    h = 1e-4
    slope = (dqfi.orbit_relative_entropy(f, h) - dqfi.orbit_relative_entropy(f, -h)) / (2 * h)
    assert abs(slope) < 1e-8


def test_finite_difference_roundoff_detected():
    f = UnitaryOrbitFamily(I2 / 2 + 0.25 * SX, SZ)
    with pytest.raises(StepSizeError):
        dqfi.dqfi_finite_difference(f, 1e-7)
    with pytest.raises(ValidationError):
        dqfi.dqfi_finite_difference(f, 0.0)


def test_orbit_preserves_spectrum(rng):
    rho = random_density(3, rng)
    f = UnitaryOrbitFamily(rho, random_hermitian(3, rng), 0.7)
    base = np.linalg.eigvalsh(rho)
    for d in (0.1, -0.5, 2.0):
        np.testing.assert_allclose(np.linalg.eigvalsh(f.state(d)), base, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([2, 3]), st.integers(0, 2**31 - 1))
def test_commutator_vs_finite_difference_property(dim, seed):
    r = np.random.default_rng(seed)
    f = UnitaryOrbitFamily(random_density(dim, r, 0.05), random_hermitian(dim, r, 0.5))
    exact = dqfi.family_dqfi(f)
    rep = dqfi.dqfi_finite_difference_report(f)
    assert exact >= -1e-10
    assert abs(exact - rep.value) <= rep.tolerance


def test_quadratic_expansion_ratio(rng):
    f = UnitaryOrbitFamily(random_density(3, rng, 0.05), random_hermitian(3, rng))
    j = dqfi.family_dqfi(f)
    ratios = [dqfi.orbit_relative_entropy(f, d) / (0.5 * j * d**2) for d in (1e-1, 3e-2, 1e-2)]
    gaps = [abs(r - 1) for r in ratios]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-3


@pytest.mark.parametrize("hbar", [1.0, 0.3, 3.0])
def test_delta_from_dqfi_dephasing(hbar):
    # L = sqrt(hbar gamma) sigma_z pins the sqrt(hbar) placement in the generators
    m = LindbladModel(np.zeros((2, 2)), (np.sqrt(hbar) * SZ,), hbar)
    assert dqfi.delta_from_dqfi(m, I2 / 2 + 0.25 * SX) == pytest.approx(0.5 * np.log(3), abs=1e-12)


def test_delta_from_dqfi_no_lindblads(rng):
    m = LindbladModel(random_hermitian(2, rng), ())
    assert dqfi.delta_from_dqfi(m, random_density(2, rng)) == 0


@pytest.mark.parametrize("hbar", [1.0, 0.4, 2.5])
def test_delta_from_dqfi_matches_trace_form(hbar, rng):
    for _ in range(10):
        m = random_lindblad_model(2, rng, 2, hbar)
        rho = random_density(2, rng)
        delta, _ = lindblad.fluctuation_dissipation_terms(m, rho)
        assert dqfi.delta_from_dqfi(m, rho) == pytest.approx(delta, abs=1e-9)
