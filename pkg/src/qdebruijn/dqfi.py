"""Divergence-based quantum Fisher information (DQFI).

For a unitary orbit ``rho(d) = U(d) rho U(d)^H`` with
``U(d) = exp(-i d C / hbar)``, the DQFI is the curvature of
``d -> S(rho(d) || rho)`` at ``d = 0``. It equals
``Tr(rho [G, [G, ln rho]])`` with effective generator ``G = C / hbar``.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DivergenceError, StepSizeError, ValidationError
from .lindblad import require_full_rank

SUPPORT_TOL = 1e-12
ROUNDOFF_LIMIT = 1e-6


@dataclass(frozen=True, eq=False)
class UnitaryOrbitFamily:
    """States ``exp(-i d C/hbar) rho exp(+i d C/hbar)`` around ``base_state``."""

    base_state: np.ndarray
    generator: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        rho = linalg.check_density(self.base_state)
        c = linalg.check_hermitian(np.asarray(self.generator, dtype=complex))
        if c.shape != rho.shape:
            raise ValidationError("generator and base state dimensions differ")
        if not self.hbar > 0:
            raise ValidationError("hbar must be positive")
        object.__setattr__(self, "base_state", rho)
        object.__setattr__(self, "generator", c)

    def unitary(self, dtheta):
        return linalg.hermitian_function(self.generator, lambda lam: np.exp(-1j * dtheta * lam / self.hbar))

    def state(self, dtheta):
        u = self.unitary(dtheta)
        out = u @ self.base_state @ u.conj().T
        return 0.5 * (out + out.conj().T)


def relative_entropy(rho, sigma):
    """Quantum relative entropy ``Tr(rho (ln rho - ln sigma))`` in nats.

    Raises :class:`DivergenceError` (with ``value=inf``) when the support
    of ``rho`` is not contained in the support of ``sigma``.
    """
    rho = linalg.check_density(rho)
    sigma = linalg.check_density(sigma)
    lr, ur = linalg.herm_eig(rho)
    ls, us = linalg.herm_eig(sigma)
    kernel = ls <= SUPPORT_TOL
    if np.any(kernel):
        leak = np.real(np.einsum("ij,jk,ki->", us[:, kernel].conj().T, rho, us[:, kernel]))
        if leak > SUPPORT_TOL:
            raise DivergenceError(
                f"support of rho is not contained in support of sigma (weight {leak:.3e} outside)"
            )
    pos = lr > linalg.LOG_FLOOR
    s_rho = float(np.sum(lr[pos] * np.log(lr[pos])))
    log_sigma = np.where(kernel, 0.0, np.log(np.maximum(ls, linalg.LOG_FLOOR)))
    # Tr(rho ln sigma) in the eigenbasis of sigma
    diag = np.real(np.einsum("ji,jk,ki->i", us.conj(), rho, us))
    cross = float(np.sum(diag * log_sigma))
    return s_rho - cross


def dqfi_commutator(rho, c):
    """``Tr(rho [C, [C, ln rho]])`` for a full-rank state.

    ``c`` is the effective generator, i.e. already divided by hbar when
    it comes from a unitary ``exp(-i d C / hbar)``.
    """
    rho = linalg.check_density(rho)
    c = linalg.check_hermitian(np.asarray(c, dtype=complex))
    require_full_rank(rho)
    log_rho = linalg.matrix_log_psd(rho)
    inner = c @ log_rho - log_rho @ c
    outer = c @ inner - inner @ c
    return float(np.trace(rho @ outer).real)


def family_dqfi(f):
    """DQFI of a unitary orbit family via the commutator formula."""
    return dqfi_commutator(f.base_state, f.generator / f.hbar)


def orbit_relative_entropy(f, dtheta):
    """``S(rho(dtheta) || rho(0))`` along the orbit."""
    return relative_entropy(f.state(dtheta), f.base_state)


@dataclass(frozen=True)
class FiniteDifferenceDqfi:
    value: float
    coarse: float
    fine: float
    step: float
    curvature_bound: float

    @property
    def tolerance(self):
        return max(1e-5, self.curvature_bound * self.step**2)


def dqfi_finite_difference_report(f, h=1e-3):
    """Second central difference of the orbit relative entropy at zero.

    The relative entropy and its first derivative vanish at ``d = 0``, so
    the second difference is ``(S(h) + S(-h)) / h^2``. Evaluated at ``h``
    and ``h/2`` and combined by one Richardson step; the step-halving
    difference also gives the curvature estimate ``C4``.
    """
    if not h > 0:
        raise ValidationError("step must be positive")
    require_full_rank(f.base_state)

    def second_difference(step):
        return (orbit_relative_entropy(f, step) + orbit_relative_entropy(f, -step)) / step**2

    coarse = second_difference(h)
    fine = second_difference(h / 2)
    change = abs(fine - coarse)
    # fourth derivative of S scales like ||G||^4 times the spread of ln rho
    lam = np.linalg.eigvalsh(f.generator / f.hbar)
    spread_g = lam[-1] - lam[0]
    lr = np.log(np.linalg.eigvalsh(f.base_state))
    scale = max(1.0, spread_g**4 * max(1.0, lr[-1] - lr[0]))
    # S is a difference of O(|ln rho|) terms, so its absolute rounding error
    # is about eps * |ln rho| and the second difference amplifies it by 1/h^2
    roundoff = np.finfo(float).eps * max(1.0, np.abs(lr).max()) / (h / 2) ** 2
    if roundoff > ROUNDOFF_LIMIT:
        raise StepSizeError(
            f"finite-difference DQFI step h={h:g} too small: rounding error ~{roundoff:.1e} dominates"
        )
    if change > 10 * h**2 * scale + 10 * roundoff:
        raise StepSizeError(
            f"finite-difference DQFI unstable at h={h:g}: halving changed the result by {change:.3e}"
        )
    c4 = change / (0.75 * h**2)
    value = (4 * fine - coarse) / 3
    return FiniteDifferenceDqfi(float(value), float(coarse), float(fine), float(h), float(c4))


def dqfi_finite_difference(f, h=1e-3):
    return dqfi_finite_difference_report(f, h).value


def delta_from_dqfi(m, rho):
    """``Delta = 1/2 sum_k (J[rho; sqrt(hbar) A_k] + J[rho; sqrt(hbar) B_k])``.

    Each term is the DQFI of the orbit generated by
    ``exp(-i d sqrt(hbar) X / hbar)``.
    """
    rho = linalg.check_density(rho)
    require_full_rank(rho)
    root = np.sqrt(m.hbar)
    total = 0.0
    for a, b in zip(m.split.a_ops, m.split.b_ops):
        total += family_dqfi(UnitaryOrbitFamily(rho, root * a, m.hbar))
        total += family_dqfi(UnitaryOrbitFamily(rho, root * b, m.hbar))
    return 0.5 * total
