"""Gaussian dynamical semigroups (quadratic Hamiltonian, linear Lindblad operators).

Conventions
-----------
Quadratures are ordered ``x = (q_1..q_n, p_1..p_n)`` with
``[x_j, x_k] = i hbar J_jk`` and ``J = [[0, 1], [-1, 0]]`` blockwise.
The Hamiltonian is ``H = 1/2 x^T B x + x^T J xi`` and the Lindblad
operators are ``L_k = l_k^T J x``. With ``Gamma = sum_k l_k l_k^H``:

* diffusion ``D = hbar Re(Gamma)``
* dissipation ``C = Im(Gamma)``
* drift ``A = J B - C J``

Covariances ``V`` are dimensionless (symmetrised second moments divided
by hbar), so the vacuum has ``V = I/2``, and they evolve as
``dV/dt = D/hbar + A V + V A^T`` with ``d<x>/dt = A <x> - xi``.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import linalg
from .errors import (
    DegeneracyError,
    DivergenceError,
    FluctuationDissipationError,
    PSDViolationError,
    StabilityError,
    ValidationError,
)

FD_TOL = 1e-8
PURE_CUTOFF = 1e-7
PAIRING_TOL = 1e-9
PURE_MODE_TOL = 1e-12


def symplectic_form(n):
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def _matrix_rank(m, tol=1e-10):
    sv = np.linalg.svd(m, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > tol * max(1.0, sv[0])))


@dataclass(frozen=True, eq=False)
class GdsModel:
    """Quadratic Hamiltonian ``(B, xi)`` plus linear Lindblad vectors ``l_k``.

    ``lindblad_vectors`` has shape ``(K, 2n)``. Derived matrices are cached
    and validated on construction.
    """

    n_modes: int
    b_matrix: np.ndarray
    xi: np.ndarray
    lindblad_vectors: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        n = int(self.n_modes)
        if n < 1:
            raise ValidationError("n_modes must be >= 1")
        b = np.asarray(self.b_matrix, dtype=float)
        if b.shape != (2 * n, 2 * n):
            raise ValidationError(f"b_matrix must be {2 * n}x{2 * n}, got {b.shape}")
        if np.abs(b - b.T).max() > linalg.HERMITIAN_TOL * max(1.0, np.abs(b).max()):
            raise ValidationError("b_matrix must be symmetric")
        xi = np.asarray(self.xi, dtype=float).reshape(-1)
        if xi.shape != (2 * n,):
            raise ValidationError(f"xi must have length {2 * n}")
        ls = np.asarray(self.lindblad_vectors, dtype=complex)
        if ls.size == 0:
            ls = np.zeros((0, 2 * n), complex)
        ls = np.atleast_2d(ls)
        if ls.shape[1] != 2 * n:
            raise ValidationError(f"lindblad vectors must have length {2 * n}")
        if not self.hbar > 0:
            raise ValidationError("hbar must be positive")
        object.__setattr__(self, "n_modes", n)
        object.__setattr__(self, "b_matrix", 0.5 * (b + b.T))
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "lindblad_vectors", ls)
        object.__setattr__(self, "hbar", float(self.hbar))
        lam = np.linalg.eigvalsh(self.diffusion - 1j * self.hbar * self.dissipation)
        if lam[0] < -FD_TOL:
            raise FluctuationDissipationError(
                f"D - i hbar C is not positive semidefinite (min eigenvalue {lam[0]:.3e})"
            )

    @property
    def dim(self):
        return 2 * self.n_modes

    @property
    def n_lindblads(self):
        return self.lindblad_vectors.shape[0]

    @cached_property
    def symplectic(self):
        return symplectic_form(self.n_modes)

    @cached_property
    def gamma(self):
        ls = self.lindblad_vectors
        g = ls.T @ ls.conj()
        return 0.5 * (g + g.conj().T)

    @cached_property
    def diffusion(self):
        return self.hbar * self.gamma.real

    @cached_property
    def dissipation(self):
        return self.gamma.imag

    @cached_property
    def drift(self):
        j = self.symplectic
        return j @ self.b_matrix - self.dissipation @ j

    @property
    def rank_diffusion(self):
        return _matrix_rank(self.diffusion)

    @property
    def rank_dissipation(self):
        return _matrix_rank(self.dissipation)

    def is_stable(self):
        return bool(np.max(np.linalg.eigvals(self.drift).real) < -1e-12)


def build_model(n, hbar, b_matrix, xi, lindblad_vectors):
    return GdsModel(n, b_matrix, xi, lindblad_vectors, hbar)


def lindblad_vectors_from_matrices(diffusion, dissipation, hbar=1.0):
    """Factor ``Gamma = D/hbar + i C`` into vectors with ``sum l l^H = Gamma``.

    Raises :class:`FluctuationDissipationError` if ``Gamma`` is not PSD.
    """
    d = np.asarray(diffusion, dtype=float)
    c = np.asarray(dissipation, dtype=float)
    if np.abs(d - d.T).max() > 1e-12 * max(1.0, np.abs(d).max()):
        raise ValidationError("diffusion matrix must be symmetric")
    if np.abs(c + c.T).max() > 1e-12 * max(1.0, np.abs(c).max()):
        raise ValidationError("dissipation matrix must be antisymmetric")
    g = d / hbar + 1j * c
    lam, u = np.linalg.eigh(g)
    if lam[0] < -FD_TOL:
        raise FluctuationDissipationError(
            f"D - i hbar C is not positive semidefinite (min eigenvalue {hbar * lam[0]:.3e})"
        )
    keep = lam > 1e-14 * max(1.0, lam[-1])
    return (u[:, keep] * np.sqrt(lam[keep])).T


def model_from_matrices(n, b_matrix, xi, diffusion, dissipation, hbar=1.0):
    vecs = lindblad_vectors_from_matrices(diffusion, dissipation, hbar)
    return GdsModel(n, b_matrix, xi, vecs, hbar)


def quantum_diffusion_model(n=1, hbar=1.0, diffusion=0.5):
    """No dissipation and ``D = diffusion * I`` (real Lindblad vectors)."""
    vecs = np.sqrt(diffusion / hbar) * np.eye(2 * n)
    return GdsModel(n, np.zeros((2 * n, 2 * n)), np.zeros(2 * n), vecs, hbar)


def optical_master_equation_model(n=1, gamma=1.0, alpha=0.5, omega=0.0, hbar=1.0):
    """``D = gamma I`` and ``J C = alpha I`` with optional rotation ``B = omega I``."""
    j = symplectic_form(n)
    return model_from_matrices(
        n, omega * np.eye(2 * n), np.zeros(2 * n), gamma * np.eye(2 * n), -alpha * j, hbar
    )


class LangevinSet(NamedTuple):
    sigma: np.ndarray
    sigma_bar: np.ndarray


def langevin_forces(m):
    """Real Langevin vectors ``sqrt(hbar) Re l_k`` and ``sqrt(hbar) Im l_k`` (rows)."""
    root = np.sqrt(m.hbar)
    return LangevinSet(root * m.lindblad_vectors.real, root * m.lindblad_vectors.imag)


# -- states ------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaussianState:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.covariance, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] % 2:
            raise ValidationError(f"covariance must be 2n x 2n, got {v.shape}")
        if np.abs(v - v.T).max() > 1e-10 * max(1.0, np.abs(v).max()):
            raise ValidationError("covariance must be symmetric")
        v = 0.5 * (v + v.T)
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        if mean.shape != (v.shape[0],):
            raise ValidationError("mean length does not match covariance")
        n = v.shape[0] // 2
        lam = np.linalg.eigvalsh(v + 0.5j * symplectic_form(n))
        if lam[0] < -1e-10:
            raise PSDViolationError(lam[0], "V + (i/2) J")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", v)

    @property
    def n_modes(self):
        return self.covariance.shape[0] // 2


def vacuum_state(n=1):
    return GaussianState(np.zeros(2 * n), 0.5 * np.eye(2 * n))


def thermal_state(nu, n=1, mean=None):
    mean = np.zeros(2 * n) if mean is None else mean
    return GaussianState(mean, nu * np.eye(2 * n))


def symplectic_eigenvalues(s):
    """Symplectic spectrum of ``V``: the positive eigenvalues of ``i J V``, ascending."""
    v = s.covariance
    n = s.n_modes
    lam, u = np.linalg.eigh(v)
    if lam[0] <= 0:
        raise DegeneracyError("covariance is not positive definite")
    root = (u * np.sqrt(lam)) @ u.T
    # i V^1/2 J V^1/2 is Hermitian and similar to i J V
    herm = 1j * root @ symplectic_form(n) @ root
    ev = np.linalg.eigvalsh(0.5 * (herm + herm.conj().T))
    pos = ev[n:]
    neg = -ev[:n][::-1]
    if np.abs(pos - neg).max() > PAIRING_TOL * max(1.0, pos.max()):
        raise DegeneracyError("symplectic eigenvalues do not come in +/- pairs")
    return 0.5 * (pos + neg)


def _require_mixed(s):
    nu = symplectic_eigenvalues(s)
    if nu[0] <= 0.5 + PURE_CUTOFF:
        raise DivergenceError(
            f"state is (nearly) pure: smallest symplectic eigenvalue {nu[0]:.10f} <= 1/2 + {PURE_CUTOFF:g}"
        )
    return nu


def u_matrix(s):
    """``U = 2 i J arccoth(2 i V J)``, the quadratic form in ``ln sigma``.

    ``arccoth`` acts on the real eigenvalues ``+/-2 nu`` of ``2 i V J``.
    """
    _require_mixed(s)
    n = s.n_modes
    j = symplectic_form(n)
    mat = 2j * s.covariance @ j
    w, p = np.linalg.eig(mat)
    if np.abs(w.imag).max() > PAIRING_TOL * max(1.0, np.abs(w).max()):
        raise DegeneracyError("2iVJ has non-real eigenvalues")
    w = w.real
    srt = np.sort(np.abs(w))
    if np.abs(srt[0::2] - srt[1::2]).max() > PAIRING_TOL * max(1.0, srt[-1]):
        raise DegeneracyError("eigenvalues of 2iVJ are not paired as +/-2nu")
    f = 0.5 * np.log((w + 1) / (w - 1))
    arccoth = p @ np.diag(f) @ np.linalg.inv(p)
    u = 2j * j @ arccoth
    if np.abs(u.imag).max() > 1e-8 * max(1.0, np.abs(u.real).max()):
        raise DegeneracyError("U matrix has a non-negligible imaginary part")
    u = u.real
    return 0.5 * (u + u.T)


def u_matrix_series(s, terms=200):
    """Partial sum ``V^-1 + sum_{m=1}^{terms} (2iJ/(2m+1)) (i J V^-1 / 2)^(2m+1)``."""
    n = s.n_modes
    j = symplectic_form(n)
    vinv = np.linalg.inv(s.covariance)
    x = 0.5j * j @ vinv
    x2 = x @ x
    power = x
    total = vinv.astype(complex)
    for m in range(1, terms + 1):
        power = power @ x2
        total = total + (2j * j / (2 * m + 1)) @ power
    return total.real


def vn_entropy_gaussian(s):
    nu = symplectic_eigenvalues(s)
    total = 0.0
    for v in nu:
        lo = v - 0.5
        # pure modes (within rounding of the symplectic spectrum) contribute 0
        if lo <= PURE_MODE_TOL:
            continue
        total += (v + 0.5) * np.log(v + 0.5) - lo * np.log(lo)
    return float(total)


def shannon_entropy_wigner(s):
    """``1/2 ln det V + n ln(2 pi e)``, hbar-dependent constants omitted."""
    sign, logdet = np.linalg.slogdet(s.covariance)
    if sign <= 0:
        raise DegeneracyError("covariance is singular")
    return float(0.5 * logdet + s.n_modes * np.log(2 * np.pi * np.e))


# -- dynamics ------------------------------------------------------------------------


def covariance_derivative(m, v):
    a = m.drift
    return m.diffusion / m.hbar + a @ v + v @ a.T


def _check_compatible(m, s):
    if s.n_modes != m.n_modes:
        raise ValidationError(f"state has {s.n_modes} modes, model has {m.n_modes}")


def flow_moments(m, s, t, method="rk4"):
    """Moment flow for any real ``t`` (negative allowed)."""
    _check_compatible(m, s)
    args = (m.drift, m.diffusion / m.hbar, m.xi, s.mean, s.covariance, t)
    if method == "rk4":
        mean, cov = linalg.propagate_moments(*args)
    elif method == "expm":
        mean, cov = linalg.propagate_moments_exact(*args)
    else:
        raise ValidationError(f"unknown method {method!r}")
    return GaussianState(mean, cov)


def evolve_moments(m, s0, t, method="rk4"):
    """Evolve mean and covariance for time ``t >= 0``."""
    if t < 0:
        raise ValidationError("evolution time must be non-negative")
    return flow_moments(m, s0, t, method)


class DeBruijnRate(NamedTuple):
    rate: float
    delta: float
    psi: float


def quantum_debruijn_rate(m, s):
    """``dS/dt = 1/2 tr(D U)/hbar - tr(J C U V)`` for a Gaussian state."""
    _check_compatible(m, s)
    u = u_matrix(s)
    j = m.symplectic
    delta = 0.5 * np.trace(m.diffusion @ u) / m.hbar
    psi = np.trace(j @ m.dissipation @ u @ s.covariance)
    return DeBruijnRate(float(delta - psi), float(delta), float(psi))


def entropy_rate_from_covariance_flow(m, s):
    """``1/2 tr(U dV/dt)``, the same rate computed from the covariance ODE."""
    return float(0.5 * np.trace(u_matrix(s) @ covariance_derivative(m, s.covariance)))


def dqfi_matrix_gaussian(s, hbar=1.0):
    """DQFI matrix ``-Tr(sigma H[ln sigma]) = U / hbar``."""
    return u_matrix(s) / hbar


def m_matrix_gaussian(s):
    """``-Tr(sigma M[ln sigma]) = V U + (i/2) J U``.

    Contracting with ``C J`` gives the dissipative term:
    ``tr(C J M) = tr(J C U V) = Psi``.
    """
    u = u_matrix(s)
    j = symplectic_form(s.n_modes)
    return s.covariance @ u + 0.5j * j @ u


def stationary_covariance(m):
    """Stationary Gaussian state from the Lyapunov equation.

    Solves ``D/hbar + A V + V A^T = 0`` and sets the mean to ``A^-1 xi``.
    """
    a = m.drift
    try:
        v = linalg.solve_sylvester_lyapunov(a, m.diffusion / m.hbar)
    except StabilityError as exc:
        raise StabilityError(f"no stationary state: {exc}") from None
    mean = np.linalg.solve(a, m.xi)
    return GaussianState(mean, v)


def relaxation_time(m):
    """``1 / |Re lambda|`` for the slowest drift eigenvalue."""
    return float(1.0 / np.abs(np.max(np.linalg.eigvals(m.drift).real)))


def thermal_condition(m, tol=1e-10):
    """Whether ``D J C = C J D`` holds."""
    j = m.symplectic
    d, c = m.diffusion, m.dissipation
    lhs = d @ j @ c
    return bool(np.abs(lhs - c @ j @ d).max() <= tol * max(1.0, np.abs(lhs).max()))


def shannon_debruijn_rate(m, s):
    """``dh/dt = 1/2 tr(D V^-1)/hbar - tr(J C)`` for the Gaussian Wigner function."""
    _check_compatible(m, s)
    vinv = np.linalg.inv(s.covariance)
    return float(0.5 * np.trace(m.diffusion @ vinv) / m.hbar - np.trace(m.symplectic @ m.dissipation))


def wigner_fisher_matrix(s, hbar=1.0):
    return np.linalg.inv(s.covariance) / hbar


def translated_fisher(s, direction, hbar=1.0):
    """Fisher information of the Wigner function translated along ``direction``."""
    o = np.asarray(direction, dtype=float)
    return float(o @ wigner_fisher_matrix(s, hbar) @ o)


def entropy_rate_gap(m, s):
    """``1/2 tr(Theta dV/dt)`` with ``Theta = U - V^-1``."""
    _check_compatible(m, s)
    theta = u_matrix(s) - np.linalg.inv(s.covariance)
    return float(0.5 * np.trace(theta @ covariance_derivative(m, s.covariance)))
