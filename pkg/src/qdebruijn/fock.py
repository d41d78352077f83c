"""Truncated Fock-space representation of Gaussian semigroups.

Lifts a :class:`~qdebruijn.gaussian.GdsModel` to a finite
:class:`~qdebruijn.lindblad.LindbladModel` and a
:class:`~qdebruijn.gaussian.GaussianState` to a density matrix. The
Gaussian closed forms can then be checked against the generic
finite-dimensional machinery.

Truncating ladder operators breaks the canonical commutator on the top
Fock level, so operator identities are compared on the sub-block that
excludes the top two levels of every mode. States must carry negligible
weight there.
"""

from dataclasses import dataclass, field

import numpy as np

from . import gaussian, linalg
from .errors import CutoffError, IdentityCheckError, ValidationError
from .lindblad import (
    LindbladModel,
    apply_l1,
    apply_l2,
    apply_l3,
    apply_lu,
    fluctuation_dissipation_terms,
    superoperator,
)

EDGE = 2
DEFAULT_TAIL_TOL = 1e-8


@dataclass(frozen=True)
class FockTruncation:
    n_modes: int
    cutoff: int
    hbar: float = 1.0
    max_dim: int = 4096

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValidationError("n_modes must be >= 1")
        if self.cutoff < 2:
            raise ValidationError(f"cutoff must be >= 2, got {self.cutoff}")
        if not self.hbar > 0:
            raise ValidationError("hbar must be positive")
        if self.dim > self.max_dim:
            raise ValidationError(
                f"Fock dimension {self.cutoff}^{self.n_modes} = {self.dim} exceeds maximum {self.max_dim}"
            )

    @property
    def dim(self):
        return self.cutoff**self.n_modes

    def interior_mask(self):
        """Boolean mask of basis states whose every mode sits below ``cutoff - 2``."""
        levels = np.indices((self.cutoff,) * self.n_modes).reshape(self.n_modes, -1)
        return np.all(levels < self.cutoff - EDGE, axis=0)


def annihilation(cutoff):
    return np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), 1).astype(complex)


def _embed(op, mode, n_modes, cutoff):
    out = np.ones((1, 1), complex)
    eye = np.eye(cutoff, dtype=complex)
    for k in range(n_modes):
        out = np.kron(out, op if k == mode else eye)
    return out


def quadrature_operators(tr):
    """``(q_1..q_n, p_1..p_n)`` with ``q = sqrt(hbar/2)(a + a^H)``, ``p = i sqrt(hbar/2)(a^H - a)``."""
    a = annihilation(tr.cutoff)
    ad = a.conj().T
    c = np.sqrt(tr.hbar / 2)
    q = c * (a + ad)
    p = 1j * c * (ad - a)
    qs = [_embed(q, k, tr.n_modes, tr.cutoff) for k in range(tr.n_modes)]
    ps = [_embed(p, k, tr.n_modes, tr.cutoff) for k in range(tr.n_modes)]
    return qs + ps


def _symplectic_combination(tr, x):
    """Operators ``(J x)_i`` as a list."""
    j = gaussian.symplectic_form(tr.n_modes)
    return [sum(j[i, k] * x[k] for k in range(len(x)) if j[i, k] != 0) for i in range(len(x))]


def commutator_defect(tr):
    """Max deviation of ``[x_j, x_k] - i hbar J_jk`` on the interior sub-block."""
    x = quadrature_operators(tr)
    j = gaussian.symplectic_form(tr.n_modes)
    mask = tr.interior_mask()
    worst = 0.0
    for a in range(len(x)):
        for b in range(len(x)):
            c = x[a] @ x[b] - x[b] @ x[a] - 1j * tr.hbar * j[a, b] * np.eye(tr.dim)
            worst = max(worst, np.abs(c[np.ix_(mask, mask)]).max())
    return float(worst)


def _check_match(g, tr):
    if g.n_modes != tr.n_modes:
        raise ValidationError(f"model has {g.n_modes} modes, truncation has {tr.n_modes}")
    if not np.isclose(g.hbar, tr.hbar, rtol=1e-14, atol=0):
        raise ValidationError(f"model hbar {g.hbar} differs from truncation hbar {tr.hbar}")


def lift_model(g, tr):
    """``H = 1/2 x^T B x + x^T J xi`` and ``L_k = l_k^T J x`` on the truncated space."""
    _check_match(g, tr)
    x = quadrature_operators(tr)
    jx = _symplectic_combination(tr, x)
    dim = tr.dim
    h = np.zeros((dim, dim), complex)
    for a in range(len(x)):
        for b in range(len(x)):
            if g.b_matrix[a, b] != 0:
                h += 0.5 * g.b_matrix[a, b] * (x[a] @ x[b])
        if g.xi[a] != 0:
            h += x[a] * (gaussian.symplectic_form(tr.n_modes) @ g.xi)[a]
    h = 0.5 * (h + h.conj().T)
    ls = []
    for vec in g.lindblad_vectors:
        ls.append(sum(vec[i] * jx[i] for i in range(len(x))))
    return LindbladModel(h, tuple(ls), tr.hbar)


@dataclass(frozen=True, eq=False)
class LiftedState:
    """Truncated Gaussian density matrix with its closed-form logarithm.

    ``log_rho = -K - ln Z_trunc`` is exact for the truncated exponential,
    so no eigenvalue floor is involved even when the tail is tiny.
    """

    rho: np.ndarray
    log_rho: np.ndarray
    z_trunc: float
    z_exact: float
    tail_mass: float

    @property
    def z_mismatch(self):
        return abs(1.0 - self.z_trunc / self.z_exact)

    @property
    def eps_trunc(self):
        return max(self.z_mismatch, self.tail_mass)


def _tail_mass(rho, tr):
    """Largest per-mode probability of occupying one of the top two levels."""
    probs = np.real(np.diag(rho)).reshape((tr.cutoff,) * tr.n_modes)
    worst = 0.0
    for k in range(tr.n_modes):
        axes = tuple(i for i in range(tr.n_modes) if i != k)
        marginal = probs.sum(axis=axes) if axes else probs
        worst = max(worst, float(marginal[-EDGE:].sum()))
    return worst


def required_cutoff(s, tol=DEFAULT_TAIL_TOL, hbar=1.0):
    """Rough cutoff estimate from the thermal tail ratio and the displacement."""
    nu = gaussian.symplectic_eigenvalues(s)[-1]
    v = s.covariance
    n = s.n_modes
    occ = max(
        0.5 * (v[k, k] + v[k + n, k + n] - 1.0) + (s.mean[k] ** 2 + s.mean[k + n] ** 2) / (2 * hbar)
        for k in range(n)
    )
    # squeezing or displacement widens the distribution beyond the thermal ratio
    ratio = max((nu - 0.5) / (nu + 0.5), occ / (occ + 1.0), 1e-3)
    return int(np.ceil(np.log(tol) / np.log(ratio))) + EDGE + 1


def lift_state_report(s, tr, tail_tol=DEFAULT_TAIL_TOL):
    """Lift ``sigma = exp(-(x - mu)^T U (x - mu) / (2 hbar)) / Z`` to the Fock space.

    Pass ``tail_tol=None`` to skip the tail check (cutoff convergence studies).
    """
    if s.n_modes != tr.n_modes:
        raise ValidationError(f"state has {s.n_modes} modes, truncation has {tr.n_modes}")
    u = gaussian.u_matrix(s)
    # quadratic terms are formed one level up and projected back, so every
    # matrix element inside the cutoff is exact; truncating before
    # multiplying would halve the energy of the top level and inflate its weight
    up = FockTruncation(tr.n_modes, tr.cutoff + 1, tr.hbar, max(tr.max_dim, (tr.cutoff + 1) ** tr.n_modes))
    keep = np.all(np.indices((up.cutoff,) * up.n_modes).reshape(up.n_modes, -1) < tr.cutoff, axis=0)
    x = quadrature_operators(up)
    eye = np.eye(up.dim)
    shifted = [x[i] - s.mean[i] * eye for i in range(len(x))]
    k = np.zeros((up.dim, up.dim), complex)
    for a in range(len(x)):
        for b in range(len(x)):
            if u[a, b] != 0:
                k += u[a, b] * (shifted[a] @ shifted[b])
    k = k[np.ix_(keep, keep)]
    eye = np.eye(tr.dim)
    k = (k + k.conj().T) / (4 * tr.hbar)
    lam, vecs = linalg.herm_eig(k)
    shift = lam[0]
    weights = np.exp(-(lam - shift))
    z_trunc = float(np.exp(-shift) * weights.sum())
    rho = (vecs * (weights / weights.sum())) @ vecs.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    log_rho = -k - np.log(z_trunc) * eye
    j = gaussian.symplectic_form(tr.n_modes)
    z_exact = float(np.sqrt(np.linalg.det(s.covariance + 0.5j * j).real))
    tail = _tail_mass(rho, tr)
    if tail_tol is not None and tail > tail_tol:
        raise CutoffError(tail, required_cutoff(s, tail_tol, tr.hbar))
    return LiftedState(rho, log_rho, z_trunc, z_exact, tail)


def lift_state(s, tr, tail_tol=DEFAULT_TAIL_TOL):
    return lift_state_report(s, tr, tail_tol).rho


def moments(rho, tr):
    """Mean vector and dimensionless symmetrised covariance of a Fock state."""
    x = quadrature_operators(tr)
    mean = np.array([np.trace(rho @ op).real for op in x])
    n = len(x)
    v = np.zeros((n, n))
    for a in range(n):
        for b in range(a, n):
            sym = 0.5 * (x[a] @ x[b] + x[b] @ x[a])
            v[a, b] = v[b, a] = np.trace(rho @ sym).real - mean[a] * mean[b]
    return mean, v / tr.hbar


# -- superoperator matrices -------------------------------------------------------


def hat_h(o, tr):
    """``H[O]_ij = -(1/hbar^2) [(Jx)_i, [(Jx)_j, O]]`` as a nested list of matrices."""
    jx = _symplectic_combination(tr, quadrature_operators(tr))
    inner = [y @ o - o @ y for y in jx]
    n = len(jx)
    return [[-(jx[i] @ inner[j] - inner[j] @ jx[i]) / tr.hbar**2 for j in range(n)] for i in range(n)]


def hat_m(o, tr):
    """``M[O]_ij = (i/hbar) x_i [(Jx)_j, O]``."""
    x = quadrature_operators(tr)
    jx = _symplectic_combination(tr, x)
    inner = [y @ o - o @ y for y in jx]
    n = len(x)
    return [[(1j / tr.hbar) * (x[i] @ inner[j]) for j in range(n)] for i in range(n)]


def _contract(coeffs, ops):
    """``tr(Q X) = sum_ij Q_ij X_ji`` for an operator-valued matrix ``X``."""
    n = len(ops)
    return sum(coeffs[i, j] * ops[j][i] for i in range(n) for j in range(n) if coeffs[i, j] != 0)


def _expectation(rho, ops):
    n = len(ops)
    return np.array([[np.trace(rho @ ops[i][j]) for j in range(n)] for i in range(n)])


def dqfi_matrix_fock(rho, log_rho, tr):
    """``-Tr(rho H[ln rho])``."""
    return -_expectation(rho, hat_h(log_rho, tr)).real


def m_matrix_fock(rho, log_rho, tr):
    """``-Tr(rho M[ln rho])`` (complex)."""
    return -_expectation(rho, hat_m(log_rho, tr))


def linear_lme_rhs(g, tr, rho, lifted=None):
    """Four-term quadrature form of the generator.

    ``[H, rho]/(i hbar) + 1/2 tr(D H[rho]) + tr(C J) rho + tr(C J M[rho])``.
    """
    lifted = lift_model(g, tr) if lifted is None else lifted
    cj = g.dissipation @ g.symplectic
    return (
        apply_lu(lifted, rho)
        + 0.5 * _contract(g.diffusion, hat_h(rho, tr))
        + np.trace(cj) * rho
        + _contract(cj, hat_m(rho, tr))
    )


# -- cross validation ---------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self):
        return bool(self.error <= self.tolerance)


@dataclass
class CrossValidationReport:
    delta_fock: float
    psi_fock: float
    delta_gauss: float
    psi_gauss: float
    eps_trunc: float
    cutoff: int
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def discrepancy(self):
        return max(abs(self.delta_fock - self.delta_gauss), abs(self.psi_fock - self.psi_gauss))

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def raise_on_failure(self):
        bad = self.failures()
        if bad:
            lines = [f"{c.name}: error {c.error:.3e} > tolerance {c.tolerance:.3e}" for c in bad]
            raise IdentityCheckError("cross-validation failed:\n  " + "\n  ".join(lines))


def _interior_error(a, b, mask):
    return float(np.abs((a - b)[np.ix_(mask, mask)]).max())


def random_interior_observable(tr, rng):
    """Hermitian observable supported strictly inside the interior sub-block."""
    mask = tr.interior_mask()
    # shrink by two more levels so products with x stay inside the interior
    levels = np.indices((tr.cutoff,) * tr.n_modes).reshape(tr.n_modes, -1)
    inner = np.all(levels < tr.cutoff - 2 * EDGE, axis=0) & mask
    m = np.zeros((tr.dim, tr.dim), complex)
    k = int(inner.sum())
    block = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    m[np.ix_(inner, inner)] = block + block.conj().T
    return m


def cross_validate_rates(g, s, tr, tail_tol=DEFAULT_TAIL_TOL, rng=None, identity_checks=True):
    """Compare lifted ``(Delta, Psi)`` with the Gaussian closed forms.

    Also checks the DQFI matrix, the ``M`` matrix, the quadrature forms of
    ``L_1``, ``L_2``, ``L_3`` and the four-term generator on random interior
    observables. Identity checks run on the interior sub-block.
    """
    _check_match(g, tr)
    lifted_state = lift_state_report(s, tr, tail_tol)
    lifted = lift_model(g, tr)
    rho, log_rho = lifted_state.rho, lifted_state.log_rho
    delta_f, psi_f = fluctuation_dissipation_terms(lifted, rho, log_rho)
    rate = gaussian.quantum_debruijn_rate(g, s)
    tol = max(1e-5, lifted_state.eps_trunc)
    report = CrossValidationReport(
        float(delta_f), float(psi_f), rate.delta, rate.psi, lifted_state.eps_trunc, tr.cutoff
    )
    add = report.checks.append
    add(CheckResult("delta", abs(delta_f - rate.delta), tol))
    add(CheckResult("psi", abs(psi_f - rate.psi), tol))
    jq = dqfi_matrix_fock(rho, log_rho, tr)
    u = gaussian.dqfi_matrix_gaussian(s, g.hbar)
    add(CheckResult("dqfi_matrix", float(np.abs(jq - u).max()), tol * max(1.0, np.abs(u).max())))
    mm = m_matrix_fock(rho, log_rho, tr)
    mg = gaussian.m_matrix_gaussian(s)
    add(CheckResult("m_matrix", float(np.abs(mm - mg).max()), tol * max(1.0, np.abs(mg).max())))
    mean, cov = moments(rho, tr)
    add(CheckResult("moments", float(max(np.abs(mean - s.mean).max(), np.abs(cov - s.covariance).max())),
                    max(1e-7, 10 * lifted_state.tail_mass) * max(1.0, np.abs(s.covariance).max())))
    add(CheckResult("partition_function", lifted_state.z_mismatch, max(1e-7, 10 * lifted_state.tail_mass)))
    if identity_checks:
        rng = np.random.default_rng(0) if rng is None else rng
        o = random_interior_observable(tr, rng)
        mask = tr.interior_mask()
        cj = g.dissipation @ g.symplectic
        l1q = 0.5 * _contract(g.diffusion, hat_h(o, tr))
        l2q = 0.5 * np.trace(g.symplectic @ g.dissipation) * o
        l3q = _contract(cj, hat_m(o, tr)) + l2q
        big = max(1.0, np.abs(o).max())
        add(CheckResult("l1_quadrature_form", _interior_error(apply_l1(lifted, o), l1q, mask), 1e-9 * big))
        add(CheckResult("l2_quadrature_form", _interior_error(apply_l2(lifted, o), l2q, mask), 1e-9 * big))
        add(CheckResult("l3_quadrature_form", _interior_error(apply_l3(lifted, o), l3q, mask), 1e-9 * big))
        total = apply_lu(lifted, o) + apply_l1(lifted, o) + apply_l2(lifted, o) + apply_l3(lifted, o)
        add(CheckResult("linear_lme", _interior_error(total, linear_lme_rhs(g, tr, o, lifted), mask), 1e-9 * big))
    return report


def doubling_error(g, s, tr):
    """Truncation error of the lifted ``(Delta, Psi)`` estimated by doubling the cutoff.

    Returns ``max(|Delta_N - Delta_2N|, |Psi_N - Psi_2N|)``. The doubled
    truncation must still fit within ``tr.max_dim``.
    """
    _check_match(g, tr)
    fine = FockTruncation(tr.n_modes, 2 * tr.cutoff, tr.hbar, tr.max_dim)
    vals = []
    for t in (tr, fine):
        st = lift_state_report(s, t, tail_tol=None)
        vals.append(fluctuation_dissipation_terms(lift_model(g, t), st.rho, st.log_rho))
    (d0, p0), (d1, p1) = vals
    return float(max(abs(d0 - d1), abs(p0 - p1)))


@dataclass(frozen=True)
class RelaxationReport:
    """Trace distance to the lifted stationary Gaussian state along a time grid.

    This is a diagnostic: convergence of non-Gaussian inputs is reported,
    not asserted.
    """

    times: np.ndarray
    trace_distances: np.ndarray

    @property
    def monotone(self):
        return bool(np.all(np.diff(self.trace_distances) <= 1e-12))


def relaxation_report(g, rho0, tr, times):
    """Evolve any truncated state under the lifted model and track its distance
    to the lift of the stationary Gaussian state."""
    _check_match(g, tr)
    rho0 = linalg.check_density(rho0)
    if rho0.shape != (tr.dim, tr.dim):
        raise ValidationError(f"state dimension {rho0.shape[0]} does not match truncation dimension {tr.dim}")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValidationError("times must be non-negative and strictly increasing")
    target = lift_state(gaussian.stationary_covariance(g), tr)
    sup = superoperator(lift_model(g, tr))
    v = linalg.vec(rho0)
    prev = 0.0
    out = []
    steps = {}
    for t in times:
        if t > prev:
            dt = t - prev
            # uniform grids reuse one propagator
            key = round(dt, 12)
            if key not in steps:
                steps[key] = linalg.matrix_exp(dt * sup)
            v = steps[key] @ v
            prev = t
        rho = linalg.unvec(v, tr.dim)
        rho = 0.5 * (rho + rho.conj().T)
        out.append(0.5 * np.abs(np.linalg.eigvalsh(rho - target)).sum())
    return RelaxationReport(times, np.array(out))
