"""Finite-dimensional Lindblad generators and the entropy-rate split.

The non-unitary generator is split as ``L_NU = L1 + L2 + L3`` with

* ``L1[O] = -(1/2hbar) sum_k ([A_k,[A_k,O]] + [B_k,[B_k,O]])``
* ``L2[O] = (1/4hbar) sum_k {[L_k, L_k^H], O}``
* ``L3[O] = (1/2hbar) sum_k (L_k O L_k^H - L_k^H O L_k)``

where ``L_k = A_k + i B_k`` is the Cartesian split of each Lindblad
operator. ``L1`` and ``L2`` are self-adjoint under the Hilbert-Schmidt
product and ``L3`` is anti-self-adjoint, which turns
``dS/dt = -Tr(rho Lbar[ln rho])`` into ``dS/dt = Delta - Psi`` with
``Delta = -Tr(rho L1[ln rho])`` and ``Psi = Tr(rho (L2 - L3)[ln rho])``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import linalg
from .errors import (
    DegeneracyError,
    NotStationaryError,
    SingularStateError,
    StepSizeError,
    ValidationError,
)

GENERATORS = ("u", "nu", "1", "2", "3", "total")
FULL_RANK_TOL = 1e-10
SUPEROP_MAX_DIM = 16


@dataclass(frozen=True)
class CartesianSplit:
    a_ops: tuple
    b_ops: tuple


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """Hamiltonian, Lindblad operators and hbar.

    ``lindblads`` may be empty, which gives purely unitary dynamics.
    """

    hamiltonian: np.ndarray
    lindblads: tuple = ()
    hbar: float = 1.0

    def __post_init__(self):
        h = linalg.check_hermitian(np.asarray(self.hamiltonian, dtype=complex))
        d = h.shape[0]
        ls = []
        for k, op in enumerate(self.lindblads):
            op = np.asarray(op, dtype=complex)
            if op.shape != (d, d):
                raise ValidationError(f"Lindblad operator {k} has shape {op.shape}, expected {(d, d)}")
            ls.append(op)
        if not self.hbar > 0:
            raise ValidationError("hbar must be positive")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "lindblads", tuple(ls))
        object.__setattr__(self, "hbar", float(self.hbar))

    @property
    def dim(self):
        return self.hamiltonian.shape[0]

    @property
    def n_lindblads(self):
        return len(self.lindblads)

    @cached_property
    def split(self):
        a = tuple(0.5 * (l + l.conj().T) for l in self.lindblads)
        b = tuple((l - l.conj().T) / 2j for l in self.lindblads)
        return CartesianSplit(a, b)

    @cached_property
    def _daggers(self):
        return tuple(l.conj().T for l in self.lindblads)

    @cached_property
    def _ldl(self):
        d = self.dim
        return sum((ld @ l for l, ld in zip(self.lindblads, self._daggers)), np.zeros((d, d), complex))

    @cached_property
    def _commutator_sum(self):
        d = self.dim
        return sum(
            (l @ ld - ld @ l for l, ld in zip(self.lindblads, self._daggers)),
            np.zeros((d, d), complex),
        )


def _check_op(m, o):
    o = np.asarray(o)
    if o.shape != (m.dim, m.dim):
        raise ValidationError(f"operator has shape {o.shape}, expected {(m.dim, m.dim)}")
    return o


def apply_lu(m, o):
    o = _check_op(m, o)
    return linalg.commutator(m.hamiltonian, o) / (1j * m.hbar)


def apply_lnu(m, o):
    o = _check_op(m, o)
    out = np.zeros(o.shape, complex)
    for l, ld in zip(m.lindblads, m._daggers):
        out += 2 * l @ o @ ld
    out -= m._ldl @ o + o @ m._ldl
    return out / (2 * m.hbar)


def apply_l1(m, o):
    o = _check_op(m, o)
    out = np.zeros(o.shape, complex)
    for a, b in zip(m.split.a_ops, m.split.b_ops):
        ca = a @ o - o @ a
        cb = b @ o - o @ b
        out += a @ ca - ca @ a + b @ cb - cb @ b
    return -out / (2 * m.hbar)


def apply_l2(m, o):
    o = _check_op(m, o)
    x = m._commutator_sum
    return (x @ o + o @ x) / (4 * m.hbar)


def apply_l3(m, o):
    o = _check_op(m, o)
    out = np.zeros(o.shape, complex)
    for l, ld in zip(m.lindblads, m._daggers):
        out += l @ o @ ld - ld @ o @ l
    return out / (2 * m.hbar)


def apply_generator(m, o):
    """Full generator ``L = L_U + L_NU``."""
    return apply_lu(m, o) + apply_lnu(m, o)


def apply(which, m, o):
    """Apply the generator named by ``which`` (one of ``GENERATORS``)."""
    try:
        fn = _FORWARD[which]
    except KeyError:
        raise ValidationError(f"unknown generator id {which!r}; expected one of {GENERATORS}") from None
    return fn(m, o)


def adjoint_apply(which, m, o):
    """Hilbert-Schmidt adjoint of a generator, written out explicitly.

    Satisfies ``<L[a], b> = <a, Lbar[b]>`` with ``<a, b> = Tr(b^H a)``.
    """
    o = _check_op(m, o)
    if which == "u":
        return 1j * linalg.commutator(m.hamiltonian, o) / m.hbar
    if which == "nu":
        out = np.zeros(o.shape, complex)
        for l, ld in zip(m.lindblads, m._daggers):
            out += 2 * ld @ o @ l
        out -= m._ldl @ o + o @ m._ldl
        return out / (2 * m.hbar)
    if which == "1":
        return apply_l1(m, o)
    if which == "2":
        return apply_l2(m, o)
    if which == "3":
        out = np.zeros(o.shape, complex)
        for l, ld in zip(m.lindblads, m._daggers):
            out += ld @ o @ l - l @ o @ ld
        return out / (2 * m.hbar)
    if which == "total":
        return adjoint_apply("u", m, o) + adjoint_apply("nu", m, o)
    raise ValidationError(f"unknown generator id {which!r}; expected one of {GENERATORS}")


_FORWARD = {
    "u": apply_lu,
    "nu": apply_lnu,
    "1": apply_l1,
    "2": apply_l2,
    "3": apply_l3,
    "total": apply_generator,
}


def gauge_transform(m, alphas):
    """Shift ``L_k -> L_k + alpha_k`` and compensate in the Hamiltonian.

    The compensating term is ``H' = (1/2i) sum_k (alpha_k^* L_k - alpha_k L_k^H)``,
    which leaves the total generator unchanged for any hbar.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=complex))
    if alphas.shape != (m.n_lindblads,):
        raise ValidationError(f"expected {m.n_lindblads} alphas, got {alphas.shape[0]}")
    eye = np.eye(m.dim)
    h_shift = np.zeros((m.dim, m.dim), complex)
    for alpha, l in zip(alphas, m.lindblads):
        h_shift += np.conj(alpha) * l - alpha * l.conj().T
    h_shift /= 2j
    h_new = m.hamiltonian + h_shift
    h_new = 0.5 * (h_new + h_new.conj().T)
    new_ls = tuple(l + alpha * eye for alpha, l in zip(alphas, m.lindblads))
    return LindbladModel(h_new, new_ls, m.hbar)


def gauge_hamiltonian_shift(m, alphas):
    """The ``H'`` added by :func:`gauge_transform`."""
    return gauge_transform(m, alphas).hamiltonian - m.hamiltonian


# -- superoperators and evolution --------------------------------------------


def superoperator(m, which="total"):
    """Column-stacked ``d^2 x d^2`` matrix of a generator."""
    d = m.dim
    eye = np.eye(d)
    h = m.hamiltonian
    s_u = (linalg.sandwich_superop(h, eye) - linalg.sandwich_superop(eye, h)) / (1j * m.hbar)
    if which == "u":
        return s_u
    s_nu = np.zeros((d * d, d * d), complex)
    for l, ld in zip(m.lindblads, m._daggers):
        s_nu += 2 * linalg.sandwich_superop(l, ld)
    s_nu -= linalg.sandwich_superop(m._ldl, eye) + linalg.sandwich_superop(eye, m._ldl)
    s_nu /= 2 * m.hbar
    if which == "nu":
        return s_nu
    if which == "total":
        return s_u + s_nu
    if which in ("1", "2", "3"):
        fn = _FORWARD[which]
        cols = [linalg.vec(fn(m, linalg.unvec(e, d))) for e in np.eye(d * d)]
        return np.array(cols).T
    raise ValidationError(f"unknown generator id {which!r}")


def generator_norm(m):
    """Spectral norm of the vectorised total generator."""
    return float(np.linalg.norm(superoperator(m), 2))


def propagator(m, t):
    """Superoperator ``exp(t L)``; ``t`` may be negative."""
    return linalg.matrix_exp(t * superoperator(m))


def _rk4(m, rho, t, step):
    n = max(1, int(np.ceil(abs(t) / step)))
    h = t / n
    f = lambda x: apply_generator(m, x)
    for _ in range(n):
        k1 = f(rho)
        k2 = f(rho + 0.5 * h * k1)
        k3 = f(rho + 0.5 * h * k2)
        k4 = f(rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        # RK4 conserves the trace exactly, so an unstable step shows up as
        # growth of the Frobenius norm past 1 (impossible for a density matrix)
        drift = max(abs(np.trace(rho) - 1.0), np.linalg.norm(rho) - 1.0)
        if not np.isfinite(drift) or drift > 1e-6:
            raise StepSizeError(f"RK4 step {abs(h):g} too large: state left the density-matrix set by {drift:.3e}")
    return rho


def _flow(m, rho, t, method=None, step=None):
    if t == 0:
        return np.array(rho, dtype=complex, copy=True)
    if method is None:
        method = "superop-exp" if m.dim <= SUPEROP_MAX_DIM else "rk4"
    if method == "superop-exp":
        out = linalg.unvec(propagator(m, t) @ linalg.vec(rho), m.dim)
    elif method == "rk4":
        if step is None:
            step = 0.05 / max(generator_norm(m), 1e-12)
        if step <= 0:
            raise ValidationError("RK4 step must be positive")
        out = _rk4(m, np.asarray(rho, dtype=complex), t, step)
    else:
        raise ValidationError(f"unknown evolution method {method!r}")
    return 0.5 * (out + out.conj().T)


def evolve(m, rho0, t, method=None, step=None):
    """Evolve ``rho0`` for time ``t >= 0`` under the master equation.

    ``method`` is ``"superop-exp"`` (default for dim <= 16) or ``"rk4"``.
    """
    if t < 0:
        raise ValidationError("evolution time must be non-negative")
    rho0 = linalg.check_density(rho0)
    return _flow(m, rho0, t, method, step)


# -- entropy rates --------------------------------------------------------------


def require_full_rank(rho, tol=FULL_RANK_TOL):
    lam = np.linalg.eigvalsh(rho)
    if lam[0] <= tol:
        raise SingularStateError(
            f"state is rank deficient (min eigenvalue {lam[0]:.3e}); mix with eps*I before "
            "computing entropy rates"
        )
    return lam


def fluctuation_dissipation_terms(m, rho, log_rho=None):
    """Return ``(Delta, Psi)`` for state ``rho``.

    ``log_rho`` may be supplied when the logarithm is known in closed form
    (for example lifted Gaussian states); otherwise ``rho`` must be full rank.
    """
    rho = np.asarray(rho, dtype=complex)
    if log_rho is None:
        require_full_rank(rho)
        log_rho = linalg.matrix_log_psd(rho)
    delta = -np.trace(rho @ apply_l1(m, log_rho)).real
    psi = np.trace(rho @ (apply_l2(m, log_rho) - apply_l3(m, log_rho))).real
    return float(delta), float(psi)


@dataclass(frozen=True)
class EntropyRateReport:
    t: float
    entropy: float
    delta: float
    psi: float
    rate_fd: float
    rate_tol: float
    spohn_pi: float = None
    flux_phi_dot: float = None

    @property
    def rate_analytic(self):
        return self.delta - self.psi

    @property
    def residual(self):
        return abs(self.rate_fd - self.rate_analytic)


def default_fd_step(m):
    return 1e-4 / max(generator_norm(m), 1e-12)


def entropy_rate_report(m, rho, fd_step=None, t=0.0, rho_stationary=None):
    """Delta, Psi and a central finite-difference check of ``dS/dt``."""
    rho = linalg.check_density(rho)
    require_full_rank(rho)
    if fd_step is None:
        fd_step = default_fd_step(m)
    if fd_step <= 0:
        raise ValidationError("fd_step must be positive")
    delta, psi = fluctuation_dissipation_terms(m, rho)
    prop_p = propagator(m, fd_step)
    prop_m = propagator(m, -fd_step)
    rho_p = linalg.unvec(prop_p @ linalg.vec(rho), m.dim)
    rho_m = linalg.unvec(prop_m @ linalg.vec(rho), m.dim)
    s_p = linalg.vn_entropy(0.5 * (rho_p + rho_p.conj().T))
    s_m = linalg.vn_entropy(0.5 * (rho_m + rho_m.conj().T))
    rate_fd = (s_p - s_m) / (2 * fd_step)
    scale = generator_norm(m) ** 3
    rate_tol = max(1e-6, 10 * fd_step**2 * scale)
    pi = phi = None
    if rho_stationary is not None:
        pi, phi = spohn_production(m, rho, rho_stationary, fd_step)
    return EntropyRateReport(
        t=float(t),
        entropy=linalg.vn_entropy(rho),
        delta=delta,
        psi=psi,
        rate_fd=float(rate_fd),
        rate_tol=rate_tol,
        spohn_pi=pi,
        flux_phi_dot=phi,
    )


def stationary_state(m, tol=1e-8):
    """Unique stationary state from the null space of the generator.

    Raises :class:`DegeneracyError` if the null space is not one-dimensional.
    """
    s = superoperator(m)
    _, sv, vh = np.linalg.svd(s)
    scale = max(sv[0], 1e-300)
    if sv[-1] > tol * scale:
        raise DegeneracyError(f"generator has no null vector (smallest singular value {sv[-1]:.3e})")
    if len(sv) > 1 and sv[-2] <= max(1e3 * sv[-1], tol * scale):
        raise DegeneracyError("stationary state is not unique (null space dimension > 1)")
    rho = linalg.unvec(vh[-1].conj(), m.dim)
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)


def spohn_production(m, rho, rho_stationary, fd_step=None, stationarity_tol=1e-8):
    """Spohn entropy production ``Pi`` and entropy flux ``Phi_dot``.

    ``Pi = -d/dt S(rho_t || rho_s)`` by central difference and
    ``Phi_dot = Pi - (Delta - Psi)``.
    """
    from .dqfi import relative_entropy

    rho = linalg.check_density(rho)
    rho_s = linalg.check_density(rho_stationary)
    require_full_rank(rho)
    require_full_rank(rho_s)
    residual = float(np.linalg.norm(apply_generator(m, rho_s)))
    if residual > stationarity_tol:
        raise NotStationaryError(residual)
    if fd_step is None:
        fd_step = default_fd_step(m)
    rho_p = _flow(m, rho, fd_step, "superop-exp")
    rho_m = _flow(m, rho, -fd_step, "superop-exp")
    pi = -(relative_entropy(rho_p, rho_s) - relative_entropy(rho_m, rho_s)) / (2 * fd_step)
    delta, psi = fluctuation_dissipation_terms(m, rho)
    return float(pi), float(pi - (delta - psi))
