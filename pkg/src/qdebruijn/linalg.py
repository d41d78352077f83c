"""Dense linear-algebra primitives shared by the rest of the package.

Everything here works on plain ``numpy`` arrays. Matrices are small
(dimension at most a few hundred), so every routine is dense.
"""

import numpy as np
import scipy.linalg

from .errors import (
    DegeneracyError,
    NotHermitianError,
    PSDViolationError,
    StabilityError,
    StepSizeError,
    ValidationError,
)

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
LOG_FLOOR = 1e-14


def as_square(m, name="matrix"):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {m.shape}")
    return m


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")


def hermitian_deviation(m):
    """Return ``(max |m - m^H|, (i, j))`` for the worst entry pair."""
    m = as_square(m)
    dev = np.abs(m - m.conj().T)
    idx = np.unravel_index(np.argmax(dev), dev.shape)
    return float(dev[idx]), (int(idx[0]), int(idx[1]))


def check_hermitian(m, tol=HERMITIAN_TOL):
    m = as_square(m)
    dev, pair = hermitian_deviation(m)
    if dev > tol:
        raise NotHermitianError(pair, dev)
    return m


def check_density(rho, tol=PSD_TOL):
    """Validate a density matrix: Hermitian, PSD and unit trace."""
    rho = check_hermitian(np.asarray(rho, dtype=complex))
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValidationError(f"density matrix trace is {tr!r}, expected 1")
    lam = np.linalg.eigvalsh(rho)
    if lam[0] < -tol:
        raise PSDViolationError(lam[0], "density matrix")
    return rho


def herm_eig(m, tol=HERMITIAN_TOL):
    """Eigendecomposition of a Hermitian matrix.

    Returns ascending real eigenvalues and a unitary matrix of column
    eigenvectors, so that ``m = U @ diag(lam) @ U^H``.
    """
    m = check_hermitian(m, tol)
    # symmetrise so eigh sees exactly the Hermitian part
    lam, u = np.linalg.eigh(0.5 * (m + m.conj().T))
    return lam, u


def hermitian_function(m, func):
    lam, u = herm_eig(m)
    return (u * func(lam)) @ u.conj().T


def matrix_log_psd(m, floor=LOG_FLOOR):
    """Matrix logarithm of a PSD matrix with eigenvalues floored at ``floor``."""
    if floor <= 0:
        raise ValidationError("floor must be positive")
    lam, u = herm_eig(m)
    if lam[0] < -PSD_TOL:
        raise PSDViolationError(lam[0])
    return (u * np.log(np.maximum(lam, floor))) @ u.conj().T


def matrix_exp(m):
    """Matrix exponential.

    Hermitian input goes through the eigendecomposition; everything else
    uses scaling and squaring (``scipy.linalg.expm``).
    """
    m = as_square(m)
    dev, _ = hermitian_deviation(m)
    if dev <= HERMITIAN_TOL:
        return hermitian_function(m, np.exp)
    return scipy.linalg.expm(m)


def commutator(a, b):
    a, b = np.asarray(a), np.asarray(b)
    _check_same_shape(a, b)
    return a @ b - b @ a


def anticommutator(a, b):
    a, b = np.asarray(a), np.asarray(b)
    _check_same_shape(a, b)
    return a @ b + b @ a


def hs_inner(a, b):
    """Hilbert-Schmidt inner product ``Tr(b^H a)``."""
    a, b = np.asarray(a), np.asarray(b)
    _check_same_shape(a, b)
    return complex(np.vdot(b, a))


def vn_entropy(rho):
    """Von Neumann entropy in nats, with ``0 ln 0 = 0``."""
    lam, _ = herm_eig(rho)
    if lam[0] < -PSD_TOL:
        raise PSDViolationError(lam[0], "density matrix")
    lam = lam[lam > LOG_FLOOR]
    return float(-np.sum(lam * np.log(lam)))


# -- vectorisation ---------------------------------------------------------
# Column stacking: vec(A X B) = (B^T kron A) vec(X).


def vec(x):
    return np.asarray(x).reshape(-1, order="F")


def unvec(v, dim):
    return np.asarray(v).reshape((dim, dim), order="F")


def sandwich_superop(a, b):
    """Superoperator of ``X -> a X b``."""
    return np.kron(np.asarray(b).T, np.asarray(a))


# -- Lyapunov --------------------------------------------------------------


def check_stable(a, margin=1e-12):
    a = as_square(a, "drift")
    eig = np.linalg.eigvals(a)
    worst = float(np.max(eig.real))
    if worst >= -margin:
        raise StabilityError(f"matrix is not asymptotically stable (max Re eigenvalue {worst:.3e})")
    return eig


def solve_sylvester_lyapunov(a, q):
    """Solve ``a V + V a^T + q = 0`` for symmetric ``V``.

    Uses the Kronecker-vectorised system
    ``(I kron a + a kron I) vec(V) = -vec(q)``.
    """
    a = np.asarray(as_square(a), dtype=float)
    q = np.asarray(as_square(q, "q"), dtype=float)
    _check_same_shape(a, q)
    if np.abs(q - q.T).max() > HERMITIAN_TOL * max(1.0, np.abs(q).max()):
        raise ValidationError("q must be symmetric")
    check_stable(a)
    n = a.shape[0]
    eye = np.eye(n)
    k = np.kron(eye, a) + np.kron(a, eye)
    sv = np.linalg.svd(k, compute_uv=False)
    if sv[-1] <= 1e-14 * sv[0]:
        raise DegeneracyError("Kronecker Lyapunov system is singular")
    v = unvec(np.linalg.solve(k, -vec(q)), n)
    return 0.5 * (v + v.T)


# -- Gaussian moment propagation ---------------------------------------------


def moment_rhs(a, q, xi, mean, cov):
    return a @ mean - xi, a @ cov + cov @ a.T + q


def _rk4_moments(a, q, xi, mean, cov, t, n_steps):
    h = t / n_steps
    for _ in range(n_steps):
        k1m, k1c = moment_rhs(a, q, xi, mean, cov)
        k2m, k2c = moment_rhs(a, q, xi, mean + 0.5 * h * k1m, cov + 0.5 * h * k1c)
        k3m, k3c = moment_rhs(a, q, xi, mean + 0.5 * h * k2m, cov + 0.5 * h * k2c)
        k4m, k4c = moment_rhs(a, q, xi, mean + h * k3m, cov + h * k3c)
        mean = mean + (h / 6.0) * (k1m + 2 * k2m + 2 * k3m + k4m)
        cov = cov + (h / 6.0) * (k1c + 2 * k2c + 2 * k3c + k4c)
    return mean, 0.5 * (cov + cov.T)


def propagate_moments(a, q, xi, mean, cov, t, tol=1e-9, max_halvings=24):
    """Integrate ``dm/dt = a m - xi``, ``dC/dt = a C + C a^T + q`` over ``t``.

    RK4 with repeated step halving until two successive solutions agree
    within ``tol`` (scaled by the solution magnitude). ``t`` may be
    negative; callers that need a forward-only contract check it themselves.
    """
    a = np.asarray(a, dtype=float)
    q = np.asarray(q, dtype=float)
    xi = np.asarray(xi, dtype=float)
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if t == 0:
        return mean.copy(), cov.copy()
    rate = max(np.linalg.norm(a, 2), 1e-300)
    n = max(1, int(np.ceil(abs(t) * rate / 0.25)))
    prev = _rk4_moments(a, q, xi, mean, cov, t, n)
    for _ in range(max_halvings):
        n *= 2
        cur = _rk4_moments(a, q, xi, mean, cov, t, n)
        scale = max(1.0, np.abs(cur[1]).max(), np.abs(cur[0]).max(initial=0.0))
        err = max(np.abs(cur[0] - prev[0]).max(initial=0.0), np.abs(cur[1] - prev[1]).max())
        if err <= tol * scale:
            # one Richardson step on top of the converged pair
            m = cur[0] + (cur[0] - prev[0]) / 15.0
            c = cur[1] + (cur[1] - prev[1]) / 15.0
            return m, 0.5 * (c + c.T)
        prev = cur
    raise StepSizeError(f"moment integration did not reach tolerance {tol:g}")


def propagate_moments_exact(a, q, xi, mean, cov, t):
    """Closed-form moment propagation through an augmented exponential."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    # mean: d/dt [m; 1] = [[a, -xi], [0, 0]] [m; 1]
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = a
    aug[:n, n] = -np.asarray(xi, dtype=float)
    m = (scipy.linalg.expm(t * aug) @ np.append(mean, 1.0))[:n]
    eye = np.eye(n)
    k = np.kron(eye, a) + np.kron(a, eye)
    big = np.zeros((n * n + 1, n * n + 1))
    big[: n * n, : n * n] = k
    big[: n * n, n * n] = vec(q)
    c = unvec((scipy.linalg.expm(t * big) @ np.append(vec(cov), 1.0))[: n * n], n)
    return m, 0.5 * (c + c.T)
