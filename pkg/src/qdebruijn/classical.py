"""Classical Ornstein-Uhlenbeck channel ``dX = (A X - xi) dt + Sigma dW``.

Gaussian densities stay Gaussian under the Fokker-Planck flow, so every
quantity here is a closed form in the mean and covariance. The Monte
Carlo pieces exist only to validate those closed forms.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import linalg
from .errors import DegeneracyError, StepSizeError, ValidationError


@dataclass(frozen=True, eq=False)
class OuModel:
    """Linear drift ``A``, noise loadings ``Sigma`` (N x M) and offset ``xi``."""

    drift: np.ndarray
    noise: np.ndarray
    offset: np.ndarray = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.drift, dtype=float))
        if a.shape[0] != a.shape[1]:
            raise ValidationError(f"drift must be square, got {a.shape}")
        n = a.shape[0]
        s = np.asarray(self.noise, dtype=float)
        if s.ndim == 1:
            s = s.reshape(n, -1)
        if s.shape[0] != n:
            raise ValidationError(f"noise must have {n} rows, got {s.shape}")
        xi = np.zeros(n) if self.offset is None else np.asarray(self.offset, dtype=float).reshape(-1)
        if xi.shape != (n,):
            raise ValidationError(f"offset must have length {n}")
        object.__setattr__(self, "drift", a)
        object.__setattr__(self, "noise", s)
        object.__setattr__(self, "offset", xi)

    @property
    def dim(self):
        return self.drift.shape[0]

    @property
    def diffusion(self):
        return self.noise @ self.noise.T


@dataclass(frozen=True, eq=False)
class GaussianDensity:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if c.shape[0] != c.shape[1]:
            raise ValidationError("covariance must be square")
        if np.abs(c - c.T).max() > 1e-12 * max(1.0, np.abs(c).max()):
            raise ValidationError("covariance must be symmetric")
        c = 0.5 * (c + c.T)
        lam = np.linalg.eigvalsh(c)
        if lam[0] <= 1e-12 * max(1.0, lam[-1]):
            raise DegeneracyError(f"covariance is not positive definite (min eigenvalue {lam[0]:.3e})")
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        if mean.shape != (c.shape[0],):
            raise ValidationError("mean length does not match covariance")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", c)

    @property
    def dim(self):
        return self.covariance.shape[0]


def _check_dims(m, g):
    if m.dim != g.dim:
        raise ValidationError(f"model dimension {m.dim} differs from density dimension {g.dim}")


def flow_density(m, g, t, method="rk4"):
    """Gaussian solution of the Fokker-Planck flow for any real ``t``."""
    _check_dims(m, g)
    args = (m.drift, m.diffusion, m.offset, g.mean, g.covariance, t)
    if method == "rk4":
        mean, cov = linalg.propagate_moments(*args)
    elif method == "expm":
        mean, cov = linalg.propagate_moments_exact(*args)
    else:
        raise ValidationError(f"unknown method {method!r}")
    return GaussianDensity(mean, cov)


def evolve_density(m, g, t, method="rk4"):
    if t < 0:
        raise ValidationError("evolution time must be non-negative")
    return flow_density(m, g, t, method)


def stationary_density(m):
    cov = linalg.solve_sylvester_lyapunov(m.drift, m.diffusion)
    return GaussianDensity(np.linalg.solve(m.drift, m.offset), cov)


def fisher_matrix(g):
    return np.linalg.inv(g.covariance)


def shannon_entropy(g):
    """Differential entropy ``1/2 ln det Sigma + (N/2) ln(2 pi e)`` in nats."""
    _, logdet = np.linalg.slogdet(g.covariance)
    return float(0.5 * logdet + 0.5 * g.dim * np.log(2 * np.pi * np.e))


class DeBruijnTerms(NamedTuple):
    rate: float
    diffusion_term: float
    drift_term: float


def debruijn_rate(m, g):
    """``dh/dt = 1/2 tr(D J) + tr(A)`` with ``J`` the Fisher matrix."""
    _check_dims(m, g)
    diff = 0.5 * float(np.trace(m.diffusion @ fisher_matrix(g)))
    drift = float(np.trace(m.drift))
    return DeBruijnTerms(diff + drift, diff, drift)


def langevin_fisher_decomposition(m, g):
    """Fisher information along each noise column, ``Sigma_k^T J Sigma_k``."""
    _check_dims(m, g)
    f = fisher_matrix(g)
    return [float(col @ f @ col) for col in m.noise.T]


def drift_flux(m, g=None, n_samples=None):
    """Average divergence of the drift force, which is ``tr(A)`` for linear drift.

    The integrand is constant, so this is exact; ``g`` and ``n_samples``
    are accepted for interface symmetry with the Monte Carlo checks.
    """
    if n_samples is not None and n_samples < 10_000:
        raise ValidationError("n_samples must be >= 10000")
    return float(np.trace(m.drift))


class ScoreIdentity(NamedTuple):
    estimate: np.ndarray
    standard_error: np.ndarray


def score_identity_estimate(g, n_samples=100_000, seed=0):
    """Monte Carlo estimate of ``E[x score(x)^T]``, which equals ``-I``."""
    rng = np.random.default_rng(seed)
    x = rng.multivariate_normal(g.mean, g.covariance, size=n_samples, method="cholesky")
    score = -(x - g.mean) @ fisher_matrix(g)
    prod = x[:, :, None] * score[:, None, :]
    return ScoreIdentity(prod.mean(axis=0), prod.std(axis=0, ddof=1) / np.sqrt(n_samples))


def fisher_monte_carlo(g, n_samples=100_000, seed=0):
    """Sample covariance of the score, an estimate of the Fisher matrix."""
    rng = np.random.default_rng(seed)
    x = rng.multivariate_normal(g.mean, g.covariance, size=n_samples, method="cholesky")
    score = -(x - g.mean) @ fisher_matrix(g)
    prod = score[:, :, None] * score[:, None, :]
    return prod.mean(axis=0), prod.std(axis=0, ddof=1) / np.sqrt(n_samples)


def gaussian_sampler(g):
    """``x0_sampler`` drawing from a Gaussian density."""

    def sample(rng, n):
        return rng.multivariate_normal(g.mean, g.covariance, size=n, method="cholesky")

    return sample


def point_sampler(x0):
    x0 = np.asarray(x0, dtype=float)

    def sample(rng, n):
        return np.tile(x0, (n, 1))

    return sample


def simulate_sde(m, x0_sampler, t, step, n_paths, seed):
    """Euler-Maruyama paths of ``dX = (A X - xi) dt + Sigma dW``.

    Uses one PCG64 stream seeded with ``seed``: initial draws first, then
    one ``(n_paths, M)`` block of standard normals per step. Returns the
    ``(n_paths, N)`` sample at time ``t``.
    """
    if not step > 0:
        raise ValidationError("step must be positive")
    if n_paths < 1:
        raise ValidationError("n_paths must be >= 1")
    if t < 0:
        raise ValidationError("t must be non-negative")
    rng = np.random.Generator(np.random.PCG64(seed))
    x = np.array(x0_sampler(rng, n_paths), dtype=float).reshape(n_paths, m.dim)
    x0_cov = np.cov(x, rowvar=False).reshape(m.dim, m.dim) if n_paths > 1 else np.zeros((m.dim, m.dim))
    n_steps = int(np.ceil(t / step - 1e-12)) if t > 0 else 0
    h = t / n_steps if n_steps else 0.0
    a_t = m.drift.T
    s_t = m.noise.T
    root_h = np.sqrt(h)
    for _ in range(n_steps):
        dw = rng.standard_normal((n_paths, m.noise.shape[1]))
        x = x + h * (x @ a_t - m.offset) + root_h * (dw @ s_t)
    if n_paths > 1 and n_steps:
        _, analytic = linalg.propagate_moments_exact(m.drift, m.diffusion, m.offset, x.mean(axis=0), x0_cov, t)
        sample = np.cov(x, rowvar=False).reshape(m.dim, m.dim)
        bound = 10 * max(np.abs(analytic).max(), 1e-300)
        if not np.all(np.isfinite(sample)) or np.abs(sample).max() > bound + 1e-12:
            raise StepSizeError(f"Euler-Maruyama step {h:g} is unstable: sample covariance blew up")
    return x


class MomentCheck(NamedTuple):
    mean_z: np.ndarray
    cov_z: np.ndarray

    @property
    def max_z(self):
        return float(max(np.abs(self.mean_z).max(), np.abs(self.cov_z).max()))


def moment_zscores(samples, density):
    """Standardised deviations of sample mean and covariance from ``density``.

    Standard errors use the Gaussian fourth-moment formula
    ``Var(S_ij) = (C_ii C_jj + C_ij^2) / n``.
    """
    n = samples.shape[0]
    mu, c = density.mean, density.covariance
    mean_z = (samples.mean(axis=0) - mu) / np.sqrt(np.diag(c) / n)
    sample_cov = np.cov(samples, rowvar=False).reshape(c.shape)
    se = np.sqrt((np.outer(np.diag(c), np.diag(c)) + c**2) / n)
    return MomentCheck(mean_z, (sample_cov - c) / se)
