"""Seeded random instances for property tests and sweeps."""

import numpy as np
import scipy.linalg

from . import classical, gaussian
from .lindblad import LindbladModel


def random_hermitian(dim, rng, scale=1.0):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (m + m.conj().T)


def random_density(dim, rng, min_eig=0.02):
    """Full-rank density matrix with eigenvalues bounded below by ``min_eig``."""
    w = rng.dirichlet(np.ones(dim))
    w = min_eig + (1 - dim * min_eig) * w
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    rho = (q * w) @ q.conj().T
    return 0.5 * (rho + rho.conj().T)


def random_lindblad_model(dim, rng, n_lindblads=2, hbar=1.0, scale=0.5):
    h = random_hermitian(dim, rng, scale)
    ls = tuple(
        scale * (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(dim)
        for _ in range(n_lindblads)
    )
    return LindbladModel(h, ls, hbar)


def random_gds_model(n, rng, n_lindblads=2, hbar=1.0, stable=True, damping=0.3):
    """Random GDS; with ``stable=True`` an amplitude-damping channel per mode is added."""
    b = rng.normal(size=(2 * n, 2 * n))
    b = 0.3 * b @ b.T
    vecs = 0.5 * (rng.normal(size=(n_lindblads, 2 * n)) + 1j * rng.normal(size=(n_lindblads, 2 * n)))
    xi = 0.1 * rng.normal(size=2 * n)
    for _ in range(50):
        rows = list(vecs)
        if stable:
            for k in range(n):
                rows.append(amplitude_damping_vector(n, k, damping, hbar))
        m = gaussian.GdsModel(n, b, xi, np.array(rows), hbar)
        if not stable or m.is_stable():
            return m
        damping *= 2
    raise RuntimeError("could not draw a stable model")


def amplitude_damping_vector(n, mode, kappa, hbar=1.0):
    """Vector ``l`` with ``l^T J x = sqrt(kappa) a_mode``."""
    v = np.zeros(2 * n, complex)
    c = np.sqrt(kappa / (2 * hbar))
    v[mode] = 1j * c
    v[mode + n] = -c
    return v


def random_symplectic(n, rng, scale=0.3):
    """``exp(J S)`` with ``S`` symmetric is symplectic."""
    s = rng.normal(size=(2 * n, 2 * n))
    s = scale * 0.5 * (s + s.T)
    return scipy.linalg.expm(gaussian.symplectic_form(n) @ s)


def random_gaussian_state(n, rng, nu_range=(0.6, 2.0), squeeze=0.3, mean_scale=0.3):
    """Valid mixed state ``V = S diag(nu, nu) S^T`` with ``S`` symplectic."""
    nu = rng.uniform(*nu_range, size=n)
    s = random_symplectic(n, rng, squeeze)
    v = s @ np.diag(np.concatenate([nu, nu])) @ s.T
    return gaussian.GaussianState(mean_scale * rng.normal(size=2 * n), 0.5 * (v + v.T))


def random_ou_model(dim, rng, n_noise=None, margin=0.2):
    """Stable OU model: drift eigenvalues shifted left of ``-margin``."""
    n_noise = dim if n_noise is None else n_noise
    a = rng.normal(size=(dim, dim))
    worst = np.max(np.linalg.eigvals(a).real)
    a = a - (worst + margin + rng.uniform(0, 0.5)) * np.eye(dim)
    noise = rng.normal(size=(dim, n_noise))
    return classical.OuModel(a, noise, 0.2 * rng.normal(size=dim))


def random_gaussian_density(dim, rng):
    m = rng.normal(size=(dim, dim))
    return classical.GaussianDensity(rng.normal(size=dim), m @ m.T + 0.5 * np.eye(dim))
