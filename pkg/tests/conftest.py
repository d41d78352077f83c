import numpy as np
import pytest

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)
# basis order (excited, ground): sigma_- maps excited to ground
SM = np.array([[0, 0], [1, 0]], dtype=complex)
SP = SM.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
