import numpy as np
import pytest

from edmc.geometry import FactoredGram


def centered_orthonormal(n, r, seed):
    """Random U with orthonormal columns and U^T 1 = 0."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, r))
    a -= a.mean(axis=0)
    q, _ = np.linalg.qr(a)
    return q[:, :r]


def random_centered_gram(n, r, seed, psd=True):
    """Random rank-r centered Gram matrix, dense."""
    rng = np.random.default_rng(seed)
    p = rng.standard_normal((n, r))
    p -= p.mean(axis=0)
    x = p @ p.T
    if not psd:
        u = centered_orthonormal(n, r, seed + 1)
        lam = rng.standard_normal(r) * 3.0
        x = (u * lam) @ u.T
    return x


def random_factored_gram(n, r, seed, psd=True):
    rng = np.random.default_rng(seed)
    u = centered_orthonormal(n, r, seed)
    lam = rng.uniform(0.5, 3.0, size=r)
    if not psd:
        lam *= rng.choice([-1.0, 1.0], size=r)
    order = np.argsort(-np.abs(lam), kind="stable")
    return FactoredGram(u[:, order], lam[order])


def random_centered_symmetric(n, seed):
    """Random element of the zero-row-sum symmetric matrices."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    a = a + a.T
    j = np.eye(n) - 1.0 / n
    return j @ a @ j


@pytest.fixture
def rng():
    return np.random.default_rng(0)
