import numpy as np
import pytest

from aiqn import DomainError, sym_eig
from aiqn.linalg import psd_sqrt, trace_sqrt


def test_identity():
    vals, vecs = sym_eig(np.eye(3))
    np.testing.assert_allclose(vals, [1, 1, 1])
    np.testing.assert_allclose(vecs @ vecs.T, np.eye(3), atol=1e-12)


def test_diagonal():
    vals, vecs = sym_eig(np.diag([9.0, 4.0]))
    np.testing.assert_allclose(vals, [4, 9])
    # Axis-aligned eigenvectors.
    np.testing.assert_allclose(np.abs(vecs), np.eye(2)[:, ::-1], atol=1e-12)


def test_two_by_two():
    vals, _ = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(vals, [1, 3], atol=1e-12)


def test_reconstruction_random():
    rng = np.random.default_rng(5)
    for n in (2, 5, 16):
        a = rng.standard_normal((n, n))
        a = 0.5 * (a + a.T)
        vals, vecs = sym_eig(a)
        np.testing.assert_allclose((vecs * vals) @ vecs.T, a, atol=1e-8)
        np.testing.assert_allclose(vecs.T @ vecs, np.eye(n), atol=1e-10)


def test_psd_eigenvalues_nonnegative():
    rng = np.random.default_rng(6)
    for _ in range(5):
        b = rng.standard_normal((6, 6))
        vals, _ = sym_eig(b @ b.T)
        assert np.all(vals >= -1e-10)


def test_matches_numpy_eigh():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((12, 12))
    a = 0.5 * (a + a.T)
    vals, _ = sym_eig(a)
    np.testing.assert_allclose(vals, np.linalg.eigvalsh(a), atol=1e-9)


def test_psd_sqrt_squares_back():
    rng = np.random.default_rng(8)
    b = rng.standard_normal((5, 5))
    m = b @ b.T
    r = psd_sqrt(m)
    np.testing.assert_allclose(r @ r, m, atol=1e-8)
    assert trace_sqrt(m) == pytest.approx(np.trace(r), abs=1e-8)


def test_rejects_nonsymmetric():
    with pytest.raises(DomainError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(DomainError):
        sym_eig(np.zeros((2, 3)))
