"""Symmetric eigendecomposition and the PSD roots built on it."""

from __future__ import annotations

import numpy as np

from .errors import AiqnError, DomainError

_SYM_TOL = 1e-9


def sym_eig(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps run until the off-diagonal Frobenius norm falls below 1e-12
    (relative to the matrix norm for badly scaled input).  Returns
    eigenvalues in ascending order and the matching eigenvector columns,
    with a deterministic sign convention.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"sym_eig needs a square matrix, got shape {m.shape}")
    if m.size and np.max(np.abs(m - m.T)) > _SYM_TOL:
        raise DomainError("sym_eig input is not symmetric within 1e-9")

    n = m.shape[0]
    a = 0.5 * (m + m.T)
    v = np.eye(n)
    threshold = 1e-12 * max(1.0, float(np.linalg.norm(a)))

    def off_norm(mat):
        off = mat - np.diag(np.diag(mat))
        return float(np.sqrt(np.sum(off * off)))

    for _ in range(100):
        if off_norm(a) <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e8:
                    t = 0.5 / theta  # asymptotic tan; theta**2 would overflow
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise AiqnError("Jacobi iteration did not converge in 100 sweeps")

    vals = np.diag(a).copy()
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = v[:, order]
    # Deterministic signs: largest-magnitude component of each vector >= 0.
    for j in range(n):
        k = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[k, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vals, vecs


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric square root with negative eigenvalues clamped to zero."""
    vals, vecs = sym_eig(m)
    root = np.sqrt(np.maximum(vals, 0.0))
    return (vecs * root) @ vecs.T


def trace_sqrt(m: np.ndarray) -> float:
    """Trace of the PSD square root (sum of clamped root-eigenvalues)."""
    vals, _ = sym_eig(m)
    return float(np.sum(np.sqrt(np.maximum(vals, 0.0))))
