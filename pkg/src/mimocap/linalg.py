"""Dense complex linear algebra and special functions used across the package.

Everything here operates on small (dimension <~ 32) complex numpy arrays and
wraps LAPACK-backed numpy/scipy routines with the conventions the rest of the
package relies on: eigenvalues and singular values sorted descending, PSD
clamping of Monte Carlo round-off, upper-triangular Cholesky factors with real
non-negative diagonals.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.special

__all__ = [
    "as_complex_matrix",
    "as_hermitian",
    "herm_eig",
    "svd",
    "ut_gram",
    "chol_upper",
    "psd_sqrt",
    "psd_project",
    "expint_gamma0",
    "scaled_expint_gamma0",
    "log_det_plus",
    "haar_unitary",
]

# Eigenvalues of a nominally-PSD matrix in [-PSD_TOL * norm, 0) are treated as
# round-off and clamped to zero.
PSD_TOL = 1e-12
HERM_TOL = 1e-12


def as_complex_matrix(a) -> np.ndarray:
    """Coerce to a 2-D complex128 array, rejecting NaN/Inf entries."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise ValueError("matrix entries must be finite")
    return m


def as_hermitian(a, tol: float = HERM_TOL) -> np.ndarray:
    """Validate Hermitian symmetry to within ``tol`` and symmetrize exactly.

    Parameters
    ----------
    a : array_like
        Square matrix, expected Hermitian up to round-off.
    tol : float
        Maximum allowed relative deviation ``|A - A^H| / |A|``.

    Returns
    -------
    ndarray
        ``(A + A^H) / 2``, exactly Hermitian.
    """
    m = as_complex_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"Hermitian matrix must be square, got {m.shape}")
    scale = max(np.abs(m).max(), 1.0)
    if np.abs(m - m.conj().T).max() > tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    return 0.5 * (m + m.conj().T)


def herm_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns ``(U, lam)`` with ``A = U diag(lam) U^H``, columns of ``U``
    orthonormal and ``lam`` real, sorted largest first.
    """
    m = as_hermitian(a)
    lam, u = np.linalg.eigh(m)
    order = np.argsort(lam)[::-1]
    return u[:, order], lam[order]


def svd(h) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin singular value decomposition ``H = U diag(s) Vh``.

    Singular values are non-negative and sorted descending (LAPACK order).
    ``U`` has orthonormal columns, ``Vh`` orthonormal rows.
    """
    m = as_complex_matrix(h)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    return u, s, vh


def _check_upper_triangular(t) -> np.ndarray:
    m = as_complex_matrix(t)
    if m.shape[0] != m.shape[1]:
        raise ValueError("triangular factor must be square")
    if np.any(np.tril(m, -1) != 0):
        raise ValueError("entries below the diagonal must be exactly zero")
    d = np.diag(m)
    if np.any(d.imag != 0) or np.any(d.real < 0):
        raise ValueError("diagonal must be real and non-negative")
    return m


def ut_gram(t) -> np.ndarray:
    """Gram matrix ``T^H T`` of an upper-triangular factor.

    The result is Hermitian PSD with ``trace = sum_{i<=j} |T_ij|^2``.
    """
    m = _check_upper_triangular(t)
    g = m.conj().T @ m
    return 0.5 * (g + g.conj().T)


def chol_upper(a) -> np.ndarray:
    """Upper-triangular factor ``T`` with ``T^H T = A`` for PSD ``A``.

    Semidefinite input is handled by a column-pivot-free factorization that
    zeroes trailing entries of rank-deficient columns. Eigenvalues below
    ``-PSD_TOL * |A|`` raise a ``ValueError``.
    """
    m = as_hermitian(a)
    n = m.shape[0]
    scale = max(np.abs(m).max(), 1.0)
    if np.linalg.eigvalsh(m).min() < -PSD_TOL * scale * n:
        raise ValueError("matrix is not positive semidefinite within tolerance")
    t = np.zeros_like(m)
    # Outer-product form; tiny negative pivots from round-off are clamped.
    for j in range(n):
        s = m[j, j] - np.sum(np.abs(t[:j, j]) ** 2)
        pivot = np.sqrt(max(s.real, 0.0))
        t[j, j] = pivot
        if pivot > np.sqrt(PSD_TOL * scale):
            t[j, j + 1:] = (m[j, j + 1:] - t[:j, j].conj() @ t[:j, j + 1:]) / pivot
        else:
            t[j, j] = 0.0
    return t


def psd_sqrt(a) -> np.ndarray:
    """Hermitian square root of a PSD matrix, round-off eigenvalues clamped."""
    u, lam = herm_eig(a)
    lam = np.where(lam < 0, 0.0, lam)
    return (u * np.sqrt(lam)) @ u.conj().T


def psd_project(a) -> np.ndarray:
    """Clamp tiny negative eigenvalues of a nominally-PSD Hermitian matrix."""
    u, lam = herm_eig(a)
    scale = max(abs(lam[0]), 1.0) if lam.size else 1.0
    if lam.min() < -PSD_TOL * scale * a.shape[0]:
        raise ValueError("matrix is not positive semidefinite within tolerance")
    lam = np.where(lam < 0, 0.0, lam)
    return (u * lam) @ u.conj().T


def expint_gamma0(x):
    """Upper incomplete gamma ``Gamma(0, x) = int_x^inf exp(-t)/t dt``.

    Defined for ``x > 0`` only (the integral diverges at 0). Vectorized.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("Gamma(0, x) requires x > 0")
    return scipy.special.exp1(x)


# Asymptotic expansion x*e^x*E1(x) ~ sum (-1)^k k!/x^k; switch point keeps the
# truncation error below ~1e-13 while exp(x)*exp1(x) would hit subnormals.
_ASYMP_SWITCH = 600.0


def scaled_expint_gamma0(x):
    """Overflow-safe ``exp(x) * Gamma(0, x)``, valid for all x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("requires x > 0")
    out = np.empty_like(x)
    small = x < _ASYMP_SWITCH
    out[small] = np.exp(x[small]) * scipy.special.exp1(x[small])
    xl = x[~small]
    if xl.size:
        acc = np.zeros_like(xl)
        for k in (5, 4, 3, 2, 1):
            coeff = (-1.0) ** k * float(math.factorial(k))
            acc = (acc + coeff) / xl
        out[~small] = (1.0 + acc) / xl
    return out if out.ndim else float(out)


def log_det_plus(s, q) -> float:
    """Stable ``log det(I + S Q)`` for Hermitian PSD ``S`` and ``Q`` (nats).

    Computed from the eigenvalues of the symmetrized product
    ``Q^{1/2} S Q^{1/2}``, which are real non-negative, so the result is
    a sum of ``log1p`` terms and never negative.
    """
    s = as_hermitian(s)
    q = as_hermitian(q)
    if s.shape != q.shape:
        raise ValueError(f"dimension mismatch: {s.shape} vs {q.shape}")
    qh = psd_sqrt(q)
    core = qh @ s @ qh
    lam = np.linalg.eigvalsh(0.5 * (core + core.conj().T))
    lam = np.where(lam < 0, 0.0, lam)
    return float(np.sum(np.log1p(lam)))


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed n x n unitary via phase-fixed QR of a Ginibre matrix."""
    g = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.diag(r)
    return q * (d / np.abs(d))
