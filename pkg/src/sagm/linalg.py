"""Dense complex matrix helpers: norms, eigen-extremes, traces, random sampling.

All matrices are square numpy arrays of dtype complex128.  Randomness always
comes from an explicit ``numpy.random.Generator``; nothing in here touches
global RNG state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-10
_EIG_FALLBACK_DIM = 32


@dataclass(frozen=True)
class SpectralResult:
    """Largest singular value plus convergence bookkeeping."""

    value: float
    iterations: int
    converged: bool


def as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def spectral_norm(m, rel_tol: float = 1e-12, max_iterations: int = 10_000) -> SpectralResult:
    """Largest singular value of ``m``.

    For dim <= 32 this is a full Hermitian eigendecomposition of M*M
    (deterministic, always converged); larger matrices use power iteration
    on M*M with relative tolerance ``rel_tol``.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    m = as_matrix(m)
    dim = m.shape[0]
    gram = m.conj().T @ m
    if dim <= _EIG_FALLBACK_DIM:
        top = max(float(np.linalg.eigvalsh(gram)[-1]), 0.0)
        return SpectralResult(value=np.sqrt(top), iterations=0, converged=True)

    # Deterministic start vector; the small ramp avoids accidental
    # orthogonality to the top eigenvector.
    x = np.ones(dim, dtype=complex) + np.linspace(0.0, 0.5, dim)
    x /= np.linalg.norm(x)
    lam = 0.0
    for it in range(1, max_iterations + 1):
        y = gram @ x
        norm_y = np.linalg.norm(y)
        if norm_y == 0.0:
            return SpectralResult(value=0.0, iterations=it, converged=True)
        lam_new = float(np.real(np.vdot(x, y)))
        x = y / norm_y
        if abs(lam_new - lam) <= rel_tol * max(abs(lam_new), 1e-300):
            return SpectralResult(value=np.sqrt(max(lam_new, 0.0)), iterations=it, converged=True)
        lam = lam_new
    return SpectralResult(value=np.sqrt(max(lam, 0.0)), iterations=max_iterations, converged=False)


def min_eig_hermitian(m) -> float:
    """Smallest eigenvalue of the Hermitian symmetrization (M + M*)/2.

    Raises if the input deviates from Hermitian by more than 1e-10 in any
    entry; the message names the residual.
    """
    m = as_matrix(m)
    residual = float(np.max(np.abs(m - m.conj().T)))
    if residual > HERMITIAN_TOL:
        raise ValueError(f"matrix is not Hermitian: asymmetry residual {residual:.3e}")
    herm = (m + m.conj().T) / 2.0
    return float(np.linalg.eigvalsh(herm)[0])


def normalized_trace(m) -> complex:
    """(1/dim) * trace."""
    m = as_matrix(m)
    return complex(np.trace(m)) / m.shape[0]


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary: QR of a complex Gaussian with the R diagonal
    phase folded back into Q."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def hermitian_with_moments(dim: int, t: float) -> np.ndarray:
    """Diagonal Hermitian with spectrum {+t, -t, +s, -s} in equal multiplicity,
    where s = sqrt(2 - t^2), so the normalized trace of a is 0 and of a^2 is 1
    exactly.  t = 1 is the degenerate a^2 = I case (caller's job to flag)."""
    if dim % 4 != 0:
        raise ValueError(f"dim must be divisible by 4, got {dim}")
    if not 0 < t <= np.sqrt(2.0):
        raise ValueError(f"t must satisfy 0 < t <= sqrt(2), got {t}")
    s = np.sqrt(max(2.0 - t * t, 0.0))
    q = dim // 4
    eigs = np.concatenate([np.full(q, t), np.full(q, -t), np.full(q, s), np.full(q, -s)])
    return np.diag(eigs).astype(complex)
