"""Companion matrices, characteristic polynomials and eigenvalues.

Matrices are plain ``numpy.ndarray`` objects; coefficient vectors
``p = (p_1, ..., p_m)`` describe the monic polynomial
``lambda^m + p_1 lambda^(m-1) + ... + p_m``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import matrix_balance

from .errors import ConvergenceError

PAIR_RTOL = 1e-9


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by real part (descending), then imaginary part."""

    eigenvalues: np.ndarray
    tolerance: float = PAIR_RTOL

    def __len__(self):
        return len(self.eigenvalues)

    def __iter__(self):
        return iter(self.eigenvalues)

    def __getitem__(self, i):
        return self.eigenvalues[i]

    @property
    def max_real(self) -> float:
        return float(np.max(self.eigenvalues.real))

    def is_hurwitz(self) -> bool:
        return self.max_real < 0


def _as_vector(p) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.ndim != 1 or p.size == 0:
        raise ValueError("coefficient vector must be one-dimensional and non-empty")
    if not np.all(np.isfinite(p)):
        raise ValueError("coefficients must be finite")
    return p


def _as_square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    return M


def shift_matrix(m: int) -> np.ndarray:
    """J_m = [0 e_1 ... e_{m-1}]: ones on the superdiagonal."""
    return np.eye(m, k=1)


def companion_from_coeffs(p) -> np.ndarray:
    """Return the companion matrix ``J_m - p e_1^T``."""
    p = _as_vector(p)
    C = shift_matrix(p.size)
    C[:, 0] = -p
    return C


def sort_eigenvalues(w) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    # lexsort uses the last key as primary
    order = np.lexsort((-w.imag, -w.real))
    return w[order]


def eigenvalues(M, vectors: bool = False):
    """All eigenvalues of a real square matrix, with multiplicity.

    With ``vectors=True`` returns ``(Spectrum, V)`` where the columns of
    ``V`` are unit eigenvectors ordered like the spectrum.
    """
    M = _as_square(M)
    try:
        if vectors:
            w, V = np.linalg.eig(M)
        else:
            w = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigenvalue iteration failed for {M.shape} matrix: {exc}") from exc
    w = np.asarray(w, dtype=complex)
    order = np.lexsort((-w.imag, -w.real))
    spec = Spectrum(w[order])
    if vectors:
        return spec, np.asarray(V, dtype=complex)[:, order]
    return spec


def _pair_conjugates(roots, rtol: float) -> None:
    roots = np.asarray(roots, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(roots)))) if roots.size else 1.0
    tol = rtol * scale
    unmatched = list(roots[np.abs(roots.imag) > tol])
    while unmatched:
        r = unmatched.pop()
        dist = [abs(u - np.conj(r)) for u in unmatched]
        if not dist or min(dist) > max(tol, 1e3 * np.finfo(float).eps * scale):
            raise ValueError(f"complex root {r} has no conjugate partner")
        unmatched.pop(int(np.argmin(dist)))


def poly_from_roots(roots, rtol: float = PAIR_RTOL) -> np.ndarray:
    """Real monic coefficients ``(p_1, ..., p_m)`` with the given roots."""
    roots = np.atleast_1d(np.asarray(roots, dtype=complex))
    if roots.size == 0:
        raise ValueError("need at least one root")
    _pair_conjugates(roots, rtol)
    c = np.poly(roots)
    scale = np.maximum(1.0, np.abs(c))
    if np.max(np.abs(c.imag) / scale) > 1e-8:
        raise ValueError("roots do not produce a real polynomial")
    return np.real(c[1:]).copy()


def charpoly_coeffs(M) -> np.ndarray:
    """Coefficients of ``det(lambda I - M)``.

    Computed from the eigenvalues of the balanced matrix rather than by a
    Faddeev-LeVerrier recursion, which loses accuracy quickly with m.
    """
    M = _as_square(M)
    m = M.shape[0]
    if m == 0:
        raise ValueError("empty matrix")
    B, _ = matrix_balance(M, permute=True, scale=True)
    w = eigenvalues(B).eigenvalues
    c = np.poly(w)
    return np.real(c[1:]).copy() if m else np.zeros(0)


def is_companion(M, tol: float = 0.0) -> bool:
    M = _as_square(M)
    rest = M[:, 1:] - shift_matrix(M.shape[0])[:, 1:]
    return bool(np.max(np.abs(rest), initial=0.0) <= tol)


def rcond(M) -> float:
    """Reciprocal 2-norm condition number (0 for singular matrices)."""
    s = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    return float(s[-1] / s[0]) if s[0] > 0 else 0.0


def match_eigenvalues(a, b):
    """Optimal one-to-one pairing of two equally sized eigenvalue sets.

    Returns ``(a_sorted, b_matched)`` minimising the total distance.
    """
    from scipy.optimize import linear_sum_assignment

    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError("eigenvalue sets differ in size")
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return a[rows], b[cols]
