"""Dense matrix kernel used by the partial-determinant machinery.

Matrices are plain :class:`numpy.ndarray` objects. Real data (tomography
tensors and everything flattened from them) stays ``float64``; operator
algebra (states, observables) is ``complex128``. Nothing here mutates its
inputs.
"""
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMatrix, IllConditioned, NonSquare

KAPPA_MAX = 1e8
RANK_TOL = 1e-10


@dataclass(frozen=True)
class RankReport:
    singular_values: np.ndarray
    numerical_rank: int
    tolerance_used: float


def as_matrix(M, dtype=float):
    M = np.asarray(M, dtype=dtype)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def _square(M, dtype=float):
    M = as_matrix(M, dtype)
    if M.shape[0] != M.shape[1]:
        raise NonSquare(f"matrix of shape {M.shape} is not square")
    return M


def condition_number(M):
    """2-norm condition number; ``inf`` for singular input, 1 for 0x0."""
    M = _square(M, np.result_type(np.asarray(M).dtype, float))
    if M.size == 0:
        return 1.0
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])


def invert(M, kappa_max=KAPPA_MAX):
    """Invert a square matrix through its SVD.

    Raises :class:`IllConditioned` when ``kappa(M) > kappa_max`` instead of
    returning an inverse that would amplify noise.
    """
    M = _square(M, np.result_type(np.asarray(M).dtype, float))
    n = M.shape[0]
    if n == 0:
        return M.copy()
    U, s, Vh = np.linalg.svd(M)
    kappa = float("inf") if s[-1] == 0.0 else float(s[0] / s[-1])
    if not kappa <= kappa_max:
        raise IllConditioned(kappa, kappa_max)
    return (Vh.conj().T / s) @ U.conj().T


def solve(M, rhs, kappa_max=KAPPA_MAX, what="matrix"):
    """``M^{-1} @ rhs`` with the same conditioning guard as :func:`invert`."""
    M = _square(M)
    if M.shape[0] == 0:
        return np.asarray(rhs, dtype=float).copy()
    kappa = condition_number(M)
    if not kappa <= kappa_max:
        raise IllConditioned(kappa, kappa_max, what=what)
    return np.linalg.solve(M, rhs)


def numerical_rank(M, tol=RANK_TOL):
    """Count singular values above ``tol * sigma_1``."""
    if not 0.0 < tol < 1.0:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    M = as_matrix(M, np.result_type(np.asarray(M).dtype, float))
    if M.size == 0:
        raise EmptyMatrix("numerical_rank of an empty matrix")
    s = np.linalg.svd(M, compute_uv=False)
    rank = int(np.count_nonzero(s > tol * s[0])) if s[0] > 0 else 0
    return RankReport(singular_values=s, numerical_rank=rank, tolerance_used=tol)


def determinant(M):
    M = _square(M, np.result_type(np.asarray(M).dtype, float))
    if M.size == 0:
        return 1.0
    return np.linalg.det(M).item()


def partition_bordered(S):
    """Split an (r+1)x(r+1) matrix into its border and interior pieces.

    Returns ``(a, beta, b, alpha, M, delta, c, gamma, d)`` for the layout::

        [ a      beta^T   b     ]
        [ alpha  M        delta ]
        [ c      gamma^T  d     ]
    """
    S = _square(S)
    if S.shape[0] < 2:
        raise ValueError("bordered partition needs at least a 2x2 matrix")
    return (S[0, 0], S[0, 1:-1], S[0, -1],
            S[1:-1, 0], S[1:-1, 1:-1], S[1:-1, -1],
            S[-1, 0], S[-1, 1:-1], S[-1, -1])


def schur_complements(S, kappa_max=KAPPA_MAX):
    """The four scalar Schur complements of the interior block ``M``.

    ``A/M = a - beta^T M^{-1} alpha``, ``B/M = b - beta^T M^{-1} delta``,
    ``C/M = c - gamma^T M^{-1} alpha``, ``D/M = d - gamma^T M^{-1} delta``.
    For a 2x2 input ``M`` is empty and the complements are the corners.
    """
    a, beta, b, alpha, M, delta, c, gamma, d = partition_bordered(S)
    if M.size:
        Minv_alpha = solve(M, alpha, kappa_max, what="interior block M")
        Minv_delta = solve(M, delta, kappa_max, what="interior block M")
    else:
        Minv_alpha = Minv_delta = np.zeros(0)
    return (float(a - beta @ Minv_alpha), float(b - beta @ Minv_delta),
            float(c - gamma @ Minv_alpha), float(d - gamma @ Minv_delta))


def split_blocks(M):
    """Return the four equal blocks ``(A, B, C, D)`` of a 2r x 2r matrix."""
    M = _square(M)
    r = M.shape[0] // 2
    return M[:r, :r], M[:r, r:], M[r:, :r], M[r:, r:]


def assemble_blocks(A, B, C, D):
    return np.block([[A, B], [C, D]])
