"""Partial determinants of block matrices.

For a 2r x 2r matrix ``[[A, B], [C, D]]`` with invertible ``r x r``
corners, ``Delta = A^{-1} B D^{-1} C`` equals the identity exactly when
the whole matrix has rank ``r``. The module also covers the eight loop
traversals of a square, gauge (block row/column mixing) transforms, and
the r x r PD of an (r+1)x(r+1) matrix built from Schur complements.
"""
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import IllConditioned, IllConditionedCorner, OddDimension, SingularTransform
from .linalg import KAPPA_MAX

DEFAULT_THRESHOLD = 1e-6


@dataclass(frozen=True)
class Square:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        shapes = {np.shape(X) for X in (self.A, self.B, self.C, self.D)}
        if len(shapes) != 1:
            raise ValueError(f"corners have different shapes: {sorted(shapes)}")
        (shape,) = shapes
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError(f"corners must be square, got {shape}")

    @property
    def r(self):
        return self.A.shape[0]

    def matrix(self):
        return linalg.assemble_blocks(self.A, self.B, self.C, self.D)


@dataclass(frozen=True)
class PDResult:
    delta: np.ndarray
    frobenius_score: float
    max_abs_score: float
    corner_conditions: dict

    @property
    def r(self):
        return self.delta.shape[0]


def assemble_square(M, provenance=None):
    """Read the four contiguous r x r blocks of a 2r x 2r matrix."""
    M = linalg.as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise linalg.NonSquare(f"matrix of shape {M.shape} is not square")
    if M.shape[0] % 2:
        raise OddDimension(f"a square needs even size, got {M.shape[0]}")
    return Square(*linalg.split_blocks(M), provenance=dict(provenance or {}))


def scores(delta):
    dev = np.asarray(delta) - np.eye(delta.shape[0])
    return float(np.linalg.norm(dev)), float(np.max(np.abs(dev))) if dev.size else 0.0


def corner_conditions(sq):
    return {name: linalg.condition_number(X) for name, X in zip("ABCD", (sq.A, sq.B, sq.C, sq.D))}


def _result(delta, conds):
    fro, mx = scores(delta)
    return PDResult(delta=delta, frobenius_score=fro, max_abs_score=mx, corner_conditions=conds)


def _guard(conds, names, kappa_max):
    for name in names:
        if not conds[name] <= kappa_max:
            raise IllConditionedCorner(name, conds[name], kappa_max)


def partial_determinant(sq, kappa_max=KAPPA_MAX):
    """``Delta = A^{-1} B D^{-1} C``; aborts if A or D is ill-conditioned."""
    conds = corner_conditions(sq)
    _guard(conds, "AD", kappa_max)
    delta = np.linalg.solve(sq.A, sq.B) @ np.linalg.solve(sq.D, sq.C)
    return _result(delta, conds)


def _rdiv(X, M):
    """``X @ M^{-1}`` without forming the inverse."""
    return np.linalg.solve(M.T, X.T).T


VARIANT_NAMES = (
    "A^-1 B D^-1 C", "B D^-1 C A^-1", "D^-1 C A^-1 B", "C A^-1 B D^-1",
    "C^-1 D B^-1 A", "D B^-1 A C^-1", "B^-1 A C^-1 D", "A C^-1 D B^-1",
)


def pd_variants(sq, kappa_max=KAPPA_MAX):
    """All eight loop traversals of the square, keyed by :data:`VARIANT_NAMES`.

    The first four are cyclic conjugates of ``A^-1 B D^-1 C``; the last four
    are the reversed loops (their inverses, up to conjugation).
    """
    conds = corner_conditions(sq)
    _guard(conds, "ABCD", kappa_max)
    A, B, C, D = sq.A, sq.B, sq.C, sq.D
    solve = np.linalg.solve
    # each loop is evaluated with solves against the corners it inverts
    mats = (
        solve(A, B) @ solve(D, C),
        _rdiv(B @ solve(D, C), A),
        solve(D, C) @ solve(A, B),
        _rdiv(C @ solve(A, B), D),
        solve(C, D) @ solve(B, A),
        _rdiv(D @ solve(B, A), C),
        solve(B, A) @ solve(C, D),
        _rdiv(A @ solve(C, D), B),
    )
    return {name: _result(M, conds) for name, M in zip(VARIANT_NAMES, mats)}


def variant_relation(sq, name):
    """``(X, e)`` with variant ``name`` equal to ``X Delta^e X^{-1}``, ``e`` in {1, -1}."""
    A, B, C, D = sq.A, sq.B, sq.C, sq.D
    eye = np.eye(sq.r)
    relations = {
        "A^-1 B D^-1 C": (eye, 1),
        "B D^-1 C A^-1": (A, 1),
        "D^-1 C A^-1 B": (np.linalg.solve(D, C), 1),
        "C A^-1 B D^-1": (C, 1),
        "C^-1 D B^-1 A": (eye, -1),
        "D B^-1 A C^-1": (C, -1),
        "B^-1 A C^-1 D": (np.linalg.solve(B, A), -1),
        "A C^-1 D B^-1": (A, -1),
    }
    return relations[name]


def gauge_transform(sq, left_blocks, right_blocks, kappa_max=KAPPA_MAX):
    """Mix rows within each block row and columns within each block column.

    ``A -> L1 A R1, B -> L1 B R2, C -> L2 C R1, D -> L2 D R2``. Left mixing
    and ``R2`` leave Delta unchanged; ``R1`` conjugates it:
    ``Delta -> R1^{-1} Delta R1``.
    """
    L1, L2 = (linalg.as_matrix(X) for X in left_blocks)
    R1, R2 = (linalg.as_matrix(X) for X in right_blocks)
    for name, X in zip(("L1", "L2", "R1", "R2"), (L1, L2, R1, R2)):
        if X.shape != (sq.r, sq.r):
            raise SingularTransform(f"{name} has shape {X.shape}, expected {(sq.r, sq.r)}")
        kappa = linalg.condition_number(X)
        if not kappa <= kappa_max:
            raise SingularTransform(f"{name} is singular or ill-conditioned (kappa={kappa:.3g})")
    return Square(L1 @ sq.A @ R1, L1 @ sq.B @ R2, L2 @ sq.C @ R1, L2 @ sq.D @ R2,
                  provenance=dict(sq.provenance, gauge_transformed=True))


def permutation_matrix(perm):
    """``P`` with ``P[i, perm[i]] = 1`` so that ``(P @ X)[i] = X[perm[i]]``."""
    perm = list(perm)
    P = np.zeros((len(perm), len(perm)))
    P[np.arange(len(perm)), perm] = 1.0
    return P


def block_permute(sq, state_perms, meas_perms):
    """Reorder settings inside each corner.

    ``state_perms = (pi_SP1, pi_SP2)`` permute the rows of the top and bottom
    block rows; ``meas_perms = (pi_M1, pi_M2)`` permute the columns of the
    left and right block columns. Delta becomes ``pi_M1^{-1} Delta pi_M1``.
    """
    SP1, SP2 = (permutation_matrix(p) for p in state_perms)
    M1, M2 = (permutation_matrix(p) for p in meas_perms)
    return gauge_transform(sq, (SP1, SP2), (M1, M2))


def triviality_test(pd, threshold=DEFAULT_THRESHOLD):
    """Decide whether Delta is the identity to within ``threshold`` (Frobenius)."""
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    trivial = pd.frobenius_score <= threshold
    report = {
        "trivial": bool(trivial),
        "threshold": float(threshold),
        "frobenius_score": pd.frobenius_score,
        "max_abs_score": pd.max_abs_score,
        "corner_conditions": dict(pd.corner_conditions),
    }
    return trivial, report


def default_threshold(r, shots=None):
    """1e-6 for noiseless data, ``10 r / sqrt(shots)`` for sampled data."""
    if shots is None or shots == float("inf"):
        return DEFAULT_THRESHOLD
    return 10.0 * r / np.sqrt(shots)


# ---------------------------------------------------------------------------
# r x r PD of an (r+1) x (r+1) matrix


@dataclass(frozen=True)
class ReducedPD:
    x: float
    schur: tuple          # (A/M, B/M, C/M, D/M)
    delta: np.ndarray     # A^-1 B D^-1 C of the expanded square
    square: Square
    translations: dict    # "alpha", "beta", "gamma", "delta" -> r x r
    closed_form_residual: float

    @property
    def r(self):
        return self.delta.shape[0]


def expand_bordered(S):
    """Build the 2r x 2r square that shares the interior block between all corners.

    With ``S = [[a, beta^T, b], [alpha, M, delta], [c, gamma^T, d]]``::

        A = [[a, beta^T], [alpha, M]]     B = [[beta^T, b], [M, delta]]
        C = [[alpha, M], [c, gamma^T]]    D = [[M, delta], [gamma^T, d]]
    """
    S = linalg.as_matrix(S)
    if S.shape[0] != S.shape[1] or S.shape[0] < 2:
        raise linalg.NonSquare(f"need an (r+1)x(r+1) matrix with r >= 1, got {S.shape}")
    r = S.shape[0] - 1
    return Square(S[:r, :r], S[:r, 1:], S[1:, :r], S[1:, 1:], provenance={"expanded_from": S.shape})


def translation_matrices(S, kappa_max=KAPPA_MAX):
    """The unipotent matrices that block-diagonalize the four expanded corners."""
    a, beta, b, alpha, M, delta, c, gamma, d = linalg.partition_bordered(S)
    r = S.shape[0] - 1
    if M.size:
        Minv = linalg.invert(M, kappa_max)
    else:
        Minv = np.zeros((0, 0))
    t_alpha, t_beta, t_gamma, t_delta = (np.eye(r) for _ in range(4))
    t_alpha[1:, 0] = -Minv @ alpha
    t_beta[0, 1:] = -beta @ Minv
    t_gamma[-1, :-1] = -gamma @ Minv
    t_delta[:-1, -1] = -Minv @ delta
    return {"alpha": t_alpha, "beta": t_beta, "gamma": t_gamma, "delta": t_delta}


def translation(v, kind="alpha"):
    """Translation matrix with displacement vector ``v`` (one of the four layouts)."""
    v = np.asarray(v, dtype=float)
    r = v.size + 1
    T = np.eye(r)
    if kind == "alpha":
        T[1:, 0] = v
    elif kind == "beta":
        T[0, 1:] = v
    elif kind == "gamma":
        T[-1, :-1] = v
    elif kind == "delta":
        T[:-1, -1] = v
    else:
        raise ValueError(f"unknown translation kind {kind!r}")
    return T


def reduced_closed_forms(x, translations):
    """Closed forms of the eight loop traversals of the expanded square.

    Each is a rank-one update of the identity, ``1 + (y - 1) U``, where ``U``
    is an idempotent built from one column or row of a translation matrix
    and ``y`` is ``x`` (forward loops) or ``1/x`` (reversed loops).
    """
    ta, tb, tg, td = (translations[k] for k in ("alpha", "beta", "gamma", "delta"))
    r = ta.shape[0]
    first, last = np.zeros((r, r)), np.zeros((r, r))
    first[0, 0] = 1.0
    last[-1, -1] = 1.0
    U = {
        "alpha": ta @ first,   # first column of alpha~
        "beta": first @ tb,    # first row of beta~
        "delta": td @ last,    # last column of delta~
        "gamma": last @ tg,    # last row of gamma~
    }
    eye = np.eye(r)
    fwd = lambda key: eye + (x - 1.0) * U[key]
    rev = lambda key: eye + (1.0 / x - 1.0) * U[key]
    return {
        "A^-1 B D^-1 C": fwd("alpha"),
        "B D^-1 C A^-1": fwd("beta"),
        "D^-1 C A^-1 B": fwd("delta"),
        "C A^-1 B D^-1": fwd("gamma"),
        "C^-1 D B^-1 A": rev("alpha"),
        "D B^-1 A C^-1": rev("gamma"),
        "B^-1 A C^-1 D": rev("delta"),
        "A C^-1 D B^-1": rev("beta"),
    }


def reduced_pd(S, kappa_max=KAPPA_MAX):
    """r x r PD of an (r+1) x (r+1) matrix; trivial iff ``x == 1`` iff ``det S == 0``."""
    S = linalg.as_matrix(S)
    schur = linalg.schur_complements(S, kappa_max)
    AM, BM, CM, DM = schur
    if AM == 0.0 or DM == 0.0:
        raise IllConditioned(float("inf"), kappa_max, what="Schur complement A/M or D/M")
    x = (BM * CM) / (AM * DM)
    sq = expand_bordered(S)
    delta = partial_determinant(sq, kappa_max).delta
    translations = translation_matrices(S, kappa_max)
    closed = reduced_closed_forms(x, translations)["A^-1 B D^-1 C"]
    residual = float(np.max(np.abs(delta - closed)))
    return ReducedPD(x=x, schur=schur, delta=delta, square=sq,
                     translations=translations, closed_form_residual=residual)


def select_bordered(S, shared_rows, shared_cols, displace_rows, displace_cols):
    """Pick an (r+1)x(r+1) test matrix out of a larger matrix.

    ``shared_*`` are the r-1 rows/columns common to every corner and
    ``displace_*`` the two that move between corners. The result is laid out
    with the first displacing row/column first and the second one last.
    """
    if len(displace_rows) != 2 or len(displace_cols) != 2:
        raise ValueError("need exactly two displacing rows and two displacing columns")
    if len(shared_rows) != len(shared_cols):
        raise ValueError("shared rows and columns must have equal length")
    rows = [displace_rows[0], *shared_rows, displace_rows[1]]
    cols = [displace_cols[0], *shared_cols, displace_cols[1]]
    if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
        raise ValueError("row/column selections must be distinct")
    S = linalg.as_matrix(S)
    return S[np.ix_(rows, cols)]


def reduced_pd_score(red):
    return scores(red.delta)
