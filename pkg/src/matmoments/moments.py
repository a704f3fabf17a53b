"""Geometry of the moment space M_n of p x p matrix measures on [0, 1].

Block Hankel matrices, interiority, the extremal moments S_k^- and S_k^+,
volumes, and the constants used to centre and scale random moment vectors
(arcsine moments, the lower-triangular matrix ``A``).

Array-level functions take moment stacks of shape ``(..., n, p, p)`` where
entry ``k`` holds ``S_{k+1}``; the zeroth moment ``S_0 = I_p`` is never stored
and is injected when Hankel matrices are assembled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotInterior, SingularHankel
from .linalg import (
    DEFAULT_TOL,
    Field,
    Tolerance,
    as_symherm,
    hermitize,
    is_positive_definite,
    loewner_interval_contains,
    log_multivariate_beta,
    sym_sqrt,
)

__all__ = [
    "MomentSequence",
    "ExtremalPair",
    "CltConstants",
    "hankel_matrices",
    "is_interior",
    "interior_mask",
    "extremal_moments",
    "log_volume",
    "arcsine_moments",
    "clt_matrix_A",
    "clt_constants",
    "clt_scale",
    "standardize_moment_vector",
]


@dataclass(frozen=True, eq=False)
class MomentSequence:
    """Moments ``S_1..S_n`` of a normalized matrix measure; ``S[k]`` is ``S_{k+1}``."""

    field: Field
    S: np.ndarray

    def __post_init__(self):
        field = Field.coerce(self.field)
        S = np.asarray(self.S)
        if S.ndim != 3 or S.shape[0] < 1:
            raise ValueError(f"moment stack must have shape (n, p, p), got {S.shape}")
        object.__setattr__(self, "field", field)
        object.__setattr__(self, "S", as_symherm(S, field))
        self.S.setflags(write=False)

    @property
    def n(self) -> int:
        return self.S.shape[0]

    @property
    def p(self) -> int:
        return self.S.shape[1]

    def truncate(self, k: int) -> "MomentSequence":
        if not 1 <= k <= self.n:
            raise IndexError(f"cannot truncate length-{self.n} sequence to {k}")
        return MomentSequence(self.field, self.S[:k])

    @classmethod
    def scalar(cls, values) -> "MomentSequence":
        """Convenience constructor for p = 1, real field."""
        return cls(Field.REAL, np.asarray(values, dtype=float).reshape(-1, 1, 1))


@dataclass(frozen=True)
class ExtremalPair:
    lower: np.ndarray
    upper: np.ndarray

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


def _with_zeroth(S: np.ndarray) -> np.ndarray:
    p = S.shape[-1]
    eye = np.broadcast_to(np.eye(p, dtype=S.dtype), S.shape[:-3] + (1, p, p))
    return np.concatenate([eye, S], axis=-3)


def _assemble(blocks: np.ndarray, size: int) -> np.ndarray:
    """Block Hankel matrix whose (r, c) block is ``blocks[..., r + c, :, :]``."""
    p = blocks.shape[-1]
    lead = blocks.shape[:-3]
    if size == 0:
        return np.zeros(lead + (0, 0), dtype=blocks.dtype)
    idx = np.add.outer(np.arange(size), np.arange(size))
    H = blocks[..., idx, :, :]  # (..., size, size, p, p)
    H = np.swapaxes(H, -3, -2)  # (..., size, p, size, p)
    return H.reshape(lead + (size * p, size * p))


def _hankel_pair(Sfull: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    j, odd = divmod(m, 2)
    if odd:
        lower = _assemble(Sfull[..., 1:, :, :], j + 1)
        upper = _assemble(Sfull[..., :-1, :, :] - Sfull[..., 1:, :, :], j + 1)
    else:
        lower = _assemble(Sfull, j + 1)
        diff = Sfull[..., 1:-1, :, :] - Sfull[..., 2:, :, :]
        upper = _assemble(diff, j)
    return lower, upper


def hankel_matrices(S: MomentSequence | np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper block Hankel matrices of order ``m`` (``0 <= m <= n``).

    Even ``m = 2j``: lower blocks ``S_{r+c}`` (order j+1), upper blocks
    ``S_{r+c+1} - S_{r+c+2}`` (order j).  Odd ``m = 2j+1``: lower blocks
    ``S_{r+c+1}``, upper blocks ``S_{r+c} - S_{r+c+1}`` (both order j+1).
    """
    arr = S.S if isinstance(S, MomentSequence) else np.asarray(S)
    n = arr.shape[-3]
    if not 0 <= m <= n:
        raise IndexError(f"Hankel order {m} needs 0 <= m <= n = {n}")
    return _hankel_pair(_with_zeroth(arr[..., :m, :, :]), m)


def interior_mask(S: np.ndarray, tol: Tolerance = DEFAULT_TOL):
    """Vectorized interiority test over a stack of moment sequences ``(..., n, p, p)``.

    Decided level by level on the block pivots of the two Hankel matrices (see
    :func:`_canonical_levels`), which is equivalent to positive definiteness of
    ``H_n`` lower and upper but grades the tolerance per level.
    """
    ok, _, _ = _canonical_levels(np.asarray(S), tol)
    return ok


def is_interior(S: MomentSequence, tol: Tolerance = DEFAULT_TOL) -> bool:
    """True iff both block Hankel matrices of order n are positive definite."""
    return bool(interior_mask(S.S, tol))


def _quad_form(H: np.ndarray, h: np.ndarray) -> np.ndarray:
    """``h^* H^{-1} h`` via a Cholesky factor of ``H``."""
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise SingularHankel("block Hankel matrix is not positive definite") from exc
    W = np.linalg.solve(L, h)
    return hermitize(np.conj(np.swapaxes(W, -1, -2)) @ W)


def _stack_blocks(blocks: np.ndarray) -> np.ndarray:
    """Block column vector from ``(..., s, p, p)``."""
    s, p = blocks.shape[-3], blocks.shape[-1]
    return blocks.reshape(blocks.shape[:-3] + (s * p, p))


def _extremal(Sfull: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Unchecked S_k^- and S_k^+ from ``Sfull`` holding S_0..S_{k-1} (or more)."""
    p = Sfull.shape[-1]
    lead = Sfull.shape[:-3]
    eye = np.broadcast_to(np.eye(p, dtype=Sfull.dtype), lead + (p, p))
    if k == 1:
        return np.zeros(lead + (p, p), dtype=Sfull.dtype), eye.copy()
    n = k - 1
    s = (n + 1) // 2
    h_low = _stack_blocks(Sfull[..., n - s + 1 : n + 1, :, :])
    H_low, _ = _hankel_pair(Sfull[..., :n, :, :], n - 1)
    lower = _quad_form(H_low, h_low)

    s = n // 2
    upper = Sfull[..., n, :, :].copy()
    if s:
        diff = Sfull[..., n - s : n, :, :] - Sfull[..., n - s + 1 : n + 1, :, :]
        _, H_up = _hankel_pair(Sfull[..., :n, :, :], n - 1)
        upper = hermitize(upper - _quad_form(H_up, _stack_blocks(diff)))
    return lower, upper


def _extremal_rows(sub: np.ndarray, k: int):
    """Batched ``_extremal`` that marks rows whose Hankel factorization fails."""
    try:
        lower, upper = _extremal(sub, k)
        return lower, upper, np.ones(sub.shape[0], dtype=bool)
    except SingularHankel:
        pass
    p = sub.shape[-1]
    lower = np.zeros((sub.shape[0], p, p), dtype=sub.dtype)
    upper = np.zeros_like(lower)
    good = np.zeros(sub.shape[0], dtype=bool)
    for i in range(sub.shape[0]):
        try:
            lower[i], upper[i] = _extremal(sub[i], k)
            good[i] = True
        except SingularHankel:
            pass
    return lower, upper, good


def _canonical_levels(S: np.ndarray, tol: Tolerance):
    """Scan ``k = 1..n`` computing ``U_k`` while the prefix stays interior.

    ``H_n`` lower and upper are positive definite iff at every level the range
    width ``D_k = S_k^+ - S_k^-`` is positive definite and
    ``U_k = D_k^{-1/2}(S_k - S_k^-)D_k^{-1/2}`` lies strictly inside ``(0, I)``
    (block LDL* of the Hankel matrices).  The width is tested with the relative
    floor only; ``U_k`` with the full tolerance.  A floor on the spectrum of the
    whole Hankel matrix would instead reject genuine interior points once its
    condition number passes ``1/rel`` (typical from ``n ~ 11``).

    Returns ``(ok, width_ok, U)`` where ``ok`` is a bool (or bool array over the
    leading axes), ``width_ok`` is false where a width was singular, and ``U``
    is filled only where ``ok``.
    """
    lead, n, p = S.shape[:-3], S.shape[-3], S.shape[-1]
    flat = _with_zeroth(S.reshape((-1, n, p, p)))
    rows = flat.shape[0]
    U = np.zeros((rows, n, p, p), dtype=S.dtype)
    alive = np.ones(rows, dtype=bool)
    width_ok = np.ones(rows, dtype=bool)
    width_tol = Tolerance(rel=tol.rel, abs=np.finfo(float).tiny)
    for k in range(1, n + 1):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        sub = flat[idx]
        lower, upper, good = _extremal_rows(sub, k)
        width = hermitize(upper - lower)
        good &= np.asarray(is_positive_definite(width, width_tol))
        width_ok[idx[~good]] = False
        if np.any(good):
            root = sym_sqrt(width[good], inverse=True, tol=width_tol)
            Uk = hermitize(root @ (sub[good, k] - lower[good]) @ root)
            inside = np.asarray(loewner_interval_contains(Uk, tol))
            U[idx[good][inside], k - 1] = Uk[inside]
            good[np.flatnonzero(good)[~inside]] = False
        alive[idx[~good]] = False
    ok = alive.reshape(lead)
    width_ok = width_ok.reshape(lead)
    U = U.reshape(lead + (n, p, p))
    if lead == ():
        return bool(ok), bool(width_ok), U
    return ok, width_ok, U


def extremal_moments(S: MomentSequence, k: int, tol: Tolerance = DEFAULT_TOL) -> ExtremalPair:
    """Loewner-extremal values S_k^- and S_k^+ given S_1..S_{k-1}.

    Only the first ``k - 1`` moments are read, so ``S`` may be longer (or
    exactly of length ``k - 1``).  Conventions: ``S_1^- = 0``, ``S_1^+ = I``,
    ``S_2^+ = S_1``.
    """
    if k < 1 or k - 1 > S.n:
        raise IndexError(f"extremal moments of order {k} need at least {k - 1} moments")
    if k > 1 and not is_interior(S.truncate(k - 1), tol):
        raise NotInterior(f"moments S_1..S_{k - 1} are not interior")
    lower, upper = _extremal(_with_zeroth(S.S[: k - 1]), k)
    return ExtremalPair(lower, upper)


def log_volume(n: int, p: int, field: Field | str = Field.REAL) -> float:
    """Log of the Lebesgue volume of M_n.

    Real field: ``sum_k log B_p(k(p+1)/2, k(p+1)/2)``.  Complex field: the
    normalization of the product of complex Beta laws of the canonical
    moments, ``sum_k log B_p^(2)(kp, kp)``.
    """
    field = Field.coerce(field)
    if n < 1 or p < 1:
        raise DomainError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
    total = 0.0
    for k in range(1, n + 1):
        a = 0.5 * k * (p + 1) if field is Field.REAL else float(k * p)
        total += log_multivariate_beta(p, a, a, field)
    return total


def arcsine_moments(k: int) -> np.ndarray:
    """``s_j = C(2j, j) / 4^j`` for ``j = 1..k``."""
    if k < 1:
        raise ValueError("k must be positive")
    return np.array([math.comb(2 * j, j) / 4.0**j for j in range(1, k + 1)])


def clt_matrix_A(k: int) -> np.ndarray:
    """Lower-triangular ``a_{ij} = 2^{-2i+2} C(2i, i-j)`` (1-based, ``j <= i``)."""
    if k < 1:
        raise ValueError("k must be positive")
    A = np.zeros((k, k))
    for i in range(1, k + 1):
        for j in range(1, i + 1):
            A[i - 1, j - 1] = math.comb(2 * i, i - j) / 4.0 ** (i - 1)
    return A


def clt_scale(n: int, p: int, field: Field | str = Field.REAL) -> float:
    field = Field.coerce(field)
    return math.sqrt(4 * n * (p + 1)) if field is Field.REAL else math.sqrt(8 * n * p)


@dataclass(frozen=True)
class CltConstants:
    k: int
    p: int
    field: Field
    A: np.ndarray
    arcsine: np.ndarray

    def scale(self, n: int) -> float:
        return clt_scale(n, self.p, self.field)


def clt_constants(k: int, p: int, field: Field | str = Field.REAL) -> CltConstants:
    return CltConstants(k, p, Field.coerce(field), clt_matrix_A(k), arcsine_moments(k))


def standardize_moment_vector(S, n: int, field: Field | str | None = None) -> np.ndarray:
    """``scale(n) * (A^{-1} kron I_p)(S_j - s_j^0 I_p)_{j<=k}`` by block forward substitution.

    ``S`` is a :class:`MomentSequence` (already truncated to ``k``) or an
    array ``(..., k, p, p)``; in the latter case ``field`` is required.
    """
    if isinstance(S, MomentSequence):
        field, arr = S.field, S.S
    else:
        if field is None:
            raise ValueError("field is required for raw arrays")
        field, arr = Field.coerce(field), np.asarray(S)
    k, p = arr.shape[-3], arr.shape[-1]
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    A = clt_matrix_A(k)
    centred = arr - arcsine_moments(k)[:, None, None] * np.eye(p)
    Z = np.empty_like(centred)
    for i in range(k):
        acc = centred[..., i, :, :].copy()
        for j in range(i):
            acc -= A[i, j] * Z[..., j, :, :]
        Z[..., i, :, :] = acc / A[i, i]
    return clt_scale(n, p, field) * Z
