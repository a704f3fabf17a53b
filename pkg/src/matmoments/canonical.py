"""Canonical moments of matrix measures on [0, 1].

The map from interior moment points to symmetric canonical moments
``U_k = D_k^{-1/2} (S_k - S_k^-) D_k^{-1/2}`` with ``D_k = S_k^+ - S_k^-``,
its inverse through the G-array recursion, and an independent
reconstruction through the K-matrix recursion of the symmetrized measure.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    InvalidCanonical,
    NotInterior,
    SingularRange,
    WeightError,
)
from .linalg import (
    DEFAULT_TOL,
    Field,
    Tolerance,
    as_symherm,
    hermitize,
    loewner_interval_contains,
    sym_sqrt,
)
from .moments import MomentSequence, _canonical_levels, _with_zeroth

__all__ = [
    "CanonicalSequence",
    "ZetaSequence",
    "moments_to_canonical",
    "canonical_to_moments",
    "moments_to_canonical_batch",
    "canonical_to_moments_batch",
    "range_widths",
    "nonsymmetric_canonical",
    "moments_via_k_matrix_oracle",
    "block_jacobi_operator",
    "discrete_measure_moments",
    "discrete_measure_canonical",
    "canonical_from_zeta",
    "center_directional_derivatives",
    "numerical_jacobian_at_center",
]


def _ct(M: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(M, -1, -2))


@dataclass(frozen=True, eq=False)
class CanonicalSequence:
    """Symmetric canonical moments ``U_1..U_n``, each strictly inside ``(0, I)``."""

    field: Field
    U: np.ndarray

    def __post_init__(self):
        field = Field.coerce(self.field)
        U = np.asarray(self.U)
        if U.ndim != 3 or U.shape[0] < 1:
            raise ValueError(f"canonical stack must have shape (n, p, p), got {U.shape}")
        U = as_symherm(U, field)
        inside = loewner_interval_contains(U)
        if not np.all(inside):
            bad = int(np.argmin(inside)) + 1
            raise InvalidCanonical(f"U_{bad} is not strictly inside (0, I)")
        object.__setattr__(self, "field", field)
        object.__setattr__(self, "U", U)
        self.U.setflags(write=False)

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def p(self) -> int:
        return self.U.shape[1]

    @property
    def V(self) -> np.ndarray:
        return np.eye(self.p) - self.U

    @classmethod
    def center(cls, n: int, p: int, field: Field | str = Field.REAL) -> "CanonicalSequence":
        """All canonical moments equal to ``I/2`` (the arcsine measure)."""
        field = Field.coerce(field)
        return cls(field, np.broadcast_to(0.5 * np.eye(p, dtype=field.dtype), (n, p, p)).copy())


@dataclass(frozen=True)
class ZetaSequence:
    """``zeta[0] = Ubar_1``, ``zeta[j] = (I - Ubar_j) Ubar_{j+1}``, plus the intermediates."""

    zeta: np.ndarray
    Ubar: np.ndarray
    D: np.ndarray


def moments_to_canonical(S: MomentSequence, tol: Tolerance = DEFAULT_TOL) -> CanonicalSequence:
    """Symmetric canonical moments of an interior moment point.

    Raises
    ------
    SingularRange
        If some range width ``S_k^+ - S_k^-`` is singular at tolerance.
    NotInterior
        If some ``U_k`` falls on the boundary of ``(0, I)``.
    """
    ok, width_ok, U = _canonical_levels(S.S, tol)
    if not width_ok:
        raise SingularRange("a range width S_k^+ - S_k^- is not positive definite")
    if not ok:
        raise NotInterior("moment sequence is not in the interior of the moment space")
    return CanonicalSequence(S.field, U)


def range_widths(U: np.ndarray) -> np.ndarray:
    """``D_1 = I``, ``D_{m+1} = D_m^{1/2} U_m (I - U_m) D_m^{1/2}`` for a stack ``(..., n, p, p)``.

    ``D_m`` equals ``S_m^+ - S_m^-`` for the moments generated by ``U``.
    """
    U = np.asarray(U)
    n, p = U.shape[-3], U.shape[-1]
    eye = np.eye(p, dtype=U.dtype)
    D = np.empty_like(U)
    D[..., 0, :, :] = eye
    for m in range(1, n):
        root = sym_sqrt(D[..., m - 1, :, :])
        Um = U[..., m - 1, :, :]
        D[..., m, :, :] = hermitize(root @ (Um @ (eye - Um)) @ root)
    return D


def _zeta_array(U: np.ndarray) -> ZetaSequence:
    p = U.shape[-1]
    eye = np.eye(p, dtype=U.dtype)
    D = range_widths(U)
    Ubar = sym_sqrt(D, inverse=True) @ U @ sym_sqrt(D)
    zeta = Ubar.copy()
    zeta[..., 1:, :, :] = (eye - Ubar[..., :-1, :, :]) @ Ubar[..., 1:, :, :]
    return ZetaSequence(zeta, Ubar, D)


def nonsymmetric_canonical(U: CanonicalSequence | np.ndarray) -> ZetaSequence:
    """``Ubar_k = D_k^{-1/2} U_k D_k^{1/2}`` and the products ``zeta_k``."""
    arr = U.U if isinstance(U, CanonicalSequence) else np.asarray(U)
    return _zeta_array(arr)


def _unmap_array(U: np.ndarray) -> np.ndarray:
    zeta = _zeta_array(U).zeta
    n, p = U.shape[-3], U.shape[-1]
    lead = U.shape[:-3]
    eye = np.broadcast_to(np.eye(p, dtype=U.dtype), lead + (p, p))
    zero = np.zeros(lead + (p, p), dtype=U.dtype)
    # G[i] holds column j of the array, G_{i,j} for i = 0..j.
    prev = [eye]
    S = np.empty_like(U)
    for j in range(1, n + 1):
        col = [eye]
        for i in range(1, j + 1):
            left = prev[i] if i <= j - 1 else zero
            col.append(left + zeta[..., j - i, :, :] @ col[i - 1])
        S[..., j - 1, :, :] = hermitize(col[j])
        prev = col
    return S


def canonical_to_moments(U: CanonicalSequence) -> MomentSequence:
    """Ordinary moments from canonical moments: ``S_n = G_{n,n}`` with
    ``G_{i,j} = G_{i,j-1} + zeta_{j-i+1} G_{i-1,j}``, ``G_{0,j} = I``, ``G_{i,j} = 0`` for ``i > j``.
    """
    return MomentSequence(U.field, _unmap_array(U.U))


def moments_to_canonical_batch(
    S: np.ndarray, field: Field | str = Field.REAL, tol: Tolerance = DEFAULT_TOL
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`moments_to_canonical` over a stack ``(..., n, p, p)``.

    Returns ``(U, ok)``; ``ok`` flags interior rows.  Other rows of ``U`` hold
    the levels before the first failing one and zeros after it.
    """
    S = as_symherm(S, field)
    if S.ndim < 3:
        raise ValueError(f"moment stack must have shape (..., n, p, p), got {S.shape}")
    ok, _, U = _canonical_levels(S, tol)
    return U, np.asarray(ok)


def canonical_to_moments_batch(U: np.ndarray, field: Field | str = Field.REAL) -> np.ndarray:
    """Vectorized :func:`canonical_to_moments` over a stack ``(..., n, p, p)``."""
    U = as_symherm(U, field)
    if U.ndim < 3:
        raise ValueError(f"canonical stack must have shape (..., n, p, p), got {U.shape}")
    if not np.all(loewner_interval_contains(U)):
        raise InvalidCanonical("some U_k is not strictly inside (0, I)")
    return _unmap_array(U)


def moments_via_k_matrix_oracle(U: CanonicalSequence | np.ndarray, n: int | None = None) -> np.ndarray:
    """``S_n`` as the block ``K_{2n,0}`` of the inverse coefficient matrix of the
    symmetrized measure's orthogonal polynomials.

    Recursion ``K_{r,i} = K_{r-1,i-1} + K_{r-1,i+1} zeta_{i+1}^*`` with ``K_{i,i} = I``
    and ``K_{r,i} = 0`` for odd ``r + i``.  Structurally independent of the
    G-array; used to cross-check it.
    """
    arr = U.U if isinstance(U, CanonicalSequence) else np.asarray(U)
    n = arr.shape[-3] if n is None else n
    if not 1 <= n <= arr.shape[-3]:
        raise IndexError(f"need 1 <= n <= {arr.shape[-3]}")
    zeta_h = _ct(_zeta_array(arr[..., :n, :, :]).zeta)
    p = arr.shape[-1]
    lead = arr.shape[:-3]
    eye = np.broadcast_to(np.eye(p, dtype=arr.dtype), lead + (p, p))
    K = {(0, 0): eye}
    for r in range(1, 2 * n + 1):
        # only columns feeding K_{2n,0} are needed: c <= 2n - r
        for c in range(r % 2, min(r, 2 * n - r) + 1, 2):
            if c == r:
                K[r, c] = eye
                continue
            val = K[r - 1, c + 1] @ zeta_h[..., c, :, :]
            if c >= 1:
                val = val + K[r - 1, c - 1]
            K[r, c] = val
    return hermitize(K[2 * n, 0])


def block_jacobi_operator(zeta: ZetaSequence | np.ndarray, N: int) -> np.ndarray:
    """Truncated ``N p x N p`` block tridiagonal operator: zero diagonal blocks,
    identity super-diagonal, sub-diagonal ``zeta_r^*`` in block row ``r``.
    """
    Z = zeta.zeta if isinstance(zeta, ZetaSequence) else np.asarray(zeta)
    if N < 1 or N - 1 > Z.shape[0]:
        raise ValueError(f"N={N} needs at least N-1 zeta blocks, have {Z.shape[0]}")
    p = Z.shape[-1]
    J = np.zeros((N * p, N * p), dtype=Z.dtype)
    for r in range(N):
        if r + 1 < N:
            J[r * p : (r + 1) * p, (r + 1) * p : (r + 2) * p] = np.eye(p)
        if r >= 1:
            J[r * p : (r + 1) * p, (r - 1) * p : r * p] = _ct(Z[r - 1])
    return J


def discrete_measure_moments(
    points: Sequence[float], weights: Sequence[np.ndarray], k: int, field: Field | str | None = None
) -> MomentSequence:
    """Moments ``S_j = sum_i x_i^j W_i`` (j = 1..k) of a finitely supported matrix measure.

    Points may lie on any interval; weights must be PSD and sum to ``I_p``.
    """
    x, W, field = _validated_measure(points, weights, field)
    powers = x[None, :] ** np.arange(1, k + 1)[:, None]  # (k, atoms)
    return MomentSequence(field, np.einsum("ja,apq->jpq", powers, W))


def _validated_measure(points, weights, field):
    x = np.asarray(points, dtype=float)
    W = np.asarray(weights)
    if W.ndim == 1:
        W = W[:, None, None]
    if field is None:
        field = Field.COMPLEX if np.iscomplexobj(W) else Field.REAL
    field = Field.coerce(field)
    if x.ndim != 1 or len(x) != len(W):
        raise ValueError("need one weight per point")
    if len(np.unique(x)) != len(x):
        raise ValueError("points must be distinct")
    W = as_symherm(W, field)
    p = W.shape[-1]
    if np.max(np.abs(W.sum(axis=0) - np.eye(p))) > 1e-12:
        raise WeightError("weights do not sum to the identity")
    if np.min(np.linalg.eigvalsh(W)) < -1e-12:
        raise WeightError("weights must be positive semidefinite")
    return x, W, field


def canonical_from_zeta(zeta: np.ndarray) -> np.ndarray:
    """Inverse of :func:`nonsymmetric_canonical`: symmetric ``U_1..U_n`` from ``zeta_1..zeta_n``.

    Uses ``Ubar_j = (I - Ubar_{j-1})^{-1} zeta_j`` and ``U_j = D_j^{-1/2} (D_j Ubar_j) D_j^{-1/2}``,
    where ``D_j Ubar_j`` is Hermitian.
    """
    zeta = np.asarray(zeta)
    n, p = zeta.shape[0], zeta.shape[-1]
    eye = np.eye(p, dtype=zeta.dtype)
    U = np.empty_like(zeta)
    D = eye.copy()
    Ubar = None
    for j in range(n):
        Ubar = zeta[0] if j == 0 else np.linalg.solve(eye - Ubar, zeta[j])
        w, V = np.linalg.eigh(D)
        if w[0] <= 0:
            raise InvalidCanonical(f"range width D_{j + 1} is not positive definite")
        root, inv_root = (V * np.sqrt(w)) @ _ct(V), (V / np.sqrt(w)) @ _ct(V)
        U[j] = hermitize(inv_root @ hermitize(D @ Ubar) @ inv_root)
        D = hermitize(root @ U[j] @ (eye - U[j]) @ root)
    return U


def discrete_measure_canonical(
    points: Sequence[float], weights: Sequence[np.ndarray], n: int, field: Field | str | None = None
) -> CanonicalSequence:
    """Canonical moments ``U_1..U_n`` of a finitely supported matrix measure on [0, 1].

    Runs block Lanczos (with full reorthogonalization) on the symmetrized measure
    with atoms ``+-sqrt(x_i)`` and weights ``W_i / 2``.  The monic recurrence
    coefficients of that measure are the ``zeta_j``, so the moments are never
    formed.  This stays accurate where the Hankel route loses digits to
    conditioning (many atoms, large ``n``).

    Raises
    ------
    NotInterior
        If the measure does not determine ``n`` interior canonical moments.
    """
    x, W, field = _validated_measure(points, weights, field)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("points must lie in [0, 1]")
    if n < 1:
        raise ValueError("n must be positive")
    p = W.shape[-1]
    root = sym_sqrt(W / 2)
    Q = np.concatenate([root, root]).reshape(-1, p)
    nodes = np.repeat(np.concatenate([np.sqrt(x), -np.sqrt(x)]), p)[:, None]
    basis = [Q]
    B_prev = np.zeros((p, p), dtype=W.dtype)
    C = np.eye(p, dtype=W.dtype)
    zeta = np.empty((n, p, p), dtype=W.dtype)
    for j in range(n):
        R = nodes * basis[-1]
        if j:
            R = R - basis[-2] @ _ct(B_prev)
        for _ in range(2):
            for Qb in basis:
                R = R - Qb @ (_ct(Qb) @ R)
        Qn, B = np.linalg.qr(R)
        if np.min(np.abs(np.diag(B))) <= 1e-12:
            raise NotInterior(f"measure does not determine {n} interior canonical moments (breakdown at step {j + 1})")
        zeta[j] = np.linalg.solve(C, _ct(B) @ B @ C)
        C = B @ C
        B_prev = B
        basis.append(Qn)
    try:
        return CanonicalSequence(field, canonical_from_zeta(zeta))
    except InvalidCanonical as exc:
        raise NotInterior(str(exc)) from None


def _hermitian_basis(p: int, field: Field) -> list[np.ndarray]:
    basis = []
    for a in range(p):
        for b in range(a, p):
            E = np.zeros((p, p), dtype=field.dtype)
            E[a, b] = E[b, a] = 1.0
            basis.append(E)
            if field is Field.COMPLEX and a != b:
                F = np.zeros((p, p), dtype=complex)
                F[a, b], F[b, a] = 1j, -1j
                basis.append(F)
    return basis


def center_directional_derivatives(k: int, p: int, h: float = 1e-5, field: Field | str = Field.REAL):
    """Central differences of the inverse canonical map at ``U = (I/2, ..., I/2)``.

    Returns ``(basis, R)`` where ``R[j, m, i]`` is the derivative of ``S_{i+1}``
    along ``basis[m]`` placed in ``U_{j+1}``.
    """
    field = Field.coerce(field)
    if k < 1:
        raise ValueError("k must be positive")
    if not 1e-7 < h < 1e-3:
        raise ValueError("step h must lie in (1e-7, 1e-3)")
    basis = _hermitian_basis(p, field)
    U0 = CanonicalSequence.center(k, p, field).U
    R = np.empty((k, len(basis), k, p, p), dtype=field.dtype)
    for j in range(k):
        for m, E in enumerate(basis):
            plus, minus = U0.copy(), U0.copy()
            plus[j] += h * E
            minus[j] -= h * E
            R[j, m] = (_unmap_array(plus) - _unmap_array(minus)) / (2 * h)
    return basis, R


def numerical_jacobian_at_center(k: int, p: int, h: float = 1e-5, field: Field | str = Field.REAL) -> np.ndarray:
    """Block matrix ``L`` (kp x kp) with ``dS_i = sum_j L_ij dU_j`` at the centre.

    Each p x p block is fitted by least squares over all symmetric (Hermitian)
    coordinate directions; the expected value is ``A kron I_p``.
    """
    field = Field.coerce(field)
    basis, R = center_directional_derivatives(k, p, h, field)
    Ecat = np.concatenate(basis, axis=1)  # p x (p M)
    pinv = np.linalg.pinv(Ecat)
    L = np.zeros((k * p, k * p), dtype=field.dtype)
    for i in range(k):
        for j in range(k):
            Rcat = np.concatenate(list(R[j, :, i]), axis=1)
            L[i * p : (i + 1) * p, j * p : (j + 1) * p] = Rcat @ pinv
    return L.real if field is Field.REAL else L
