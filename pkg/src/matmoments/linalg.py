"""Dense symmetric/Hermitian matrix primitives and multivariate special functions.

Matrices are plain numpy arrays: ``float64`` for the real field and
``complex128`` for the complex field.  Most helpers also accept stacks of
matrices with shape ``(..., p, p)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, InvalidMatrix, SingularMatrix

__all__ = [
    "Field",
    "Tolerance",
    "DEFAULT_TOL",
    "as_symherm",
    "hermitize",
    "eig_sym",
    "is_positive_definite",
    "loewner_interval_contains",
    "sym_sqrt",
    "log_multivariate_gamma",
    "log_multivariate_beta",
    "identity",
]


class Field(enum.Enum):
    """Scalar field of the matrix entries; ``beta_index`` is the Dyson index."""

    REAL = "real"
    COMPLEX = "complex"

    @property
    def beta_index(self) -> int:
        return 1 if self is Field.REAL else 2

    @property
    def dtype(self):
        return np.float64 if self is Field.REAL else np.complex128

    @classmethod
    def coerce(cls, value: "Field | str") -> "Field":
        if isinstance(value, Field):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown field {value!r}; expected 'real' or 'complex'") from None

    def coords_per_block(self, p: int) -> int:
        """Number of independent real coordinates of a p x p matrix of this field."""
        return p * (p + 1) // 2 if self is Field.REAL else p * p


@dataclass(frozen=True)
class Tolerance:
    """Eigenvalue floors for strict positivity: ``max(abs, rel * spectral_radius)``."""

    rel: float = 1e-10
    abs: float = 1e-12

    def __post_init__(self):
        if not (self.rel > 0 and self.abs > 0):
            raise ValueError("tolerances must be positive")

    def floor(self, radius):
        return np.maximum(self.abs, self.rel * radius)


DEFAULT_TOL = Tolerance()


def identity(p: int, field: Field = Field.REAL) -> np.ndarray:
    return np.eye(p, dtype=Field.coerce(field).dtype)


def hermitize(M: np.ndarray) -> np.ndarray:
    """Return ``(M + M^*) / 2``; removes round-off asymmetry."""
    return 0.5 * (M + np.conj(np.swapaxes(M, -1, -2)))


def as_symherm(M, field: Field | str = Field.REAL, *, atol: float = 1e-12) -> np.ndarray:
    """Checked constructor for a symmetric (real) or Hermitian (complex) matrix.

    The input must already be symmetric/Hermitian up to ``atol`` relative to its
    largest entry; the returned array is exactly so.
    """
    field = Field.coerce(field)
    A = np.asarray(M)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise InvalidMatrix(f"expected square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidMatrix("matrix has non-finite entries")
    if field is Field.REAL:
        if np.iscomplexobj(A):
            if np.any(A.imag != 0):
                raise InvalidMatrix("real field matrix has imaginary parts")
            A = A.real
        A = A.astype(np.float64)
    else:
        A = A.astype(np.complex128)
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    asym = np.max(np.abs(A - np.conj(np.swapaxes(A, -1, -2)))) if A.size else 0.0
    if asym > atol * scale:
        kind = "symmetric" if field is Field.REAL else "Hermitian"
        raise InvalidMatrix(f"matrix is not {kind} (deviation {asym:.3g})")
    return hermitize(A)


def _check_finite(M: np.ndarray) -> None:
    if not np.all(np.isfinite(M)):
        raise InvalidMatrix("matrix has non-finite entries")


def eig_sym(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors of a symmetric/Hermitian matrix."""
    M = np.asarray(M)
    _check_finite(M)
    return np.linalg.eigh(M)


def _spectrum_ok(eigs: np.ndarray, tol: Tolerance) -> np.ndarray:
    radius = np.max(np.abs(eigs), axis=-1)
    return eigs[..., 0] > tol.floor(radius)


def is_positive_definite(M: np.ndarray, tol: Tolerance = DEFAULT_TOL):
    """True iff the smallest eigenvalue exceeds ``max(tol.abs, tol.rel * spectral_radius)``.

    Works elementwise over a stack of matrices, returning a boolean array then.
    """
    M = np.asarray(M)
    _check_finite(M)
    if M.shape[-1] == 0:
        return True if M.ndim == 2 else np.ones(M.shape[:-2], dtype=bool)
    ok = _spectrum_ok(np.linalg.eigvalsh(M), tol)
    return bool(ok) if M.ndim == 2 else ok


def loewner_interval_contains(M: np.ndarray, tol: Tolerance = DEFAULT_TOL):
    """True iff ``0 < M < I`` in Loewner order."""
    M = np.asarray(M)
    I = np.eye(M.shape[-1], dtype=M.dtype)
    lo = is_positive_definite(M, tol)
    hi = is_positive_definite(I - M, tol)
    return np.logical_and(lo, hi) if np.ndim(lo) else bool(lo and hi)


def sym_sqrt(M: np.ndarray, inverse: bool = False, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Principal square root of a PSD matrix, or its inverse.

    Eigenvalues in ``(-floor, 0]`` are clamped to zero so round-off on
    boundary matrices does not raise.  With ``inverse=True`` every eigenvalue
    must exceed the floor, otherwise :class:`SingularMatrix` is raised.
    """
    M = np.asarray(M)
    w, V = eig_sym(M)
    radius = np.max(np.abs(w), axis=-1, keepdims=True) if w.shape[-1] else np.zeros(w.shape[:-1] + (1,))
    floor = tol.floor(radius)
    if inverse:
        if np.any(w <= floor):
            raise SingularMatrix("matrix is not strictly positive definite; no inverse square root")
        d = 1.0 / np.sqrt(w)
    else:
        if np.any(w < -floor):
            raise SingularMatrix("matrix has a negative eigenvalue; no real square root")
        d = np.sqrt(np.clip(w, 0.0, None))
    R = (V * d[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))
    return hermitize(R)


def log_multivariate_gamma(p: int, a: float, field: Field | str = Field.REAL) -> float:
    """Log of the multivariate Gamma function.

    Real field: ``pi^{p(p-1)/4} prod_{i=1}^p Gamma(a - (i-1)/2)`` for ``a > (p-1)/2``.
    Complex field: ``pi^{p(p-1)/2} prod_{i=1}^p Gamma(a - i + 1)`` for ``a > p-1``.
    """
    field = Field.coerce(field)
    if p < 1:
        raise DomainError(f"dimension must be positive, got {p}")
    if field is Field.REAL:
        if not a > 0.5 * (p - 1):
            raise DomainError(f"real multivariate Gamma needs a > (p-1)/2, got a={a}, p={p}")
        shifts = 0.5 * np.arange(p)
        const = 0.25 * p * (p - 1) * math.log(math.pi)
    else:
        if not a > p - 1:
            raise DomainError(f"complex multivariate Gamma needs a > p-1, got a={a}, p={p}")
        shifts = np.arange(p, dtype=float)
        const = 0.5 * p * (p - 1) * math.log(math.pi)
    return float(const + np.sum(gammaln(a - shifts)))


def log_multivariate_beta(p: int, a: float, b: float, field: Field | str = Field.REAL) -> float:
    """``log B_p(a, b) = log Gamma_p(a) + log Gamma_p(b) - log Gamma_p(a + b)``."""
    return (
        log_multivariate_gamma(p, a, field)
        + log_multivariate_gamma(p, b, field)
        - log_multivariate_gamma(p, a + b, field)
    )
