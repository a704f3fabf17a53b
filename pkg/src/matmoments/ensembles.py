"""Seeded random matrix samplers and closed-form moment/density formulas.

All samplers draw from an explicit ``numpy.random.Generator`` (or an
:class:`RngState`, which is turned into one).  Batches are produced chunk by
chunk, each chunk on its own counter-based Philox sub-stream keyed by
``(seed, stream, purpose, chunk index)``, so results never depend on how many
worker threads assembled them.
"""
from __future__ import annotations

import math
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .canonical import _unmap_array
from .errors import DomainError
from .linalg import DEFAULT_TOL, Field, Tolerance, hermitize, is_positive_definite, loewner_interval_contains, sym_sqrt
from .moments import MomentSequence

__all__ = [
    "RngState",
    "BetaParams",
    "JacobiParams",
    "CHUNK_SIZE",
    "worker_count",
    "generator",
    "sample_batch",
    "sample_goe",
    "sample_gue",
    "sample_wishart",
    "sample_matrix_beta",
    "beta_moment_formulas",
    "jacobi_log_density",
    "jacobi_log_normalizer",
    "aomoto_moments",
    "aomoto_second_moment",
    "uniform_canonical_parameter",
    "sample_uniform_canonical",
    "sample_uniform_moment_space",
]

CHUNK_SIZE = 2048
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngState:
    """Root of a reproducible random stream: a 64-bit seed and a sub-stream id."""

    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64 and 0 <= self.stream <= _MASK64):
            raise ValueError("seed and stream must be unsigned 64-bit integers")


def _tag(purpose: str) -> int:
    return zlib.crc32(purpose.encode())


def generator(state: RngState, purpose: str = "", chunk: int = 0) -> np.random.Generator:
    """Philox generator for one ``(seed, stream, purpose, chunk)`` sub-stream."""
    ss = np.random.SeedSequence(state.seed, spawn_key=(state.stream, _tag(purpose), chunk))
    return np.random.Generator(np.random.Philox(ss))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngState):
        return generator(rng)
    raise TypeError(f"expected RngState or numpy Generator, got {type(rng).__name__}")


def worker_count() -> int:
    """Worker cap from ``MATMOMENTS_THREADS`` (default: all cores)."""
    raw = os.environ.get("MATMOMENTS_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"MATMOMENTS_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def sample_batch(
    draw: Callable[[np.random.Generator, int], np.ndarray],
    count: int,
    state: RngState,
    purpose: str,
    workers: int | None = None,
) -> np.ndarray:
    """Run ``draw(gen, size)`` over fixed-size chunks and concatenate in chunk order."""
    if count < 0:
        raise ValueError("count must be non-negative")
    sizes = [min(CHUNK_SIZE, count - start) for start in range(0, count, CHUNK_SIZE)]
    jobs = [(generator(state, purpose, c), size) for c, size in enumerate(sizes)]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        parts = [draw(g, s) for g, s in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: draw(*job), jobs))
    if not parts:
        return np.empty((0,))
    return np.concatenate(parts, axis=0)


# -- Gaussian ensembles -------------------------------------------------------


def sample_goe(p: int, rng, size: int | None = None) -> np.ndarray:
    """GOE draw(s) with density proportional to ``exp(-tr X^2 / 2)``.

    Diagonal entries are N(0, 1) and off-diagonal entries N(0, 1/2).
    """
    gen = _as_generator(rng)
    shape = (p, p) if size is None else (size, p, p)
    G = gen.standard_normal(shape)
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def sample_gue(p: int, rng, size: int | None = None) -> np.ndarray:
    """GUE draw(s): real N(0, 1) diagonal, off-diagonal real and imaginary parts N(0, 1/2)."""
    gen = _as_generator(rng)
    shape = (p, p) if size is None else (size, p, p)
    G = gen.standard_normal(shape) + 1j * gen.standard_normal(shape)
    return hermitize(G)


def sample_wishart(p: int, dof: float, field: Field | str, rng, size: int | None = None) -> np.ndarray:
    """Wishart draw(s) with identity scale via the Bartlett factor ``L L^*``.

    Real: ``L_ii^2 ~ chi^2_{dof - i}``, standard normal below the diagonal,
    mean ``dof * I``.  Complex: ``L_ii^2 ~ Gamma(dof - i)``, complex normal
    below the diagonal with ``E|z|^2 = 1``; also mean ``dof * I``.
    Fractional ``dof`` is allowed.
    """
    field = Field.coerce(field)
    if not dof > p - 1:
        raise DomainError(f"Wishart needs dof > p - 1, got dof={dof}, p={p}")
    gen = _as_generator(rng)
    lead = () if size is None else (size,)
    shapes = dof - np.arange(p)
    tril = np.tril_indices(p, -1)
    if field is Field.REAL:
        L = np.zeros(lead + (p, p))
        diag = np.sqrt(2.0 * gen.standard_gamma(shapes / 2.0, size=lead + (p,)))
        L[..., tril[0], tril[1]] = gen.standard_normal(lead + (len(tril[0]),))
    else:
        L = np.zeros(lead + (p, p), dtype=complex)
        diag = np.sqrt(gen.standard_gamma(shapes, size=lead + (p,)))
        m = len(tril[0])
        L[..., tril[0], tril[1]] = math.sqrt(0.5) * (
            gen.standard_normal(lead + (m,)) + 1j * gen.standard_normal(lead + (m,))
        )
    idx = np.arange(p)
    L[..., idx, idx] = diag
    return hermitize(L @ np.conj(np.swapaxes(L, -1, -2)))


# -- matrix Beta ---------------------------------------------------------------


@dataclass(frozen=True)
class BetaParams:
    """Matrix Beta law on ``(0, I)`` with density ``det X^{a-c} det(I-X)^{b-c}``,
    ``c = (p+1)/2`` (real) or ``c = p`` (complex).
    """

    field: Field
    p: int
    a: float
    b: float

    def __post_init__(self):
        field = Field.coerce(self.field)
        object.__setattr__(self, "field", field)
        if self.p < 1:
            raise DomainError("p must be positive")
        bound = 0.5 * (self.p - 1) if field is Field.REAL else self.p - 1
        if not (self.a > bound and self.b > bound):
            raise DomainError(f"{field.value} matrix Beta needs a, b > {bound}, got a={self.a}, b={self.b}")

    def wishart_dof(self) -> tuple[float, float]:
        if self.field is Field.REAL:
            return 2.0 * self.a, 2.0 * self.b
        return float(self.a), float(self.b)


def _beta_draw(params: BetaParams, gen: np.random.Generator, size: int, tol: Tolerance):
    da, db = params.wishart_dof()
    out = np.empty((size, params.p, params.p), dtype=params.field.dtype)
    todo = np.arange(size)
    rejected = 0
    while todo.size:
        A = sample_wishart(params.p, da, params.field, gen, todo.size)
        B = sample_wishart(params.p, db, params.field, gen, todo.size)
        W = A + B
        ok = is_positive_definite(W, tol)
        X = np.zeros_like(A)
        if np.any(ok):
            root = sym_sqrt(W[ok], inverse=True, tol=tol)
            X[ok] = hermitize(root @ A[ok] @ root)
            ok[ok] = loewner_interval_contains(X[ok], tol)
        out[todo[ok]] = X[ok]
        rejected += int(np.count_nonzero(~ok))
        todo = todo[~ok]
    return out, rejected


def sample_matrix_beta(
    params: BetaParams, rng, size: int | None = None, tol: Tolerance = DEFAULT_TOL, return_rejections: bool = False
):
    """Matrix Beta draw(s) ``X = (A+B)^{-1/2} A (A+B)^{-1/2}`` from independent Wisharts.

    Wishart degrees of freedom are ``2a, 2b`` (real) or ``a, b`` (complex).
    Draws where ``A + B`` or ``X`` fail strict positivity are redrawn; with
    ``return_rejections=True`` the number of redraws is returned as well.
    """
    gen = _as_generator(rng)
    X, rejected = _beta_draw(params, gen, 1 if size is None else size, tol)
    if size is None:
        X = X[0]
    return (X, rejected) if return_rejections else X


def beta_moment_formulas(params: BetaParams) -> tuple[float, float]:
    """Scalars ``c1, c2`` with ``E[X] = c1 I`` and ``E[X^2] = c2 I``."""
    a, b, p = params.a, params.b, params.p
    c1 = a / (a + b)
    if params.field is Field.REAL:
        tail = (p - 1) * b / (2 * a + 2 * b - 1)
    else:
        tail = (p - 1) * b / (a + b - 1)
    c2 = a / ((a + b) * (a + b + 1)) * (a + 1 + tail)
    return c1, c2


# -- Jacobi ensemble -----------------------------------------------------------


@dataclass(frozen=True)
class JacobiParams:
    """Eigenvalue law with density ``c_J |Delta|^beta prod l^(a-1) (1-l)^(b-1)`` on (0,1)^p."""

    a: float
    b: float
    beta: float
    p: int

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.beta > 0):
            raise DomainError("Jacobi parameters a, b, beta must be positive")
        if self.p < 1:
            raise DomainError("p must be positive")

    @classmethod
    def for_beta_eigenvalues(cls, params: BetaParams) -> "JacobiParams":
        """Eigenvalue law of a matrix Beta variable."""
        shift = 0.5 * (params.p - 1) if params.field is Field.REAL else params.p - 1
        return cls(params.a - shift, params.b - shift, float(params.field.beta_index), params.p)


def jacobi_log_normalizer(params: JacobiParams) -> float:
    """``log c_J`` with
    ``c_J = prod_j G(1+g) G(a+b+g(p+j-2)) / (G(1+g j) G(a+g(j-1)) G(b+g(j-1)))``, ``g = beta/2``.
    """
    a, b, p = params.a, params.b, params.p
    g = 0.5 * params.beta
    j = np.arange(1, p + 1)
    num = gammaln(1 + g) + gammaln(a + b + g * (p + j - 2))
    den = gammaln(1 + g * j) + gammaln(a + g * (j - 1)) + gammaln(b + g * (j - 1))
    return float(np.sum(num - den))


def jacobi_log_density(lam, params: JacobiParams) -> float:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (params.p,):
        raise ValueError(f"expected {params.p} eigenvalues, got shape {lam.shape}")
    if np.any(lam <= 0) or np.any(lam >= 1):
        raise DomainError("Jacobi density is supported on (0, 1)^p")
    iu = np.triu_indices(params.p, 1)
    gaps = np.abs(lam[iu[1]] - lam[iu[0]])
    vdm = np.sum(np.log(gaps)) if gaps.size else 0.0
    return (
        jacobi_log_normalizer(params)
        + params.beta * vdm
        + np.sum((params.a - 1) * np.log(lam) + (params.b - 1) * np.log1p(-lam))
    )


def aomoto_moments(params: JacobiParams, m: int) -> float:
    """``E[l_1 ... l_m] = prod_{i<=m} (a + g(p-i)) / (a + b + g(2p-i-1))``, ``g = beta/2``."""
    p = params.p
    if not 1 <= m <= p:
        raise DomainError(f"need 1 <= m <= p, got m={m}, p={p}")
    g = 0.5 * params.beta
    a, b = params.a, params.b
    out = 1.0
    for i in range(1, m + 1):
        out *= (a + g * (p - i)) / (a + b + g * (2 * p - i - 1))
    return out


def aomoto_second_moment(params: JacobiParams) -> float:
    """``E[l_1^2]`` from the first-moment product formula and the second-moment recursion."""
    a, b, p = params.a, params.b, params.p
    g = 0.5 * params.beta
    q = g * (p - 1)
    lead = (a + q) / ((a + b + 2 * q) * (a + b + 1 + 2 * q))
    return lead * ((a + 1 + q) + q * (b + q) / (a + b + 2 * q - g))


# -- uniform distribution on the moment space ------------------------------------


def uniform_canonical_parameter(n: int, k: int, p: int, field: Field | str) -> float:
    """Beta parameter (``a = b``) of ``U_k`` for the uniform law on ``M_n``."""
    field = Field.coerce(field)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    m = n - k + 1
    return 0.5 * m * (p + 1) if field is Field.REAL else float(p * m)


def sample_uniform_canonical(n: int, p: int, field: Field | str, rng, size: int, k: int | None = None) -> np.ndarray:
    """Independent Beta canonical moments ``U_1..U_k`` of a uniform point of ``M_n``.

    Returns an array ``(size, k, p, p)``; ``k`` defaults to ``n``.
    """
    field = Field.coerce(field)
    k = n if k is None else k
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    gen = _as_generator(rng)
    U = np.empty((size, k, p, p), dtype=field.dtype)
    for j in range(1, k + 1):
        a = uniform_canonical_parameter(n, j, p, field)
        U[:, j - 1] = sample_matrix_beta(BetaParams(field, p, a, a), gen, size)
    return U


def sample_uniform_moment_space(
    n: int, p: int, field: Field | str, rng, size: int | None = None, k: int | None = None
):
    """Uniform draw(s) from ``M_n``: Beta canonical moments mapped through the G-array.

    With ``k < n`` only ``S_1..S_k`` are produced; their joint law is the
    marginal of the uniform law on ``M_n`` because ``S_j`` depends on
    ``U_1..U_j`` only.  Returns a :class:`MomentSequence` for a single draw,
    otherwise an array ``(size, k, p, p)``.
    """
    field = Field.coerce(field)
    U = sample_uniform_canonical(n, p, field, rng, 1 if size is None else size, k)
    S = _unmap_array(U)
    if size is None:
        return MomentSequence(field, S[0])
    return S
