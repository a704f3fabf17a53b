"""Shared test helpers: random matrices and comparison utilities."""
import numpy as np
from scipy.stats import ortho_group, unitary_group

from matmoments.linalg import Field


def random_unitary(p, field, rng):
    if p == 1:
        return np.eye(1, dtype=field.dtype)
    seed = int(rng.integers(2**31))
    if field is Field.REAL:
        return ortho_group.rvs(p, random_state=seed)
    return unitary_group.rvs(p, random_state=seed)


def random_interval_matrix(p, field, rng, low=0.05, high=0.95):
    """Random symmetric/Hermitian matrix with spectrum in (low, high)."""
    Q = random_unitary(p, field, rng)
    w = rng.uniform(low, high, size=p)
    return (Q * w) @ np.conj(Q.T)


def random_canonical(n, p, field, rng, low=0.05, high=0.95):
    return np.stack([random_interval_matrix(p, field, rng, low, high) for _ in range(n)])


def random_psd(p, field, rng):
    G = rng.standard_normal((p, p))
    if field is Field.COMPLEX:
        G = G + 1j * rng.standard_normal((p, p))
    return G @ np.conj(G.T)


def random_weights(m, p, field, rng):
    """m full-rank PSD weights summing to the identity."""
    Ws = [random_psd(p, field, rng) + 0.1 * np.eye(p) for _ in range(m)]
    C = sum(Ws)
    w, V = np.linalg.eigh(C)
    R = (V / np.sqrt(w)) @ np.conj(V.T)
    out = [R @ W @ R for W in Ws]
    out = [0.5 * (W + np.conj(W.T)) for W in out]
    out[-1] = out[-1] + (np.eye(p) - sum(out))
    return out


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))
