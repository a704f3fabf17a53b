"""Monte Carlo checks of the Gaussian-ensemble limit laws.

Each experiment is described by an :class:`ExperimentConfig` and produces a
:class:`StatReport` whose verdicts are recomputable from the numbers and
thresholds stored in it.  Weak convergence is checked coordinate-wise (KS
distance of every independent real coordinate against its Gaussian target)
together with the empirical covariance structure.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import asdict, dataclass, field as dc_field
from typing import Any

import numpy as np
from scipy.special import ndtr

from .canonical import _unmap_array, center_directional_derivatives, numerical_jacobian_at_center
from .ensembles import (
    BetaParams,
    RngState,
    beta_moment_formulas,
    sample_batch,
    sample_matrix_beta,
    sample_uniform_canonical,
)
from .errors import ConfigError, TooFewSamples
from .io import write_atomic
from .linalg import Field
from .moments import clt_matrix_A, clt_scale, interior_mask, log_volume, standardize_moment_vector

log = logging.getLogger(__name__)

__all__ = [
    "KINDS",
    "DEFAULT_TOLERANCES",
    "ExperimentConfig",
    "StatReport",
    "ks_statistic",
    "standardize_beta_sample",
    "flatten_coordinates",
    "run_beta_clt",
    "run_canonical_vector_clt",
    "run_moment_vector_clt",
    "run_jacobian_check",
    "run_volume_check",
    "run_experiment",
    "write_coordinates_csv",
]

KINDS = ("BetaToGaussian", "CanonicalVector", "MomentVector", "JacobianCheck", "VolumeCheck")

DEFAULT_TOLERANCES: dict[str, dict[str, float]] = {
    "BetaToGaussian": {"ks": 0.02, "l2_rel": 0.2},
    "CanonicalVector": {"ks": 0.02, "cross_cov": 0.05},
    "MomentVector": {"ks": 0.03, "cov": 0.1},
    "JacobianCheck": {"max_dev": 1e-5},
    "VolumeCheck": {"sigmas": 3.0},
}

TARGET_SD = {"N01": 1.0, "N0half": math.sqrt(0.5)}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    field: Field = Field.REAL
    p: int = 1
    n: int = 1
    k: int = 1
    samples: int = 10_000
    seed: int = 0
    tolerances: dict[str, float] = dc_field(default_factory=dict)
    ladder: tuple[int, ...] = (50, 200, 800)
    scale_factor: float = 1.0
    h: float = 1e-5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        try:
            object.__setattr__(self, "field", Field.coerce(self.field))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for name in ("p", "n", "k"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.k > self.n:
            raise ConfigError(f"k={self.k} exceeds n={self.n}")
        if self.samples < 100:
            raise ConfigError("samples must be at least 100")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES[self.kind])
        if unknown:
            raise ConfigError(f"unknown tolerances for {self.kind}: {sorted(unknown)}")
        object.__setattr__(self, "ladder", tuple(int(v) for v in self.ladder))

    @property
    def thresholds(self) -> dict[str, float]:
        return {**DEFAULT_TOLERANCES[self.kind], **self.tolerances}

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ConfigError('experiment config must be a JSON object with a "kind"')
        allowed = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - allowed
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["field"] = self.field.value
        d["ladder"] = list(self.ladder)
        return d


@dataclass
class StatReport:
    config: dict[str, Any]
    thresholds: dict[str, float]
    statistics: dict[str, Any]
    verdicts: dict[str, bool]
    wall_time: float = 0.0
    coordinate_names: list[str] = dc_field(default_factory=list, repr=False)
    coordinates: np.ndarray | None = dc_field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self, include_timing: bool = False) -> dict[str, Any]:
        out = {
            "config": self.config,
            "thresholds": self.thresholds,
            "statistics": self.statistics,
            "verdicts": self.verdicts,
            "passed": self.passed,
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out


def ks_statistic(samples, target: str = "N01") -> float:
    """Sup distance between the empirical CDF of ``samples`` and N(0,1) or N(0,1/2)."""
    if target not in TARGET_SD:
        raise ValueError(f"unknown target {target!r}")
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    m = x.size
    if m < 100:
        raise TooFewSamples(f"KS statistic needs at least 100 samples, got {m}")
    cdf = ndtr(x / TARGET_SD[target])
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - cdf), np.max(cdf - (i - 1) / m)))


def standardize_beta_sample(X: np.ndarray, gamma: float, n: int) -> np.ndarray:
    """``sqrt(8 gamma n) (X - I/2)``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    X = np.asarray(X)
    return math.sqrt(8 * gamma * n) * (X - 0.5 * np.eye(X.shape[-1]))


def flatten_coordinates(blocks: np.ndarray, field: Field, prefix: str = "G") -> tuple[np.ndarray, list[str], np.ndarray]:
    """Independent real coordinates of a stack of blocks ``(samples, k, p, p)``.

    Returns ``(coords, names, target_variances)``; diagonal entries have
    target variance 1, off-diagonal real/imaginary parts 1/2.
    """
    samples, k, p = blocks.shape[0], blocks.shape[1], blocks.shape[-1]
    iu = np.triu_indices(p, 1)
    cols, names, var = [], [], []
    for b in range(k):
        B = blocks[:, b]
        for i in range(p):
            cols.append(B[:, i, i].real)
            names.append(f"{prefix}{b + 1}[{i + 1},{i + 1}]")
            var.append(1.0)
        for i, j in zip(*iu):
            cols.append(B[:, i, j].real)
            names.append(f"{prefix}{b + 1}[{i + 1},{j + 1}].re")
            var.append(0.5)
            if field is Field.COMPLEX:
                cols.append(B[:, i, j].imag)
                names.append(f"{prefix}{b + 1}[{i + 1},{j + 1}].im")
                var.append(0.5)
    coords = np.stack(cols, axis=1) if cols else np.zeros((samples, 0))
    return coords, names, np.array(var)


def _coordinate_stats(coords: np.ndarray, names: list[str], var: np.ndarray, coords_per_block: int):
    ks = {
        name: ks_statistic(coords[:, c], "N01" if var[c] == 1.0 else "N0half")
        for c, name in enumerate(names)
    }
    cov = np.cov(coords, rowvar=False, ddof=1).reshape(len(names), len(names))
    target = np.diag(var)
    dev = np.abs(cov - target)
    block = np.arange(len(names)) // coords_per_block
    cross = block[:, None] != block[None, :]
    stats = {
        "ks": ks,
        "max_ks": max(ks.values()),
        "mean": coords.mean(axis=0).tolist(),
        "covariance": cov.tolist(),
        "target_covariance": target.tolist(),
        "max_abs_cov_deviation": float(dev.max()),
        "max_abs_cross_block_cov": float(dev[cross].max()) if cross.any() else 0.0,
    }
    return stats


def _gamma_for(field: Field, p: int) -> float:
    return 0.5 * (p + 1) if field is Field.REAL else float(p)


def _exact_l2(field: Field, p: int, a: float) -> float:
    _, c2 = beta_moment_formulas(BetaParams(field, p, a, a))
    return p * (c2 - 0.25)


def run_beta_clt(config: ExperimentConfig) -> StatReport:
    """Standardized ``Beta_p(gamma n, gamma n)`` against the GOE/GUE entry laws,
    plus the L2 contraction ``E||X - I/2||^2`` across a ladder of ``n``.
    """
    t0 = time.perf_counter()
    field, p, n = config.field, config.p, config.n
    gamma = _gamma_for(field, p)
    state = RngState(config.seed)
    params = BetaParams(field, p, gamma * n, gamma * n)
    scale = config.scale_factor

    def draw(gen, size):
        X = sample_matrix_beta(params, gen, size)
        return scale * standardize_beta_sample(X, gamma, n)

    G = sample_batch(draw, config.samples, state, f"beta-clt/{n}")
    coords, names, var = flatten_coordinates(G[:, None], field)
    stats = _coordinate_stats(coords, names, var, len(names))

    ladder = []
    for m in config.ladder:
        pm = BetaParams(field, p, gamma * m, gamma * m)
        X = sample_batch(lambda gen, size: sample_matrix_beta(pm, gen, size), config.samples, state, f"beta-l2/{m}")
        centred = X - 0.5 * np.eye(p)
        sq = np.sum(np.abs(centred) ** 2, axis=(-1, -2))
        exact = _exact_l2(field, p, gamma * m)
        emp = float(sq.mean())
        ladder.append({"n": m, "a": gamma * m, "empirical": emp, "exact": exact, "rel_error": abs(emp - exact) / exact})
    stats["l2_ladder"] = ladder

    thr = config.thresholds
    verdicts = {"ks": stats["max_ks"] < thr["ks"]}
    if ladder:
        verdicts["l2_within"] = all(r["rel_error"] < thr["l2_rel"] for r in ladder)
        verdicts["l2_decreasing"] = all(x["empirical"] > y["empirical"] for x, y in zip(ladder, ladder[1:]))
    return StatReport(config.to_dict(), thr, stats, verdicts, time.perf_counter() - t0, names, coords)


def run_canonical_vector_clt(config: ExperimentConfig) -> StatReport:
    """First ``k`` canonical moments of a uniform point of ``M_n``, standardized by
    ``scale(n) (U - I/2)``; per-coordinate KS and cross-block covariance.
    """
    t0 = time.perf_counter()
    field, p, n, k = config.field, config.p, config.n, config.k
    scale = config.scale_factor * clt_scale(n, p, field)

    def draw(gen, size):
        U = sample_uniform_canonical(n, p, field, gen, size, k)
        return scale * (U - 0.5 * np.eye(p))

    G = sample_batch(draw, config.samples, RngState(config.seed), f"canonical-clt/{n}/{k}")
    coords, names, var = flatten_coordinates(G, field)
    stats = _coordinate_stats(coords, names, var, field.coords_per_block(p))
    thr = config.thresholds
    verdicts = {
        "ks": stats["max_ks"] < thr["ks"],
        "cross_cov": stats["max_abs_cross_block_cov"] < thr["cross_cov"],
    }
    return StatReport(config.to_dict(), thr, stats, verdicts, time.perf_counter() - t0, names, coords)


def run_moment_vector_clt(config: ExperimentConfig) -> StatReport:
    """First ``k`` moments of a uniform point of ``M_n``, standardized by
    ``scale(n) (A^{-1} kron I)(S - S^0)``; per-coordinate KS and full covariance.
    """
    t0 = time.perf_counter()
    field, p, n, k = config.field, config.p, config.n, config.k

    def draw(gen, size):
        U = sample_uniform_canonical(n, p, field, gen, size, k)
        S = _unmap_array(U)
        return config.scale_factor * standardize_moment_vector(S, n, field)

    G = sample_batch(draw, config.samples, RngState(config.seed), f"moment-clt/{n}/{k}")
    coords, names, var = flatten_coordinates(G, field)
    stats = _coordinate_stats(coords, names, var, field.coords_per_block(p))
    thr = config.thresholds
    verdicts = {
        "ks": stats["max_ks"] < thr["ks"],
        "cov": stats["max_abs_cov_deviation"] < thr["cov"],
    }
    return StatReport(config.to_dict(), thr, stats, verdicts, time.perf_counter() - t0, names, coords)


def run_jacobian_check(config: ExperimentConfig) -> StatReport:
    """Finite-difference derivative of the inverse canonical map at the centre
    against ``A kron I_p``, both as fitted blocks and direction by direction.
    """
    t0 = time.perf_counter()
    field, p, k = config.field, config.p, config.k
    A = clt_matrix_A(k)
    L = numerical_jacobian_at_center(k, p, config.h, field)
    block_dev = float(np.max(np.abs(L - np.kron(A, np.eye(p)))))
    basis, R = center_directional_derivatives(k, p, config.h, field)
    expected = A.T[:, None, :, None, None] * np.stack(basis)[None, :, None]
    dir_dev = float(np.max(np.abs(R - expected)))
    stats = {
        "A": A.tolist(),
        "max_block_deviation": block_dev,
        "max_directional_deviation": dir_dev,
        "directions": len(basis),
    }
    thr = config.thresholds
    verdicts = {"jacobian": max(block_dev, dir_dev) < thr["max_dev"]}
    return StatReport(config.to_dict(), thr, stats, verdicts, time.perf_counter() - t0)


def _box_draw(n: int, p: int, field: Field, tol_mask):
    iu = np.triu_indices(p, 1)
    idx = np.arange(p)

    def draw(gen, size):
        S = np.zeros((size, n, p, p), dtype=field.dtype)
        S[..., idx, idx] = gen.random((size, n, p))
        if iu[0].size:
            off = gen.random((size, n, iu[0].size)) - 0.5
            if field is Field.COMPLEX:
                off = off + 1j * (gen.random((size, n, iu[0].size)) - 0.5)
            S[..., iu[0], iu[1]] = off
            S[..., iu[1], iu[0]] = np.conj(off)
        return tol_mask(S)

    return draw


def run_volume_check(config: ExperimentConfig) -> StatReport:
    """Rejection-sampling estimate of the volume of ``M_n``.

    Points are drawn uniformly from the unit-volume box with diagonal entries in
    ``[0, 1]`` and off-diagonal real/imaginary parts in ``[-1/2, 1/2]``, which
    contains ``M_n`` since ``0 <= S_k <= I``.
    """
    t0 = time.perf_counter()
    field, p, n = config.field, config.p, config.n
    hits = sample_batch(_box_draw(n, p, field, interior_mask), config.samples, RngState(config.seed), f"volume/{n}")
    q = float(hits.mean())
    se = math.sqrt(q * (1 - q) / hits.size)
    exact = math.exp(log_volume(n, p, field))
    stats = {
        "box_volume": 1.0,
        "hits": int(hits.sum()),
        "estimate": q,
        "standard_error": se,
        "exact": exact,
        "z": (q - exact) / se if se > 0 else None,
    }
    thr = config.thresholds
    # a zero standard error (no hits, or all hits) only passes on exact agreement
    verdicts = {"volume": abs(q - exact) <= thr["sigmas"] * se}
    return StatReport(config.to_dict(), thr, stats, verdicts, time.perf_counter() - t0)


_RUNNERS = {
    "BetaToGaussian": run_beta_clt,
    "CanonicalVector": run_canonical_vector_clt,
    "MomentVector": run_moment_vector_clt,
    "JacobianCheck": run_jacobian_check,
    "VolumeCheck": run_volume_check,
}


def run_experiment(config: ExperimentConfig) -> StatReport:
    report = _RUNNERS[config.kind](config)
    log.info("%s finished in %.2fs: %s", config.kind, report.wall_time, "pass" if report.passed else "FAIL")
    return report


def write_coordinates_csv(path, report: StatReport) -> None:
    if report.coordinates is None:
        raise ValueError(f"{report.config['kind']} produces no coordinates")
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(report.coordinate_names)
    writer.writerows(report.coordinates.tolist())
    write_atomic(path, buf.getvalue())
