"""Spectral complexity of a mutual-information matrix.

The structural complexity C(S) of a system is the effective rank of its MI matrix I = UΛUᵀ:

    p_i = σ_i / Σ_j σ_j,    C(S) = exp(−Σ_i p_i ln p_i)

An encoding budget C (nats) affords the first C′ spectral modes, C′ = max{n : σ_1 + … + σ_n ≤ C}. When C(S) > C′ the
system has structure the budget cannot hold, and the next mode u_{C′+1} gives a new global feature f_new = u_{C′+1}ᵀ S.
"""
import dataclasses
import logging
import math
from typing import Literal

import numpy as np

from infolab.errors import InputError, NumericalError
from infolab.mi_estimation import (
    EstimatorConfig,
    MIMatrix,
    SampleMatrix,
    column_entropies,
    estimate_entropy,
    shannon_entropy,
)

logger = logging.getLogger(__name__)

DEFAULT_RANK_REL_TOL = 1e-10
DEFAULT_THETA = 0.05

ThetaSource = Literal["override", "formula", "fallback_default"]


@dataclasses.dataclass
class SpectralSummary:
    singular_values: np.ndarray
    weights: np.ndarray
    numerical_rank: int
    effective_rank: float
    rank_tolerance: float


@dataclasses.dataclass
class CapacityBudget:
    C: float
    k: int | None = None

    def __post_init__(self):
        if not self.C >= 0:
            raise InputError(f"capacity must be >= 0, got {self.C}")
        if self.k is not None and self.k < 0:
            raise InputError(f"dimension cap must be >= 0, got {self.k}")


@dataclasses.dataclass
class EmergenceVerdict:
    complexity: float
    numerical_rank: int
    capacity_modes: int
    theta: float
    theta_source: ThetaSource
    epsilon: float
    emerged: bool
    direction: np.ndarray | None = None
    feature_entropy_lower_bound: float | None = None
    mi_ratio: float | None = None
    exceeds_threshold: bool | None = None


def as_square_matrix(m: MIMatrix | np.ndarray) -> np.ndarray:
    values = m.values if isinstance(m, MIMatrix) else np.asarray(m, dtype=float)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise InputError(f"expected a square matrix, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise InputError("matrix has non-finite entries")
    return values


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def summarize_singular_values(sv: np.ndarray, rank_rel_tol: float = DEFAULT_RANK_REL_TOL) -> SpectralSummary:
    """Effective rank from singular values, keeping only those above `rank_rel_tol`·σ_1."""
    sv = np.sort(np.abs(np.asarray(sv, dtype=float)))[::-1]
    if sv.size == 0 or sv[0] <= 0:
        return SpectralSummary(np.zeros(0), np.zeros(0), 0, 0.0, 0.0)

    tolerance = rank_rel_tol * sv[0]
    kept = sv[sv > tolerance]
    weights = kept / kept.sum()
    erank = math.exp(shannon_entropy(weights))
    return SpectralSummary(kept, weights, int(kept.size), erank, float(tolerance))


def spectral_summary(m: MIMatrix | np.ndarray, rank_rel_tol: float = DEFAULT_RANK_REL_TOL) -> SpectralSummary:
    return summarize_singular_values(np.linalg.svd(as_square_matrix(m), compute_uv=False), rank_rel_tol)


def capacity_modes(sv: np.ndarray, budget: CapacityBudget) -> int:
    """Greatest prefix length n with σ_1 + … + σ_n ≤ C, counting positive σ only and capped at `budget.k`."""
    sv = np.asarray(sv, dtype=float)
    sv = sv[sv > 0]
    n = int(np.searchsorted(np.cumsum(sv), budget.C, side="right"))
    if budget.k is not None:
        n = min(n, budget.k)
    return n


def _resolve_theta(lam: float | None, d: int, h_first: float, epsilon: float,
                   theta_override: float | None) -> tuple[float, ThetaSource]:
    if theta_override is not None:
        if not 0 < theta_override < 1:
            raise InputError(f"theta must lie in (0, 1), got {theta_override}")
        return theta_override, "override"
    if lam is not None and lam > 0 and h_first > 0:
        theta = math.log(2 * math.pi * math.e * lam) / (2 * d * h_first) - epsilon
        if 0 < theta < 1:
            return theta, "formula"
        logger.info("Threshold formula gave %.6g outside (0, 1); using %g", theta, DEFAULT_THETA)
    return DEFAULT_THETA, "fallback_default"


def _feature_entropy(f: np.ndarray, s: SampleMatrix, cfg: EstimatorConfig) -> float:
    if s.all_discrete:
        # f is a function of discrete variables; values equal up to rounding are the same outcome
        _, counts = np.unique(np.round(f, 10), return_counts=True)
        return shannon_entropy(counts)
    cont_cfg = dataclasses.replace(cfg, method=None if cfg.method == "discrete_plugin" else cfg.method)
    return estimate_entropy(f, cont_cfg, "continuous")


def emergence_check(
    s: SampleMatrix,
    m: MIMatrix,
    budget: CapacityBudget,
    epsilon: float,
    theta_override: float | None = None,
    rank_rel_tol: float = DEFAULT_RANK_REL_TOL,
) -> EmergenceVerdict:
    """Compare structural complexity with the modes the budget affords and extract the first unaffordable mode.

    Column entropies are only estimated once the complexity exceeds the affordable modes. For continuous samples they
    are differential entropies, so `mi_ratio` depends on the units of the data, and data on a small scale can make
    Ĥ(S) non-positive, which raises `NumericalError`.
    """
    if not epsilon > 0:
        raise InputError(f"epsilon must be > 0, got {epsilon}")
    if m.d != s.d:
        raise InputError(f"MI matrix is {m.d}x{m.d} but the samples have {s.d} columns")

    u, sv, _ = np.linalg.svd(m.values)
    summary = summarize_singular_values(sv, rank_rel_tol)
    modes = capacity_modes(summary.singular_values, budget)
    emerged = summary.effective_rank > modes
    logger.info("C(S)=%.6g, rank=%d, C'=%d", summary.effective_rank, summary.numerical_rank, modes)

    if not emerged:
        theta, source = _resolve_theta(None, s.d, 0.0, epsilon, theta_override)
        return EmergenceVerdict(summary.effective_rank, summary.numerical_rank, modes, theta, source, epsilon, False)

    h_columns = column_entropies(s, m.estimator)
    if summary.numerical_rank < modes + 1:
        raise NumericalError("spectral gap exhausted")
    direction = _canonical_signs(u[:, modes : modes + 1])[:, 0]
    direction = direction / np.linalg.norm(direction)
    lam = float(summary.singular_values[modes])

    h_system = float(sum(h_columns))
    if h_system <= 0:
        raise NumericalError(f"system entropy estimate is not positive ({h_system:.6g} nats)")
    f_new = s.data @ direction
    mi_ratio = _feature_entropy(f_new, s, m.estimator) / h_system
    theta, source = _resolve_theta(lam, s.d, h_columns[0], epsilon, theta_override)

    return EmergenceVerdict(
        complexity=summary.effective_rank,
        numerical_rank=summary.numerical_rank,
        capacity_modes=modes,
        theta=theta,
        theta_source=source,
        epsilon=epsilon,
        emerged=True,
        direction=direction,
        feature_entropy_lower_bound=0.5 * math.log(2 * math.pi * math.e * lam),
        mi_ratio=mi_ratio,
        exceeds_threshold=mi_ratio > theta,
    )


def randomized_singular_values(values: np.ndarray, l: int, seed: int, power_iters: int = 0) -> np.ndarray:
    """Sketch the range of `values` with l Gaussian probes and read singular values off the projection.

    Q is the orthonormal factor of Y = IΩ, rotated by the left singular vectors of QᵀI so that the row norms of QᵀI are
    the singular-value estimates.
    """
    d = values.shape[0]
    if not 1 <= l <= d:
        raise InputError(f"sketch size must satisfy 1 <= l <= d, got l={l}, d={d}")
    rng = np.random.default_rng(seed)
    y = values @ rng.standard_normal((d, l))
    for _ in range(power_iters):
        q, _ = np.linalg.qr(y)
        y = values @ (values.T @ q)
    q, _ = np.linalg.qr(y)
    u_small, _, _ = np.linalg.svd(q.T @ values, full_matrices=False)
    q = q @ u_small
    return np.linalg.norm(q.T @ values, axis=1)


def randomized_effective_rank(
    m: MIMatrix | np.ndarray,
    l: int,
    seed: int,
    power_iters: int = 0,
    rank_rel_tol: float = DEFAULT_RANK_REL_TOL,
) -> SpectralSummary:
    return summarize_singular_values(randomized_singular_values(as_square_matrix(m), l, seed, power_iters), rank_rel_tol)
