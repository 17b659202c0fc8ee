"""Rank filtration of a mutual-information matrix.

Zeroing every entry below a threshold ε gives a family of matrices I_ε. Numerical rank is piecewise constant in ε
between consecutive distinct entries, so evaluating at {0} ∪ {distinct positive entries} ∪ {max + δ} characterizes the
whole filtration. Each attained rank i is reported with b_i = smallest and d_i = largest grid ε attaining it. Rank need
not be monotone in ε; level sets that are not a contiguous run of grid points are flagged.
"""
import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from infolab.errors import InputError
from infolab.mi_estimation import MIMatrix
from infolab.spectral import DEFAULT_RANK_REL_TOL, as_square_matrix

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class PersistenceInterval:
    level: int
    birth: float
    death: float
    contiguous: bool = True

    @property
    def persistence(self) -> float:
        return self.death - self.birth


@dataclasses.dataclass
class PersistenceBarcode:
    intervals: list[PersistenceInterval]
    epsilon_grid: list[float]
    ranks: list[int]
    rank_tolerance: float
    diagonal_policy: str | None = None


def threshold_matrix(m: MIMatrix | np.ndarray, eps: float) -> np.ndarray:
    """Copy of the matrix with entries strictly below `eps` set to 0."""
    if not eps >= 0:
        raise InputError(f"threshold must be >= 0, got {eps}")
    values = as_square_matrix(m)
    return np.where(values < eps, 0.0, values)


def epsilon_grid(m: MIMatrix | np.ndarray) -> np.ndarray:
    values = as_square_matrix(m)
    positive = np.unique(values[values > 0])
    top = float(values.max(initial=0.0))
    delta = 1e-9 * max(1.0, top)
    return np.concatenate([[0.0], positive, [max(top, 0.0) + delta]])


def rank_filtration(
    m: MIMatrix | np.ndarray,
    rank_rel_tol: float = DEFAULT_RANK_REL_TOL,
    threads: int = 1,
) -> PersistenceBarcode:
    """Barcode of numerical rank over the threshold grid.

    A singular value counts toward the rank when it exceeds `rank_rel_tol` times the largest singular value of the
    unthresholded matrix, so every grid point is judged against the same absolute tolerance.
    """
    values = as_square_matrix(m)
    grid = epsilon_grid(values)
    sigma_max = float(np.linalg.svd(values, compute_uv=False).max(initial=0.0)) if values.size else 0.0
    tolerance = rank_rel_tol * sigma_max

    def rank_at(eps: float) -> int:
        thresholded = threshold_matrix(values, eps)
        if not thresholded.any():
            return 0
        return int(np.sum(np.linalg.svd(thresholded, compute_uv=False) > tolerance))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            ranks = list(pool.map(rank_at, grid))
    else:
        ranks = [rank_at(eps) for eps in grid]

    intervals = []
    for level in sorted(set(ranks)):
        where = np.flatnonzero(np.asarray(ranks) == level)
        contiguous = bool(where[-1] - where[0] + 1 == where.size)
        if not contiguous:
            logger.info("Rank %d is attained on a non-contiguous set of thresholds", level)
        intervals.append(PersistenceInterval(level, float(grid[where[0]]), float(grid[where[-1]]), contiguous))
    intervals.sort(key=lambda iv: (iv.birth, -iv.level))

    policy = m.diagonal_policy if isinstance(m, MIMatrix) else None
    logger.debug("Rank filtration over %d thresholds: ranks %s", grid.size, ranks)
    return PersistenceBarcode(intervals, [float(e) for e in grid], ranks, tolerance, policy)


def persistent_mode_count(barcode: PersistenceBarcode, min_persistence: float) -> int:
    """Nonzero rank levels whose interval is at least `min_persistence` long; compare against C′."""
    if not min_persistence >= 0:
        raise InputError(f"min_persistence must be >= 0, got {min_persistence}")
    return sum(1 for iv in barcode.intervals if iv.level > 0 and iv.persistence >= min_persistence)
