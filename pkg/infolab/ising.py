"""2D Ising Monte Carlo and the effective rank of spin mutual information across temperature.

Units: J = k_B = 1, periodic L×L lattice, Metropolis single-spin-flip dynamics. On even lattices a sweep visits the two
checkerboard sublattices in turn; spins of one color have no neighbors of the same color, so updating a color at once
is the same chain as updating its sites one by one. Odd lattices fall back to a sequential raster sweep.

Chains start from the all-up state.
"""
import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np
import scipy.stats

from infolab.errors import InputError
from infolab.mi_estimation import EstimatorConfig, MIMatrix, SampleMatrix, build_mi_matrix
from infolab.spectral import DEFAULT_RANK_REL_TOL, CapacityBudget, capacity_modes, spectral_summary

logger = logging.getLogger(__name__)

ONSAGER_TC = 2 / math.log(1 + math.sqrt(2))
MIN_CONFIGS = 100
DEFAULT_MAX_SITES = 64


@dataclasses.dataclass
class IsingSpec:
    L: int = 16
    T_list: list[float] = dataclasses.field(default_factory=lambda: [1.5, 2.0, 2.27, 2.5, 3.5])
    sweeps: int = 20000
    burn_in: int = 1000
    thin: int = 10
    seed: int = 0
    site_subsample: int | None = None
    budget_C: float | None = None
    rank_rel_tol: float = DEFAULT_RANK_REL_TOL

    def __post_init__(self):
        if self.L < 2:
            raise InputError(f"lattice side must be >= 2, got {self.L}")
        if any(not t > 0 for t in self.T_list):
            raise InputError(f"temperatures must be > 0, got {self.T_list}")
        if self.sweeps < 1 or self.burn_in < 1:
            raise InputError("sweeps and burn_in must be >= 1")
        if self.thin < 1:
            raise InputError(f"thin must be >= 1, got {self.thin}")
        if self.site_subsample is not None and not 1 <= self.site_subsample <= self.L**2:
            raise InputError(f"site_subsample must lie in [1, {self.L ** 2}], got {self.site_subsample}")

    @property
    def n_sites(self) -> int:
        return self.L**2

    @property
    def resolved_site_subsample(self) -> int:
        return self.site_subsample if self.site_subsample is not None else min(self.n_sites, DEFAULT_MAX_SITES)


@dataclasses.dataclass
class IsingRun:
    T: float
    configs: np.ndarray
    energy_per_site: np.ndarray
    magnetization: np.ndarray


@dataclasses.dataclass
class IsingSweepRow:
    T: float
    erank: float
    numerical_rank: int
    mean_abs_magnetization: float
    energy_per_site: float
    n_configs: int
    site_subsample: int
    seed: int
    capacity_modes: int | None = None
    exceeds_capacity: bool | None = None


def _neighbor_sum(spins: np.ndarray) -> np.ndarray:
    return np.roll(spins, 1, 0) + np.roll(spins, -1, 0) + np.roll(spins, 1, 1) + np.roll(spins, -1, 1)


def energy_per_site(spins: np.ndarray) -> float:
    """−Σ s_i s_j over nearest-neighbor bonds, divided by the number of sites."""
    bonds = spins * np.roll(spins, 1, 0) + spins * np.roll(spins, 1, 1)
    return float(-bonds.sum() / spins.size)


def _checkerboard_sweep(spins: np.ndarray, beta: float, masks: tuple[np.ndarray, np.ndarray],
                        rng: np.random.Generator) -> None:
    for mask in masks:
        delta = 2 * spins * _neighbor_sum(spins)
        accept = mask & (rng.random(spins.shape) < np.exp(-beta * delta))
        spins[accept] *= -1


def _sequential_sweep(spins: np.ndarray, beta: float, rng: np.random.Generator) -> None:
    L = spins.shape[0]
    draws = rng.random(spins.shape)
    for i in range(L):
        for j in range(L):
            nb = spins[(i - 1) % L, j] + spins[(i + 1) % L, j] + spins[i, (j - 1) % L] + spins[i, (j + 1) % L]
            delta = 2 * spins[i, j] * nb
            if delta <= 0 or draws[i, j] < math.exp(-beta * delta):
                spins[i, j] *= -1


def simulate(spec: IsingSpec, T: float, seed: int | Sequence[int] | None = None) -> IsingRun:
    """Burn in, then record every `thin`-th of `sweeps` measurement sweeps."""
    if not T > 0:
        raise InputError(f"temperature must be > 0, got {T}")
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    L = spec.L
    beta = 1.0 / T
    spins = np.ones((L, L), dtype=np.int8)

    if L % 2 == 0:
        parity = np.add.outer(np.arange(L), np.arange(L)) % 2 == 0
        masks = (parity, ~parity)

        def sweep() -> None:
            _checkerboard_sweep(spins, beta, masks, rng)

    else:

        def sweep() -> None:
            _sequential_sweep(spins, beta, rng)

    for _ in range(spec.burn_in):
        sweep()

    configs, energies, mags = [], [], []
    for t in range(1, spec.sweeps + 1):
        sweep()
        if t % spec.thin == 0:
            configs.append(spins.ravel().copy())
            energies.append(energy_per_site(spins))
            mags.append(float(spins.mean()))

    logger.debug("T=%g: recorded %d configurations", T, len(configs))
    return IsingRun(
        T,
        np.array(configs, dtype=np.int8).reshape(len(configs), L * L),
        np.array(energies),
        np.array(mags),
    )


def spin_mi_matrix(configs: np.ndarray, site_subsample: int | None = None, seed: int | Sequence[int] = 0) -> MIMatrix:
    """Plug-in MI between spin columns (2×2 tables) with self-entropy on the diagonal.

    When `site_subsample` is smaller than the number of sites a seeded uniform subset of sites is used, kept in lattice
    order.
    """
    configs = np.asarray(configs)
    if configs.shape[0] < MIN_CONFIGS:
        raise InputError(f"insufficient samples: {configs.shape[0]} configurations, need {MIN_CONFIGS}")
    n_sites = configs.shape[1]
    sites = np.arange(n_sites)
    if site_subsample is not None and site_subsample < n_sites:
        rng = np.random.default_rng(seed)
        sites = np.sort(rng.choice(n_sites, size=site_subsample, replace=False))

    samples = SampleMatrix(configs[:, sites], ("discrete",), tuple(f"site{i}" for i in sites))
    return build_mi_matrix(samples, EstimatorConfig(method="discrete_plugin"), diagonal_policy="self_entropy")


def criticality_sweep(
    spec: IsingSpec,
    threads: int = 1,
    on_matrix: Callable[[float, MIMatrix], None] | None = None,
) -> list[IsingSweepRow]:
    """Simulate every temperature, then report the effective rank of its spin MI matrix.

    Each temperature runs its own chain seeded with (seed, index). The same site subset is used at every temperature.
    """
    if len(spec.T_list) == 0:
        raise InputError("temperature list is empty")
    if min(spec.T_list) >= ONSAGER_TC or max(spec.T_list) <= ONSAGER_TC:
        logger.warning("Temperatures %s do not straddle T_c = %.4f", spec.T_list, ONSAGER_TC)
    n_sub = spec.resolved_site_subsample

    def one_point(index: int) -> tuple[IsingSweepRow, MIMatrix]:
        T = float(spec.T_list[index])
        run = simulate(spec, T, seed=(spec.seed, index))
        m = spin_mi_matrix(run.configs, n_sub, seed=spec.seed)
        summary = spectral_summary(m, spec.rank_rel_tol)
        row = IsingSweepRow(
            T=T,
            erank=summary.effective_rank,
            numerical_rank=summary.numerical_rank,
            mean_abs_magnetization=float(np.mean(np.abs(run.magnetization))),
            energy_per_site=float(np.mean(run.energy_per_site)),
            n_configs=int(run.configs.shape[0]),
            site_subsample=n_sub,
            seed=spec.seed,
        )
        if spec.budget_C is not None:
            row.capacity_modes = capacity_modes(summary.singular_values, CapacityBudget(spec.budget_C))
            row.exceeds_capacity = row.erank > row.capacity_modes
        logger.info("T=%g: erank=%.6g |m|=%.4f", T, row.erank, row.mean_abs_magnetization)
        return row, m

    indices = range(len(spec.T_list))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_point, indices))
    else:
        results = [one_point(i) for i in indices]

    if on_matrix is not None:
        for row, m in results:
            on_matrix(row.T, m)
    return [row for row, _ in results]


@dataclasses.dataclass
class TrendTest:
    tau: float
    p_value: float


def mann_kendall(series: np.ndarray) -> TrendTest:
    """Mann-Kendall monotone-trend test: Kendall's tau between the series and its time index (ties handled)."""
    series = np.asarray(series, dtype=float)
    result = scipy.stats.kendalltau(np.arange(series.size), series)
    return TrendTest(float(result.statistic), float(result.pvalue))
