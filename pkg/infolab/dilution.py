"""Monte Carlo checks of information dilution for Gaussian systems.

For S, S′ i.i.d. N(0, Σ) in d dimensions the distance D = ‖S − S′‖ concentrates: its entropy stays O(1) while
H(S) grows like d. The mutual-information efficiency η(D) = I(D;S)/H(S) is reported through its upper bound
Ĥ(D)/H(S), since I(D;S) ≤ H(D).

Theory moments for the i.i.d. case (σ² per coordinate): E[D²] = 2dσ², Var(D²) = 8dσ⁴, Var(D) ≈ σ².
"""
import abc
import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np
import scipy.linalg

from infolab.errors import InputError, NumericalError
from infolab.mi_estimation import kl_entropy

logger = logging.getLogger(__name__)

MIN_REPORT_PAIRS = 1000
SPD_TOL = 1e-12


@dataclasses.dataclass
class GaussianSystemSpec:
    """`covariance=None` draws N(0, σ²I); otherwise N(0, Σ) and `sigma` is ignored."""

    d: int
    sigma: float = 1.0
    covariance: np.ndarray | None = None
    n_pairs: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise InputError(f"dimension must be >= 1, got {self.d}")
        if not self.sigma > 0:
            raise InputError(f"sigma must be > 0, got {self.sigma}")
        if self.n_pairs < 1:
            raise InputError(f"n_pairs must be >= 1, got {self.n_pairs}")
        if self.covariance is not None:
            cov = np.asarray(self.covariance, dtype=float)
            if cov.shape != (self.d, self.d):
                raise InputError(f"covariance must be {self.d}x{self.d}, got {cov.shape}")
            if np.max(np.abs(cov - cov.T)) > SPD_TOL * max(1.0, np.max(np.abs(cov))):
                raise InputError("covariance is not symmetric")
            self.covariance = 0.5 * (cov + cov.T)

    def eigenvalues(self) -> np.ndarray:
        if self.covariance is None:
            return np.full(self.d, self.sigma**2)
        return np.linalg.eigvalsh(self.covariance)


def toeplitz_covariance(d: int, rho: float, sigma: float = 1.0) -> np.ndarray:
    """σ²·ρ^|i−j|, an AR(1) correlation whose largest eigenvalue stays below σ²(1+|ρ|)/(1−|ρ|) for every d."""
    if not -1 < rho < 1:
        raise InputError(f"rho must lie in (-1, 1), got {rho}")
    return sigma**2 * scipy.linalg.toeplitz(rho ** np.arange(d))


def entropy_of_gaussian(eigenvalues: np.ndarray) -> float:
    """½ log det(2πeΣ) from the eigenvalues of Σ."""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    if np.any(eigenvalues <= 0):
        raise NumericalError(f"covariance is singular: lambda_min = {eigenvalues.min():.6g}")
    return float(0.5 * np.sum(np.log(2 * math.pi * math.e * eigenvalues)))


def _cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        lam_min = float(np.linalg.eigvalsh(cov).min())
        raise NumericalError(f"covariance is not positive definite: lambda_min = {lam_min:.6g}") from None


def sample_pairs(spec: GaussianSystemSpec) -> tuple[np.ndarray, np.ndarray]:
    """Two (n_pairs, d) arrays: S and an independent copy S′."""
    rng = np.random.default_rng(spec.seed)
    z = rng.standard_normal((2, spec.n_pairs, spec.d))
    if spec.covariance is None:
        draws = spec.sigma * z
    else:
        draws = z @ _cholesky(spec.covariance).T
    return draws[0], draws[1]


@dataclasses.dataclass
class DistanceMetric(abc.ABC):
    @abc.abstractmethod
    def __call__(self, s: np.ndarray, s_prime: np.ndarray) -> np.ndarray:
        """Distance between matching rows (or two single points)."""

    @abc.abstractmethod
    def lipschitz_constant(self) -> float:
        ...

    @property
    def name(self) -> str:
        return type(self).__name__.lower()


@dataclasses.dataclass
class Euclidean(DistanceMetric):
    def __call__(self, s: np.ndarray, s_prime: np.ndarray) -> np.ndarray:
        return np.linalg.norm(np.asarray(s) - np.asarray(s_prime), axis=-1)

    def lipschitz_constant(self) -> float:
        return 1.0


@dataclasses.dataclass
class Mahalanobis(DistanceMetric):
    """‖S − S′‖ in the norm induced by Σ⁻¹, computed through the Cholesky factor of Σ."""

    covariance: np.ndarray

    def __post_init__(self):
        self.covariance = np.asarray(self.covariance, dtype=float)
        eigenvalues = np.linalg.eigvalsh(self.covariance)
        if eigenvalues.min() <= SPD_TOL * max(1.0, eigenvalues.max()):
            raise NumericalError(f"covariance is singular: lambda_min = {eigenvalues.min():.6g}")
        self._lambda_min = float(eigenvalues.min())
        self._chol = _cholesky(self.covariance)

    def __call__(self, s: np.ndarray, s_prime: np.ndarray) -> np.ndarray:
        diff = np.atleast_2d(np.asarray(s) - np.asarray(s_prime))
        # L⁻¹(s − s′) has Euclidean norm equal to the Mahalanobis norm of s − s′
        whitened = scipy.linalg.solve_triangular(self._chol, diff.T, lower=True)
        out = np.linalg.norm(whitened, axis=0)
        return out if np.ndim(s) > 1 or np.ndim(s_prime) > 1 else out[0]

    def lipschitz_constant(self) -> float:
        return 1.0 / math.sqrt(self._lambda_min)


def distance(pair: tuple[np.ndarray, np.ndarray], metric: DistanceMetric) -> np.ndarray:
    return metric(*pair)


@dataclasses.dataclass
class DilutionReport:
    d: int
    n_pairs: int
    metric: str
    seed: int
    H_S_theory: float
    H_D_hat: float
    eta_bar: float
    mean_D: float
    var_D: float
    rel_sd_D: float
    mean_D2: float
    var_D2: float
    mean_D2_theory: float | None
    var_D2_theory: float | None
    var_D_theory: float | None
    trace_per_dim: float
    lambda_max: float


def dilution_report(spec: GaussianSystemSpec, metric: DistanceMetric | None = None, k: int = 3) -> DilutionReport:
    """Distance moments and the efficiency bound Ĥ(D)/H(S) for one dimension."""
    if spec.n_pairs < MIN_REPORT_PAIRS:
        raise InputError(f"dilution reports need n_pairs >= {MIN_REPORT_PAIRS}, got {spec.n_pairs}")
    metric = metric or Euclidean()
    s, s_prime = sample_pairs(spec)
    dists = np.asarray(metric(s, s_prime))
    d2 = dists**2

    eigenvalues = spec.eigenvalues()
    h_s = entropy_of_gaussian(eigenvalues)
    if h_s <= 0:
        raise NumericalError(f"system entropy {h_s:.6g} nats is not positive; the efficiency ratio is undefined")
    h_d = kl_entropy(dists, k)
    iid_euclidean = spec.covariance is None and isinstance(metric, Euclidean)
    var = spec.sigma**2

    report = DilutionReport(
        d=spec.d,
        n_pairs=spec.n_pairs,
        metric=metric.name,
        seed=spec.seed,
        H_S_theory=h_s,
        H_D_hat=h_d,
        eta_bar=max(h_d, 0.0) / h_s,
        mean_D=float(dists.mean()),
        var_D=float(dists.var(ddof=1)),
        rel_sd_D=float(dists.std(ddof=1) / dists.mean()),
        mean_D2=float(d2.mean()),
        var_D2=float(d2.var(ddof=1)),
        mean_D2_theory=2 * spec.d * var if iid_euclidean else None,
        var_D2_theory=8 * spec.d * var**2 if iid_euclidean else None,
        var_D_theory=var if iid_euclidean else None,
        trace_per_dim=float(eigenvalues.sum() / spec.d),
        lambda_max=float(eigenvalues.max()),
    )
    logger.info("d=%d: H(S)=%.6g, H(D)=%.6g, eta_bar=%.6g", spec.d, h_s, h_d, report.eta_bar)
    return report


@dataclasses.dataclass
class SweepSystem:
    """How each sweep point builds its system: AR(1) correlation `rho` (0 gives σ²I) and a metric name."""

    metric: str = "euclidean"
    rho: float = 0.0

    def covariance(self, d: int, sigma: float) -> np.ndarray | None:
        return None if self.rho == 0 else toeplitz_covariance(d, self.rho, sigma)

    def build_metric(self, d: int, sigma: float) -> DistanceMetric:
        if self.metric == "euclidean":
            return Euclidean()
        if self.metric == "mahalanobis":
            cov = self.covariance(d, sigma)
            return Mahalanobis(sigma**2 * np.eye(d) if cov is None else cov)
        raise InputError(f"unknown metric {self.metric!r}")


def dilution_sweep(
    d_list: Sequence[int],
    template: GaussianSystemSpec,
    system: SweepSystem | None = None,
    k: int = 3,
    threads: int = 1,
) -> list[DilutionReport]:
    """One report per dimension, all with the template's seed, σ and pair count."""
    if len(d_list) == 0:
        raise InputError("dimension list is empty")
    if any(b <= a for a, b in zip(d_list, d_list[1:])):
        raise InputError(f"dimension list must be strictly ascending, got {list(d_list)}")
    system = system or SweepSystem()

    def one_point(d: int) -> DilutionReport:
        spec = dataclasses.replace(template, d=d, covariance=system.covariance(d, template.sigma))
        return dilution_report(spec, system.build_metric(d, template.sigma), k)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one_point, d_list))
    return [one_point(d) for d in d_list]


def lipschitz_check(spec: GaussianSystemSpec, metric: DistanceMetric, n_trials: int = 1000,
                    scale: float = 0.1) -> float:
    """Largest |D(S₁) − D(S₂)| − L·‖S₁ − S₂‖ over random perturbations S₂ = S₁ + δ; ≤ 0 when the bound holds."""
    s1, s_prime = sample_pairs(dataclasses.replace(spec, n_pairs=n_trials))
    rng = np.random.default_rng((spec.seed, 1))
    s2 = s1 + scale * rng.standard_normal(s1.shape)
    lhs = np.abs(np.asarray(metric(s1, s_prime)) - np.asarray(metric(s2, s_prime)))
    rhs = metric.lipschitz_constant() * np.linalg.norm(s1 - s2, axis=1)
    return float(np.max(lhs - rhs))
