"""Entropy and mutual-information estimation, and the pairwise mutual-information matrix.

All quantities are in nats. Bits only appear when a result is formatted for output (`MIMatrix.to_bits`).

Estimators:

- ``discrete_plugin``: exact Shannon quantities of the empirical frequency table.
- ``histogram``: plug-in on equal-width bins of continuous data, ``bins`` per axis.
- ``knn``: Kozachenko-Leonenko entropy and the Kraskov-Stoegbauer-Grassberger (KSG, first variant) MI estimator,
  both with neighbor order ``k`` under the max-norm.
- ``gaussian_closed_form``: Gaussian formulas on the sample (co)variance.
"""
import abc
import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Literal

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from infolab.errors import InputError, NumericalError

logger = logging.getLogger(__name__)

ColumnKind = Literal["continuous", "discrete"]
EstimatorMethod = Literal["histogram", "knn", "gaussian_closed_form", "discrete_plugin"]
DiagonalPolicy = Literal["self_entropy", "zero"]

MAX_DEFAULT_BINS = 64
SYMMETRY_TOL = 1e-12


def default_bins(n: int) -> int:
    """⌈n^(1/3)⌉ bins per axis, capped at 64."""
    return int(min(MAX_DEFAULT_BINS, max(2, math.ceil(n ** (1 / 3) - 1e-9))))


@dataclasses.dataclass(frozen=True)
class SampleMatrix:
    """n samples × d variables, each column tagged continuous or discrete."""

    data: np.ndarray
    kinds: tuple[ColumnKind, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2:
            raise InputError(f"sample data must be a 2-D array, got shape {data.shape}")
        object.__setattr__(self, "data", data)

        n, d = data.shape
        if n < 2:
            raise InputError(f"need at least 2 samples, got {n}")
        if d < 1:
            raise InputError("need at least 1 variable")
        if not np.all(np.isfinite(data)):
            raise InputError("sample data contains non-finite entries")

        kinds = tuple(self.kinds)
        if len(kinds) == 1 and d > 1:
            kinds = kinds * d
        if len(kinds) != d:
            raise InputError(f"{len(kinds)} column kinds given for {d} columns")
        for kind in kinds:
            if kind not in ("continuous", "discrete"):
                raise InputError(f"unknown column kind {kind!r}")
        object.__setattr__(self, "kinds", kinds)

        names = tuple(self.names) or tuple(f"X{i + 1}" for i in range(d))
        if len(names) != d:
            raise InputError(f"{len(names)} column names given for {d} columns")
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    @property
    def all_discrete(self) -> bool:
        return all(k == "discrete" for k in self.kinds)

    def column(self, i: int) -> np.ndarray:
        return self.data[:, i]


@dataclasses.dataclass
class EstimatorConfig:
    """Which estimator to use. `method=None` picks discrete_plugin for discrete columns and knn otherwise."""

    method: EstimatorMethod | None = None
    bins: int | None = None
    k: int = 3
    log_base: Literal["nats", "bits"] = "nats"

    def __post_init__(self):
        if self.method not in (None, "histogram", "knn", "gaussian_closed_form", "discrete_plugin"):
            raise InputError(f"unknown estimator method {self.method!r}")
        if self.bins is not None and self.bins < 2:
            raise InputError(f"histogram needs bins >= 2, got {self.bins}")
        if self.k < 1:
            raise InputError(f"knn needs k >= 1, got {self.k}")
        if self.log_base not in ("nats", "bits"):
            raise InputError(f"unknown log base {self.log_base!r}")

    def resolve(self, kind: ColumnKind) -> EstimatorMethod:
        if self.method is not None:
            return self.method
        return "discrete_plugin" if kind == "discrete" else "knn"


def _check_method_kind(method: EstimatorMethod, kind: ColumnKind) -> None:
    if method == "discrete_plugin" and kind != "discrete":
        raise InputError("discrete_plugin needs discrete columns")
    if method != "discrete_plugin" and kind == "discrete":
        raise InputError(f"{method} needs continuous columns")


# Plug-in quantities on explicit tables. Also used by the bottleneck solver and the Ising harness.


def shannon_entropy(p: np.ndarray) -> float:
    """Entropy in nats of a probability vector or table (any shape); unnormalized counts are normalized first."""
    p = np.asarray(p, dtype=float).ravel()
    total = p.sum()
    if total <= 0:
        return 0.0
    p = p[p > 0] / total
    return float(-np.sum(p * np.log(p)))


def plugin_mi(joint: np.ndarray) -> float:
    """Σ p log(p / (p_x p_y)) over a 2-D joint table of probabilities or counts."""
    joint = np.asarray(joint, dtype=float)
    total = joint.sum()
    if total <= 0:
        return 0.0
    rows, cols = joint.sum(axis=1), joint.sum(axis=0)
    i, j = np.nonzero(joint)
    cell = joint[i, j]
    terms = (cell / total) * np.log(cell * total / (rows[i] * cols[j]))
    # Sorted so that a table and its transpose sum to the same float
    return float(np.sort(terms).sum())


def joint_counts(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Contingency table of two discrete columns; rows and columns follow the sorted distinct values."""
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    table = np.zeros((xi.max() + 1, yi.max() + 1))
    np.add.at(table, (xi, yi), 1.0)
    return table


def _bin_index(col: np.ndarray, bins: int) -> np.ndarray:
    lo, hi = col.min(), col.max()
    if hi == lo:
        return np.zeros(col.shape[0], dtype=int)
    edges = np.linspace(lo, hi, bins + 1)
    return np.clip(np.searchsorted(edges, col, side="right") - 1, 0, bins - 1)


# k-NN estimators


def _as_points(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def kl_entropy(x: np.ndarray, k: int = 3) -> float:
    """Kozachenko-Leonenko differential entropy under the max-norm: ψ(n) − ψ(k) + d·E[log 2ε_k]."""
    points = _as_points(x)
    n, d = points.shape
    if k >= n:
        raise InputError(f"knn needs k < n, got k={k}, n={n}")
    dist, _ = cKDTree(points).query(points, k=k + 1, p=np.inf)
    eps = dist[:, k]
    if np.any(eps <= 0):
        # Repeated values; the k-th neighbor must be at positive distance for log(ε) to exist
        positive = eps[eps > 0]
        if positive.size == 0:
            raise NumericalError("degenerate variance")
        eps = np.where(eps > 0, eps, positive.min())
        logger.debug("kl_entropy: %d samples with tied k-th neighbors", int(np.sum(dist[:, k] <= 0)))
    return float(digamma(n) - digamma(k) + d * np.mean(np.log(2 * eps)))


def ksg_mi(x: np.ndarray, y: np.ndarray, k: int = 3) -> float:
    """KSG estimator (first algorithm): ψ(k) + ψ(n) − ⟨ψ(n_x + 1) + ψ(n_y + 1)⟩."""
    xp, yp = _as_points(x), _as_points(y)
    n = xp.shape[0]
    if n < k + 1:
        raise InputError(f"knn needs n >= k+1, got n={n}, k={k}")
    joint = np.hstack([xp, yp])
    dist, _ = cKDTree(joint).query(joint, k=k + 1, p=np.inf)
    radius = np.nextafter(dist[:, k], 0)
    nx = cKDTree(xp).query_ball_point(xp, radius, p=np.inf, return_length=True) - 1
    ny = cKDTree(yp).query_ball_point(yp, radius, p=np.inf, return_length=True) - 1
    return float(digamma(k) + digamma(n) - np.mean(digamma(nx + 1) + digamma(ny + 1)))


# Public operations


def estimate_entropy(col: np.ndarray, cfg: EstimatorConfig, kind: ColumnKind | None = None) -> float:
    """Entropy of one sample column in nats.

    `kind` defaults to discrete for `discrete_plugin` and continuous otherwise.
    """
    col = np.asarray(col, dtype=float).ravel()
    if col.shape[0] < 2:
        raise InputError(f"need at least 2 samples, got {col.shape[0]}")
    method = cfg.method or ("discrete_plugin" if kind == "discrete" else "knn")
    if kind is not None:
        _check_method_kind(method, kind)

    if method == "discrete_plugin":
        _, counts = np.unique(col, return_counts=True)
        return shannon_entropy(counts)

    if np.var(col) == 0:
        raise NumericalError("degenerate variance")
    if method == "gaussian_closed_form":
        return 0.5 * math.log(2 * math.pi * math.e * np.var(col, ddof=1))
    if method == "knn":
        return kl_entropy(col, cfg.k)
    if method == "histogram":
        bins = cfg.bins or default_bins(col.shape[0])
        counts = np.bincount(_bin_index(col, bins), minlength=bins)
        width = (col.max() - col.min()) / bins
        return shannon_entropy(counts) + math.log(width)
    raise InputError(f"unknown estimator method {method!r}")  # pragma: no cover


def _raw_mi(x: np.ndarray, y: np.ndarray, method: EstimatorMethod, cfg: EstimatorConfig) -> float:
    if method == "discrete_plugin":
        return plugin_mi(joint_counts(x, y))
    if method == "histogram":
        bins = cfg.bins or default_bins(x.shape[0])
        table = np.zeros((bins, bins))
        np.add.at(table, (_bin_index(x, bins), _bin_index(y, bins)), 1.0)
        return plugin_mi(table)
    if method == "knn":
        return ksg_mi(x, y, cfg.k)
    if method == "gaussian_closed_form":
        if np.var(x) == 0 or np.var(y) == 0:
            return 0.0
        rho = float(np.corrcoef(x, y)[0, 1])
        rho = min(abs(rho), 1 - 1e-15)
        return -0.5 * math.log(1 - rho * rho)
    raise InputError(f"unknown estimator method {method!r}")  # pragma: no cover


def estimate_mi(
    x: np.ndarray,
    y: np.ndarray,
    cfg: EstimatorConfig,
    kinds: tuple[ColumnKind, ColumnKind] | None = None,
) -> float:
    """Pairwise mutual information in nats, clamped at 0."""
    mi, _ = _estimate_mi_clamped(x, y, cfg, kinds)
    return mi


def _estimate_mi_clamped(x, y, cfg, kinds) -> tuple[float, bool]:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != y.shape[0]:
        raise InputError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if kinds is None:
        kind_x = kind_y = "discrete" if cfg.method == "discrete_plugin" else "continuous"
    else:
        kind_x, kind_y = kinds
    method_x, method_y = cfg.resolve(kind_x), cfg.resolve(kind_y)
    if method_x != method_y:
        raise InputError(f"columns of kinds {kind_x} and {kind_y} need a common estimator method")
    _check_method_kind(method_x, kind_x)
    _check_method_kind(method_y, kind_y)
    if method_x == "knn" and x.shape[0] < cfg.k + 1:
        raise InputError(f"knn needs n >= k+1, got n={x.shape[0]}, k={cfg.k}")

    raw = _raw_mi(x, y, method_x, cfg)
    if raw < 0:
        return 0.0, True
    return raw, False


@dataclasses.dataclass
class MIMatrix:
    """Symmetric d×d matrix of pairwise mutual informations, in nats."""

    values: np.ndarray
    diagonal_policy: DiagonalPolicy
    estimator: EstimatorConfig
    names: list[str] = dataclasses.field(default_factory=list)
    clamped: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise InputError(f"MI matrix must be square, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InputError("MI matrix has non-finite entries")
        if np.max(np.abs(values - values.T), initial=0.0) > SYMMETRY_TOL:
            raise InputError("MI matrix is not symmetric")
        self.values = values

    @property
    def d(self) -> int:
        return self.values.shape[0]

    def to_bits(self) -> np.ndarray:
        return self.values / math.log(2)


def build_mi_matrix(s: SampleMatrix, cfg: EstimatorConfig, *, diagonal_policy: DiagonalPolicy | None = None,
                    threads: int = 1) -> MIMatrix:
    """Estimate all d(d−1)/2 pairs and mirror them.

    The diagonal is I_ii = H(X_i) under `self_entropy` (only meaningful for discrete columns) and 0 under `zero`.
    The default policy is `self_entropy` for all-discrete samples and `zero` otherwise.
    """
    if diagonal_policy is None:
        diagonal_policy = "self_entropy" if s.all_discrete else "zero"
    if diagonal_policy == "self_entropy" and not s.all_discrete:
        raise InputError("self-MI undefined for continuous columns")
    if diagonal_policy not in ("self_entropy", "zero"):
        raise InputError(f"unknown diagonal policy {diagonal_policy!r}")

    d = s.d
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]

    def one_pair(ij: tuple[int, int]) -> tuple[float, bool]:
        i, j = ij
        return _estimate_mi_clamped(s.column(i), s.column(j), cfg, (s.kinds[i], s.kinds[j]))

    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_pair, pairs))
    else:
        results = [one_pair(ij) for ij in pairs]

    values = np.zeros((d, d))
    clamped = 0
    for (i, j), (mi, was_clamped) in zip(pairs, results):
        values[i, j] = values[j, i] = mi
        clamped += was_clamped
    if diagonal_policy == "self_entropy":
        for i in range(d):
            values[i, i] = estimate_entropy(s.column(i), cfg, s.kinds[i])

    if clamped:
        logger.info("Clamped %d negative MI estimates to 0", clamped)
    logger.info("Built %dx%d MI matrix (%s diagonal)", d, d, diagonal_policy)
    return MIMatrix(values, diagonal_policy, cfg, list(s.names), clamped)


# Weights w_ij = Φ(I_ij)


@dataclasses.dataclass
class WeightTransform(abc.ABC):
    """Elementwise map Φ applied to off-diagonal MI entries."""

    @abc.abstractmethod
    def __call__(self, off_diagonal: np.ndarray) -> np.ndarray:
        ...

    @property
    def transform_id(self) -> str:
        return type(self).__name__


@dataclasses.dataclass
class Identity(WeightTransform):
    def __call__(self, off_diagonal: np.ndarray) -> np.ndarray:
        return off_diagonal


@dataclasses.dataclass
class ExpScale(WeightTransform):
    """exp(α·I)."""

    alpha: float = 1.0

    def __call__(self, off_diagonal: np.ndarray) -> np.ndarray:
        return np.exp(self.alpha * off_diagonal)

    @property
    def transform_id(self) -> str:
        return f"exp_scale({self.alpha:g})"


@dataclasses.dataclass
class NormalizeMax(WeightTransform):
    def __call__(self, off_diagonal: np.ndarray) -> np.ndarray:
        top = off_diagonal.max(initial=0.0)
        if top <= 0:
            raise NumericalError("no dependence structure")
        return off_diagonal / top


@dataclasses.dataclass
class WeightMatrix:
    values: np.ndarray
    transform_id: str
    names: list[str] = dataclasses.field(default_factory=list)


def mi_weights(m: MIMatrix, transform: WeightTransform) -> WeightMatrix:
    d = m.d
    off = ~np.eye(d, dtype=bool)
    values = np.zeros((d, d))
    if d > 1:
        values[off] = transform(m.values[off])
    elif isinstance(transform, NormalizeMax):
        raise NumericalError("no dependence structure")
    return WeightMatrix(values, transform.transform_id, list(m.names))


def column_entropies(s: SampleMatrix, cfg: EstimatorConfig) -> list[float]:
    return [estimate_entropy(s.column(i), cfg, s.kinds[i]) for i in range(s.d)]

