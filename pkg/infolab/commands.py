"""Run configurations and pipelines for every subcommand.

Each subcommand has a dataclass of options (its defaults are the documented defaults) and a function that runs the
pipeline and writes its output. Field names double as flag names: `--burn-in 500` sets `burn_in`.
"""
import dataclasses
import math
import os
from pathlib import Path
from typing import Any, Callable, Literal, Mapping

import numpy as np
import pandas as pd

from infolab._version import __version__
from infolab.bottleneck import (
    IBProblem,
    binary_symmetric_joint,
    check_dpi,
    ib_curve,
    solve_ib_constrained,
    solve_ib_restarts,
)
from infolab.config_ops import config_diff
from infolab.dilution import GaussianSystemSpec, SweepSystem, dilution_sweep
from infolab.errors import InputError
from infolab.homology import persistent_mode_count, rank_filtration
from infolab.io import (
    STDOUT,
    read_ib_problem,
    read_kinds_file,
    read_matrix,
    read_samples,
    write_csv,
    write_json,
    write_matrix,
)
from infolab.ising import IsingSpec, criticality_sweep
from infolab.mi_estimation import (
    DiagonalPolicy,
    EstimatorConfig,
    MIMatrix,
    SampleMatrix,
    WeightTransform,
    build_mi_matrix,
    mi_weights,
)
from infolab.serialize import to_dict
from infolab.spectral import (
    DEFAULT_RANK_REL_TOL,
    CapacityBudget,
    capacity_modes,
    emergence_check,
    randomized_effective_rank,
    spectral_summary,
)

OUT_DIR_ENV = "INFOLAB_OUT_DIR"


@dataclasses.dataclass
class CommonConfig:
    seed: int = 0
    threads: int | None = None
    out: str | None = None
    verbose: bool = False


@dataclasses.dataclass
class SamplesConfig(CommonConfig):
    input: str | None = None
    kinds: str = "continuous"
    kinds_file: str | None = None
    estimator: EstimatorConfig = dataclasses.field(default_factory=EstimatorConfig)
    diagonal_policy: DiagonalPolicy | None = None


@dataclasses.dataclass
class MatrixSourceConfig(SamplesConfig):
    """Either `input` samples (the MI matrix is estimated) or `matrix`, a CSV written by `mi-matrix`."""

    matrix: str | None = None
    rank_rel_tol: float = DEFAULT_RANK_REL_TOL


@dataclasses.dataclass
class MIMatrixConfig(SamplesConfig):
    transform: WeightTransform | None = None
    weights_out: str | None = None


@dataclasses.dataclass
class ErankConfig(MatrixSourceConfig):
    randomized: bool = False
    rank: int = 5
    oversample: int = 10
    power_iters: int = 0


@dataclasses.dataclass
class CapacityConfig(MatrixSourceConfig):
    capacity: float | None = None
    k: int | None = None


@dataclasses.dataclass
class EmergenceConfig(SamplesConfig):
    capacity: float | None = None
    k: int | None = None
    epsilon: float = 0.01
    theta: float | None = None
    rank_rel_tol: float = DEFAULT_RANK_REL_TOL


@dataclasses.dataclass
class IBConfig(CommonConfig):
    """The problem comes from `input` (JSON/YAML) or from `flip`, a binary symmetric channel.

    `cardinality_f`, `lam` and `budget_C` override the values in the problem file when set.
    """

    input: str | None = None
    flip: float | None = None
    cardinality_f: int | None = None
    lam: float | None = None
    budget_C: float | None = None
    lambdas: list[float] = dataclasses.field(default_factory=list)
    constrained: bool = False
    restarts: int = 5
    max_iter: int = 5000
    tol: float = 1e-10


@dataclasses.dataclass
class DilutionConfig(CommonConfig):
    dims: list[int] = dataclasses.field(default_factory=lambda: [8, 16, 32, 64])
    sigma: float = 1.0
    pairs: int = 10000
    rho: float = 0.0
    metric: Literal["euclidean", "mahalanobis"] = "euclidean"
    k: int = 3


@dataclasses.dataclass
class IsingConfig(CommonConfig):
    L: int = 16
    temps: list[float] = dataclasses.field(default_factory=lambda: [1.5, 2.0, 2.27, 2.5, 3.5])
    sweeps: int = 20000
    burn_in: int = 1000
    thin: int = 10
    site_subsample: int | None = None
    budget_C: float | None = None
    rank_rel_tol: float = DEFAULT_RANK_REL_TOL
    matrices_out: str | None = None


@dataclasses.dataclass
class HomologyConfig(MatrixSourceConfig):
    min_persistence: float = 0.0
    capacity: float | None = None


# Helpers shared by the pipelines


def threads_of(cfg: CommonConfig) -> int:
    return cfg.threads or os.cpu_count() or 1


def output_path(cfg: CommonConfig, default_name: str) -> str | Path:
    """`--out`, or `default_name`; bare file names land in $INFOLAB_OUT_DIR when it is set."""
    out = cfg.out or default_name
    if out == STDOUT:
        return out
    path = Path(out)
    out_dir = os.environ.get(OUT_DIR_ENV)
    if out_dir and not path.is_absolute() and path.parent == Path("."):
        path = Path(out_dir) / path
    return path


def _sibling(path: str | Path, suffix: str) -> str | Path:
    if str(path) == STDOUT:
        return path
    path = Path(path)
    return path.with_name(f"{path.stem}_{suffix}.csv")


def make_header(name: str, cfg: CommonConfig) -> dict[str, Any]:
    resolved = to_dict(cfg)
    defaults = to_dict(type(cfg)())
    return {
        "tool": f"infolab {__version__}",
        "subcommand": name,
        "seed": cfg.seed,
        "config": resolved,
        "overrides": config_diff(defaults, resolved),
    }


def load_samples(cfg: SamplesConfig) -> SampleMatrix:
    if cfg.input is None:
        raise InputError("no samples file given (use --in PATH)")
    kinds = read_kinds_file(cfg.kinds_file) if cfg.kinds_file else cfg.kinds
    return read_samples(cfg.input, kinds)


def estimate_matrix(cfg: SamplesConfig, samples: SampleMatrix | None = None) -> MIMatrix:
    samples = samples if samples is not None else load_samples(cfg)
    return build_mi_matrix(samples, cfg.estimator, diagonal_policy=cfg.diagonal_policy, threads=threads_of(cfg))


def load_matrix(cfg: MatrixSourceConfig) -> tuple[MIMatrix | np.ndarray, list[str], str | None]:
    """The MI matrix in nats, its variable names and its diagonal policy (None when unknown)."""
    if cfg.matrix is None:
        m = estimate_matrix(cfg)
        return m, m.names, m.diagonal_policy
    values, names, header = read_matrix(cfg.matrix)
    if header.get("units") == "bits":
        values = values * math.log(2)
    return values, names, header.get("diagonal_policy")


# Pipelines


def run_mi_matrix(cfg: MIMatrixConfig, header: dict[str, Any]) -> None:
    m = estimate_matrix(cfg)
    out = output_path(cfg, "mi_matrix.csv")
    bits = cfg.estimator.log_base == "bits"
    values = m.to_bits() if bits else m.values
    meta = {"diagonal_policy": m.diagonal_policy, "units": "bits" if bits else "nats", "clamped": m.clamped}
    if str(out).endswith(".json"):
        payload = {"values": values.tolist(), "names": m.names, "estimator": to_dict(m.estimator), **meta}
        write_json(out, payload, header)
    else:
        write_matrix(out, values, m.names, {**header, **meta})
    if cfg.transform is not None:
        w = mi_weights(m, cfg.transform)
        weights_out = cfg.weights_out or _sibling(out, "weights")
        write_matrix(weights_out, w.values, w.names, {**header, "transform": w.transform_id})


def run_erank(cfg: ErankConfig, header: dict[str, Any]) -> None:
    m, names, policy = load_matrix(cfg)
    if cfg.randomized:
        sketch = min(len(names), cfg.rank + cfg.oversample)
        summary = randomized_effective_rank(m, sketch, cfg.seed, cfg.power_iters, cfg.rank_rel_tol)
        extra = {"randomized": True, "sketch_size": sketch}
    else:
        summary = spectral_summary(m, cfg.rank_rel_tol)
        extra = {"randomized": False}

    out = output_path(cfg, "erank.json")
    if str(out).endswith(".csv"):
        frame = pd.DataFrame(
            {"index": np.arange(1, summary.numerical_rank + 1), "sigma": summary.singular_values, "p": summary.weights}
        )
        scalars = {"effective_rank": summary.effective_rank, "numerical_rank": summary.numerical_rank}
        write_csv(out, frame, {**header, **scalars, "rank_tolerance": summary.rank_tolerance, **extra})
    else:
        write_json(out, {**to_dict(summary), **extra, "diagonal_policy": policy}, header)


def run_capacity(cfg: CapacityConfig, header: dict[str, Any]) -> None:
    if cfg.capacity is None:
        raise InputError("no capacity given (use --capacity C)")
    m, _, policy = load_matrix(cfg)
    summary = spectral_summary(m, cfg.rank_rel_tol)
    modes = capacity_modes(summary.singular_values, CapacityBudget(cfg.capacity, cfg.k))
    payload = {
        "C": cfg.capacity,
        "k": cfg.k,
        "capacity_modes": modes,
        "effective_rank": summary.effective_rank,
        "numerical_rank": summary.numerical_rank,
        "exceeds_capacity": summary.effective_rank > modes,
        "singular_values": summary.singular_values.tolist(),
        "diagonal_policy": policy,
    }
    write_json(output_path(cfg, "capacity.json"), payload, header)


def run_emergence(cfg: EmergenceConfig, header: dict[str, Any]) -> None:
    if cfg.capacity is None:
        raise InputError("no capacity given (use --capacity C)")
    samples = load_samples(cfg)
    m = estimate_matrix(cfg, samples)
    verdict = emergence_check(samples, m, CapacityBudget(cfg.capacity, cfg.k), cfg.epsilon, cfg.theta, cfg.rank_rel_tol)
    write_json(output_path(cfg, "emergence.json"), {**to_dict(verdict), "variables": list(samples.names)}, header)


def _ib_problem(cfg: IBConfig) -> IBProblem:
    if cfg.input is not None and cfg.flip is not None:
        raise InputError("give either a problem file or --flip, not both")
    if cfg.input is not None:
        base = read_ib_problem(cfg.input)
    elif cfg.flip is not None:
        if not 0 <= cfg.flip <= 1:
            raise InputError(f"flip probability must lie in [0, 1], got {cfg.flip}")
        base = IBProblem(binary_symmetric_joint(cfg.flip), 2, 1.0)
    else:
        raise InputError("no problem given (use --in PATH or --flip P)")
    return IBProblem(
        base.joint,
        cfg.cardinality_f if cfg.cardinality_f is not None else base.cardinality_f,
        cfg.lam if cfg.lam is not None else base.lam,
        cfg.budget_C if cfg.budget_C is not None else base.budget_C,
    )


def run_ib(cfg: IBConfig, header: dict[str, Any]) -> None:
    problem = _ib_problem(cfg)
    header = {**header, "I_SY": problem.relevant_information}
    if cfg.lambdas:
        points = ib_curve(problem, cfg.lambdas, cfg.restarts, cfg.max_iter, cfg.tol, cfg.seed, threads_of(cfg))
        frame = pd.DataFrame([dataclasses.asdict(p) for p in points]).rename(columns={"lam": "lambda"})
        write_csv(output_path(cfg, "ib_curve.csv"), frame, header)
        return
    if cfg.constrained:
        solution = solve_ib_constrained(problem, restarts=cfg.restarts, max_iter=cfg.max_iter, tol=cfg.tol, seed=cfg.seed)
    else:
        solution = solve_ib_restarts(problem, cfg.restarts, cfg.max_iter, cfg.tol, cfg.seed)
    payload = to_dict(solution)
    payload["lambda"] = payload.pop("lam")
    payload.update(beta=1.0 / solution.lam, dpi_holds=check_dpi(solution, problem))
    write_json(output_path(cfg, "ib.json"), payload, header)


def run_dilution(cfg: DilutionConfig, header: dict[str, Any]) -> None:
    template = GaussianSystemSpec(d=cfg.dims[0] if cfg.dims else 1, sigma=cfg.sigma, n_pairs=cfg.pairs, seed=cfg.seed)
    reports = dilution_sweep(cfg.dims, template, SweepSystem(cfg.metric, cfg.rho), cfg.k, threads_of(cfg))
    frame = pd.DataFrame([dataclasses.asdict(r) for r in reports])
    frame.insert(frame.columns.get_loc("eta_bar") + 1, "d_times_eta_bar", frame["d"] * frame["eta_bar"])
    write_csv(output_path(cfg, "dilution.csv"), frame, header)


def run_ising(cfg: IsingConfig, header: dict[str, Any]) -> None:
    spec = IsingSpec(
        L=cfg.L,
        T_list=list(cfg.temps),
        sweeps=cfg.sweeps,
        burn_in=cfg.burn_in,
        thin=cfg.thin,
        seed=cfg.seed,
        site_subsample=cfg.site_subsample,
        budget_C=cfg.budget_C,
        rank_rel_tol=cfg.rank_rel_tol,
    )

    def dump(T: float, m: MIMatrix) -> None:
        path = Path(cfg.matrices_out) / f"mi_T{T:g}.csv"  # type: ignore[arg-type]
        write_matrix(path, m.values, m.names, {**header, "T": T, "diagonal_policy": m.diagonal_policy, "units": "nats"})

    rows = criticality_sweep(spec, threads_of(cfg), dump if cfg.matrices_out else None)
    frame = pd.DataFrame([dataclasses.asdict(r) for r in rows])
    if cfg.budget_C is None:
        frame = frame.drop(columns=["capacity_modes", "exceeds_capacity"])
    write_csv(output_path(cfg, "ising.csv"), frame, header)


def run_homology(cfg: HomologyConfig, header: dict[str, Any]) -> None:
    m, _, policy = load_matrix(cfg)
    barcode = rank_filtration(m, cfg.rank_rel_tol, threads_of(cfg))
    barcode.diagonal_policy = policy
    persistent = persistent_mode_count(barcode, cfg.min_persistence)
    summary: dict[str, Any] = {"persistent_modes": persistent, "diagonal_policy": policy}
    if cfg.capacity is not None:
        modes = capacity_modes(spectral_summary(m, cfg.rank_rel_tol).singular_values, CapacityBudget(cfg.capacity))
        summary.update(capacity_modes=modes, exceeds_capacity=persistent > modes)

    out = output_path(cfg, "barcode.csv")
    if str(out).endswith(".json"):
        payload = {
            "intervals": [dataclasses.asdict(iv) for iv in barcode.intervals],
            "grid": barcode.epsilon_grid,
            "ranks": barcode.ranks,
            "rank_tolerance": barcode.rank_tolerance,
            **summary,
        }
        write_json(out, payload, header)
    else:
        rows = [dataclasses.asdict(iv) for iv in barcode.intervals]
        frame = pd.DataFrame(rows, columns=["level", "birth", "death", "contiguous"])
        write_csv(out, frame, {**header, **summary, "grid": barcode.epsilon_grid, "rank_tolerance": barcode.rank_tolerance})


@dataclasses.dataclass(frozen=True)
class Subcommand:
    config: type[CommonConfig]
    run: Callable[[Any, dict[str, Any]], None]
    summary: str
    aliases: Mapping[str, Mapping[str, str]] = dataclasses.field(default_factory=dict)


TRANSFORM_ALIASES = {
    "identity": "infolab.mi_estimation:Identity",
    "exp_scale": "infolab.mi_estimation:ExpScale",
    "normalize_max": "infolab.mi_estimation:NormalizeMax",
}

SUBCOMMANDS: dict[str, Subcommand] = {
    "mi-matrix": Subcommand(MIMatrixConfig, run_mi_matrix, "pairwise MI matrix (and weights) from a samples CSV",
                            {"transform": TRANSFORM_ALIASES}),
    "erank": Subcommand(ErankConfig, run_erank, "effective rank C(S) of an MI matrix, exact or randomized"),
    "capacity": Subcommand(CapacityConfig, run_capacity, "spectral modes C' affordable under a budget C"),
    "emergence": Subcommand(EmergenceConfig, run_emergence, "emergence verdict and new-feature direction"),
    "ib": Subcommand(IBConfig, run_ib, "information bottleneck solution or curve"),
    "dilution": Subcommand(DilutionConfig, run_dilution, "distance concentration sweep over dimensions"),
    "ising": Subcommand(IsingConfig, run_ising, "Ising criticality sweep of the spin MI effective rank"),
    "homology": Subcommand(HomologyConfig, run_homology, "rank filtration barcode of an MI matrix"),
}
