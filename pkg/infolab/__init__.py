from ._version import __version__
from .bottleneck import IBProblem, IBSolution, ib_curve, solve_ib, solve_ib_constrained
from .config_ops import config_diff, config_merge
from .dilution import DilutionReport, GaussianSystemSpec, dilution_report, dilution_sweep
from .errors import InfolabError, InputError, NumericalError
from .homology import PersistenceBarcode, persistent_mode_count, rank_filtration, threshold_matrix
from .ising import IsingSpec, IsingSweepRow, criticality_sweep, simulate, spin_mi_matrix
from .mi_estimation import (
    EstimatorConfig,
    MIMatrix,
    SampleMatrix,
    build_mi_matrix,
    estimate_entropy,
    estimate_mi,
    mi_weights,
)
from .serialize import from_dict, to_dict
from .spectral import (
    CapacityBudget,
    EmergenceVerdict,
    capacity_modes,
    emergence_check,
    randomized_effective_rank,
    spectral_summary,
)

__all__ = [
    "__version__",
    # bottleneck
    "IBProblem",
    "IBSolution",
    "ib_curve",
    "solve_ib",
    "solve_ib_constrained",
    # config_ops
    "config_diff",
    "config_merge",
    # dilution
    "DilutionReport",
    "GaussianSystemSpec",
    "dilution_report",
    "dilution_sweep",
    # errors
    "InfolabError",
    "InputError",
    "NumericalError",
    # homology
    "PersistenceBarcode",
    "persistent_mode_count",
    "rank_filtration",
    "threshold_matrix",
    # ising
    "IsingSpec",
    "IsingSweepRow",
    "criticality_sweep",
    "simulate",
    "spin_mi_matrix",
    # mi_estimation
    "EstimatorConfig",
    "MIMatrix",
    "SampleMatrix",
    "build_mi_matrix",
    "estimate_entropy",
    "estimate_mi",
    "mi_weights",
    # serialize
    "from_dict",
    "to_dict",
    # spectral
    "CapacityBudget",
    "EmergenceVerdict",
    "capacity_modes",
    "emergence_check",
    "randomized_effective_rank",
    "spectral_summary",
]
