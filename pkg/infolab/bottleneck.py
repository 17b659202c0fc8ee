"""Discrete information bottleneck.

Maximize I(f;Y) − λ·I(S;f) over stochastic encoders p(f|s) by iterating the self-consistent equations

    p(f|s) ∝ p(f) · exp(−D_KL(p(Y|s) ‖ p(Y|f)) / λ)
    p(f)   = Σ_s p(s) p(f|s)
    p(y|f) = Σ_s p(s,y) p(f|s) / p(f)

λ is the Lagrange multiplier on the compression term; β = 1/λ is the usual IB trade-off. λ = 0 is the deterministic
limit and is not supported.
"""
import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, xlogy

from infolab.errors import InputError, NumericalError
from infolab.mi_estimation import plugin_mi

logger = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-12
DPI_TOL = 1e-9
MAX_CARDINALITY = 64

Seed = int | Sequence[int]


@dataclasses.dataclass
class IBProblem:
    joint: np.ndarray
    cardinality_f: int
    lam: float
    budget_C: float | None = None

    def __post_init__(self):
        joint = np.asarray(self.joint, dtype=float)
        if joint.ndim != 2:
            raise InputError(f"joint must be a 2-D table, got shape {joint.shape}")
        if max(joint.shape) > MAX_CARDINALITY or self.cardinality_f > MAX_CARDINALITY:
            raise InputError(f"tables larger than {MAX_CARDINALITY} per axis are not supported")
        if np.any(joint < 0) or not np.all(np.isfinite(joint)):
            raise InputError("joint has negative or non-finite entries")
        if abs(joint.sum() - 1.0) > NORMALIZATION_TOL:
            raise InputError(f"joint sums to {joint.sum():.15g}, not 1")
        if self.cardinality_f < 1:
            raise InputError(f"cardinality_f must be >= 1, got {self.cardinality_f}")
        if self.lam < 0:
            raise InputError(f"lambda must be >= 0, got {self.lam}")
        if self.lam == 0:
            raise InputError("deterministic limit unsupported")
        self.joint = joint

    @property
    def p_s(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    @property
    def p_y_given_s(self) -> np.ndarray:
        p_s = self.p_s
        uniform = np.full(self.joint.shape[1], 1.0 / self.joint.shape[1])
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = self.joint / p_s[:, None]
        # Rows with p(s) = 0 never carry weight; any distribution will do
        return np.where(p_s[:, None] > 0, cond, uniform)

    @property
    def relevant_information(self) -> float:
        """I(S;Y), the ceiling on I(f;Y)."""
        return plugin_mi(self.joint)


@dataclasses.dataclass
class IBSolution:
    encoder: np.ndarray
    marginal_f: np.ndarray
    decoder: np.ndarray
    I_Sf: float
    I_fY: float
    residual: float
    iterations: int
    converged: bool
    lam: float
    within_budget: bool | None = None


@dataclasses.dataclass
class IBCurvePoint:
    lam: float
    beta: float
    I_Sf: float
    I_fY: float
    residual: float
    iterations: int


def binary_symmetric_joint(flip: float) -> np.ndarray:
    """p(s,y) for a uniform bit S sent through a binary symmetric channel with crossover `flip`."""
    return 0.5 * np.array([[1 - flip, flip], [flip, 1 - flip]])


def information_plane(joint: np.ndarray, encoder: np.ndarray) -> tuple[float, float]:
    """(I(S;f), I(f;Y)) for the Markov chain f ← S → Y."""
    p_s = joint.sum(axis=1)
    return plugin_mi(p_s[:, None] * encoder), plugin_mi(encoder.T @ joint)


def _marginal_and_decoder(problem: IBProblem, encoder: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    marginal = problem.p_s @ encoder
    joint_fy = encoder.T @ problem.joint
    p_y = problem.joint.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        decoder = joint_fy / marginal[:, None]
    decoder = np.where(marginal[:, None] > 0, decoder, p_y)
    return marginal, decoder


def _encoder_update(problem: IBProblem, marginal: np.ndarray, decoder: np.ndarray) -> np.ndarray:
    p_y_s = problem.p_y_given_s
    # D_KL(p(Y|s) ‖ p(Y|f)) for every (s, f); xlogy keeps 0·log 0 = 0
    with np.errstate(divide="ignore"):
        cross = xlogy(p_y_s[:, None, :], decoder[None, :, :]).sum(axis=2)
        kl = xlogy(p_y_s, p_y_s).sum(axis=1)[:, None] - cross
        log_unnorm = np.log(marginal)[None, :] - kl / problem.lam
    return np.exp(log_unnorm - logsumexp(log_unnorm, axis=1, keepdims=True))


def solve_ib(problem: IBProblem, max_iter: int = 5000, tol: float = 1e-10, seed: Seed = 0) -> IBSolution:
    """Iterate encoder, marginal and decoder updates from a seeded random encoder until the encoder stops moving."""
    if not tol > 0:
        raise InputError(f"tol must be > 0, got {tol}")
    rng = np.random.default_rng(seed)
    n_s = problem.joint.shape[0]
    encoder = rng.random((n_s, problem.cardinality_f)) + 1e-3
    encoder /= encoder.sum(axis=1, keepdims=True)

    marginal, decoder = _marginal_and_decoder(problem, encoder)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        new_encoder = _encoder_update(problem, marginal, decoder)
        if not np.all(np.isfinite(new_encoder)):
            raise NumericalError(f"encoder update produced non-finite values at iteration {iterations}")
        change = float(np.max(np.abs(new_encoder - encoder)))
        encoder = new_encoder
        marginal, decoder = _marginal_and_decoder(problem, encoder)
        if change < tol:
            converged = True
            break
    else:
        logger.info("IB solve (lambda=%g) hit max_iter=%d without converging", problem.lam, max_iter)

    residual = float(np.max(np.abs(_encoder_update(problem, marginal, decoder) - encoder)))
    i_sf, i_fy = information_plane(problem.joint, encoder)
    within_budget = None if problem.budget_C is None else i_sf <= problem.budget_C
    logger.debug("IB lambda=%g: I(S;f)=%.6g I(f;Y)=%.6g after %d iterations", problem.lam, i_sf, i_fy, iterations)
    return IBSolution(encoder, marginal, decoder, i_sf, i_fy, residual, iterations, converged, problem.lam, within_budget)


def _best(solutions: Sequence[IBSolution]) -> IBSolution:
    return max(solutions, key=lambda sol: (sol.I_fY, -sol.I_Sf))


def solve_ib_restarts(problem: IBProblem, restarts: int, max_iter: int = 5000, tol: float = 1e-10,
                      seed: int = 0) -> IBSolution:
    """Best fixed point (highest I(f;Y)) over seeded restarts."""
    if restarts < 1:
        raise InputError(f"need at least one restart, got {restarts}")
    return _best([solve_ib(problem, max_iter, tol, (seed, r)) for r in range(restarts)])


def ib_curve(
    problem: IBProblem,
    lambda_grid: Sequence[float],
    seeds_per_point: int = 5,
    max_iter: int = 5000,
    tol: float = 1e-10,
    seed: int = 0,
    threads: int = 1,
) -> list[IBCurvePoint]:
    """One point per λ: the best fixed point over `seeds_per_point` restarts."""
    if len(lambda_grid) == 0:
        raise InputError("lambda grid is empty")
    if any(not lam > 0 for lam in lambda_grid):
        raise InputError("every lambda on the grid must be > 0")

    def one_point(index: int) -> IBSolution:
        point_problem = dataclasses.replace(problem, lam=float(lambda_grid[index]))
        return _best([solve_ib(point_problem, max_iter, tol, (seed, index, r)) for r in range(seeds_per_point)])

    indices = range(len(lambda_grid))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            solutions = list(pool.map(one_point, indices))
    else:
        solutions = [one_point(i) for i in indices]

    return [IBCurvePoint(sol.lam, 1.0 / sol.lam, sol.I_Sf, sol.I_fY, sol.residual, sol.iterations) for sol in solutions]


def solve_ib_constrained(
    problem: IBProblem,
    lam_range: tuple[float, float] = (1e-3, 1e3),
    bisections: int = 40,
    restarts: int = 5,
    max_iter: int = 5000,
    tol: float = 1e-10,
    seed: int = 0,
) -> IBSolution:
    """max I(f;Y) subject to I(S;f) ≤ budget_C, by bisection on log λ.

    Larger λ compresses harder, so the smallest λ whose best fixed point fits the budget keeps the most relevant
    information.
    """
    if problem.budget_C is None:
        raise InputError("constrained solve needs budget_C")
    lo, hi = lam_range
    if not 0 < lo < hi:
        raise InputError(f"invalid lambda range {lam_range}")

    def at(lam: float) -> IBSolution:
        return solve_ib_restarts(dataclasses.replace(problem, lam=lam), restarts, max_iter, tol, seed)

    best = at(lo)
    if best.within_budget:
        return best
    upper = at(hi)
    if not upper.within_budget:
        raise NumericalError(f"no lambda in {lam_range} meets the budget {problem.budget_C} nats")
    best = upper
    for _ in range(bisections):
        mid = math.sqrt(lo * hi)
        sol = at(mid)
        if sol.within_budget:
            hi = mid
            if sol.I_fY >= best.I_fY:
                best = sol
        else:
            lo = mid
    logger.info("Constrained IB: lambda=%g, I(S;f)=%.6g <= C=%g", best.lam, best.I_Sf, problem.budget_C)
    return best


def check_dpi(solution: IBSolution, problem: IBProblem) -> bool:
    """I(f;Y) ≤ I(S;Y) and I(f;Y) ≤ I(S;f), both to 1e-9."""
    return solution.I_fY <= problem.relevant_information + DPI_TOL and solution.I_fY <= solution.I_Sf + DPI_TOL
