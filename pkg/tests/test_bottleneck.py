import itertools
import math

import numpy as np
import pytest

from infolab.bottleneck import (
    IBCurvePoint,
    IBProblem,
    IBSolution,
    binary_symmetric_joint,
    check_dpi,
    ib_curve,
    information_plane,
    solve_ib,
    solve_ib_constrained,
    solve_ib_restarts,
)
from infolab.errors import InputError, NumericalError

BSC_RELEVANT = math.log(2) - (-(0.1 * math.log(0.1) + 0.9 * math.log(0.9)))


def _bsc(lam: float, cardinality_f: int = 2, budget_C: float | None = None) -> IBProblem:
    return IBProblem(binary_symmetric_joint(0.1), cardinality_f, lam, budget_C)


def test_problem_validation():
    with pytest.raises(InputError, match="deterministic limit unsupported"):
        _bsc(0.0)
    with pytest.raises(InputError, match="lambda must be >= 0"):
        _bsc(-1.0)
    with pytest.raises(InputError, match="not 1"):
        IBProblem(np.array([[0.5, 0.2], [0.1, 0.1]]), 2, 1.0)
    with pytest.raises(InputError, match="negative"):
        IBProblem(np.array([[0.6, -0.1], [0.25, 0.25]]), 2, 1.0)
    with pytest.raises(InputError, match="cardinality_f must be >= 1"):
        _bsc(1.0, cardinality_f=0)
    with pytest.raises(InputError, match="larger than 64"):
        _bsc(1.0, cardinality_f=65)


def test_relevant_information_of_binary_symmetric_channel():
    assert _bsc(1.0).relevant_information == pytest.approx(0.3681, abs=1e-4)


def test_unreachable_rows_get_a_uniform_conditional():
    problem = IBProblem(np.array([[0.25, 0.75], [0.0, 0.0]]), 2, 1.0)
    np.testing.assert_allclose(problem.p_y_given_s, [[0.25, 0.75], [0.5, 0.5]])


def test_independent_source_carries_nothing():
    joint = np.outer([0.3, 0.7], [0.4, 0.6])
    sol = solve_ib(IBProblem(joint, 2, 0.5), seed=3)
    assert sol.I_fY == pytest.approx(0.0, abs=1e-9)
    assert sol.I_Sf == pytest.approx(0.0, abs=1e-6)


def test_single_feature_value():
    sol = solve_ib(_bsc(0.2, cardinality_f=1))
    np.testing.assert_array_equal(sol.encoder, np.ones((2, 1)))
    assert (sol.I_Sf, sol.I_fY) == (0.0, 0.0)


def test_weak_compression_recovers_relevant_information():
    sol = solve_ib_restarts(_bsc(0.01), restarts=5)
    assert sol.converged
    assert sol.I_fY == pytest.approx(BSC_RELEVANT, abs=1e-3)
    assert sol.I_Sf == pytest.approx(math.log(2), abs=1e-3)


def test_strong_compression_collapses_to_trivial_encoder():
    sol = solve_ib_restarts(_bsc(5.0), restarts=3)
    assert sol.I_Sf == pytest.approx(0.0, abs=1e-6)
    assert sol.I_fY == pytest.approx(0.0, abs=1e-6)


def test_solution_is_a_fixed_point():
    sol = solve_ib(_bsc(0.2), seed=1)
    assert sol.converged
    assert sol.residual < 1e-6
    np.testing.assert_allclose(sol.encoder.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(sol.marginal_f.sum(), 1.0, atol=1e-12)


def test_seeded_solve_is_deterministic():
    a = solve_ib(_bsc(0.3), seed=(4, 2))
    b = solve_ib(_bsc(0.3), seed=(4, 2))
    np.testing.assert_array_equal(a.encoder, b.encoder)
    assert a.iterations == b.iterations


def test_data_processing_inequality():
    rng = np.random.default_rng(0)
    for trial in range(10):
        joint = rng.random((4, 3))
        joint /= joint.sum()
        problem = IBProblem(joint, 3, float(rng.uniform(0.05, 2.0)))
        sol = solve_ib(problem, max_iter=500, seed=trial)
        assert check_dpi(sol, problem)


def test_dpi_check_catches_violations():
    problem = _bsc(0.2)
    bogus = IBSolution(np.eye(2), np.full(2, 0.5), np.eye(2), I_Sf=0.1, I_fY=0.3, residual=0.0, iterations=1,
                       converged=True, lam=0.2)
    assert not check_dpi(bogus, problem)
    bogus.I_fY = problem.relevant_information + 0.01
    bogus.I_Sf = 1.0
    assert not check_dpi(bogus, problem)


def test_matches_grid_search_on_two_by_two():
    lam = 0.2
    problem = _bsc(lam)
    sol = solve_ib_restarts(problem, restarts=5)
    best = -np.inf
    for a, b in itertools.product(np.linspace(0, 1, 51), repeat=2):
        encoder = np.array([[a, 1 - a], [b, 1 - b]])
        i_sf, i_fy = information_plane(problem.joint, encoder)
        best = max(best, i_fy - lam * i_sf)
    assert sol.I_fY - lam * sol.I_Sf >= best - 1e-3


def test_curve_is_monotone():
    grid = [0.05, 0.1, 0.2, 0.3, 1.0, 2.0, 5.0]
    curve = ib_curve(_bsc(1.0), grid, seeds_per_point=3)
    assert [p.lam for p in curve] == grid
    assert all(isinstance(p, IBCurvePoint) for p in curve)
    assert curve[0].beta == pytest.approx(20.0)
    for earlier, later in itertools.pairwise(curve):
        assert later.I_fY <= earlier.I_fY + 1e-6
        assert later.I_Sf <= earlier.I_Sf + 1e-6


def test_curve_threads_match():
    grid = [0.1, 0.4, 2.0]
    serial = ib_curve(_bsc(1.0), grid, seeds_per_point=2, seed=7)
    threaded = ib_curve(_bsc(1.0), grid, seeds_per_point=2, seed=7, threads=3)
    assert serial == threaded


def test_curve_grid_validation():
    with pytest.raises(InputError, match="empty"):
        ib_curve(_bsc(1.0), [])
    with pytest.raises(InputError, match="must be > 0"):
        ib_curve(_bsc(1.0), [0.1, 0.0])


def test_constrained_solve_meets_budget():
    sol = solve_ib_constrained(_bsc(1.0, budget_C=0.3), restarts=3, bisections=25)
    assert sol.within_budget is True
    assert sol.I_Sf <= 0.3
    assert 0 < sol.I_fY <= BSC_RELEVANT + 1e-9


def test_constrained_solve_errors():
    with pytest.raises(InputError, match="needs budget_C"):
        solve_ib_constrained(_bsc(1.0))
    with pytest.raises(InputError, match="invalid lambda range"):
        solve_ib_constrained(_bsc(1.0, budget_C=0.3), lam_range=(1.0, 0.1))
    with pytest.raises(NumericalError, match="meets the budget"):
        solve_ib_constrained(_bsc(1.0, budget_C=0.0), lam_range=(1e-3, 1e-1), restarts=2)
