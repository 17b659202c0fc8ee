import logging

import numpy as np
import pytest

from infolab.errors import InputError
from infolab.ising import (
    ONSAGER_TC,
    IsingSpec,
    criticality_sweep,
    energy_per_site,
    mann_kendall,
    simulate,
    spin_mi_matrix,
)

SHORT = dict(sweeps=1000, burn_in=100, thin=10)


def test_spec_validation():
    with pytest.raises(InputError, match="lattice side"):
        IsingSpec(L=1)
    with pytest.raises(InputError, match="temperatures must be > 0"):
        IsingSpec(T_list=[1.0, 0.0])
    with pytest.raises(InputError, match="thin"):
        IsingSpec(thin=0)
    with pytest.raises(InputError, match="site_subsample"):
        IsingSpec(L=4, site_subsample=17)
    assert IsingSpec(L=4).resolved_site_subsample == 16
    assert IsingSpec(L=16).resolved_site_subsample == 64


def test_onsager_temperature():
    assert ONSAGER_TC == pytest.approx(2.269185, abs=1e-6)


def test_energy_of_ground_state():
    assert energy_per_site(np.ones((4, 4), dtype=np.int8)) == -2.0
    checkerboard = np.where(np.add.outer(np.arange(4), np.arange(4)) % 2 == 0, 1, -1)
    assert energy_per_site(checkerboard) == 2.0


@pytest.mark.parametrize("L", [8, 5])
def test_cold_chain_stays_ordered(L: int):
    run = simulate(IsingSpec(L=L, **SHORT), T=0.1)
    assert run.configs.shape == (100, L * L)
    assert run.configs.dtype == np.int8
    assert np.mean(np.abs(run.magnetization)) > 0.99
    assert np.mean(run.energy_per_site) == pytest.approx(-2.0, abs=0.02)


def test_hot_chain_is_disordered():
    run = simulate(IsingSpec(L=16, sweeps=2000, burn_in=200, thin=10), T=10.0)
    assert set(np.unique(run.configs)) == {-1, 1}
    assert np.mean(np.abs(run.magnetization)) < 0.15


def test_simulation_is_seeded():
    spec = IsingSpec(L=6, seed=3, **SHORT)
    a = simulate(spec, T=2.5)
    b = simulate(spec, T=2.5)
    c = simulate(spec, T=2.5, seed=4)
    np.testing.assert_array_equal(a.configs, b.configs)
    np.testing.assert_array_equal(a.energy_per_site, b.energy_per_site)
    assert not np.array_equal(a.configs, c.configs)


def test_simulate_rejects_non_positive_temperature():
    with pytest.raises(InputError, match="temperature must be > 0"):
        simulate(IsingSpec(L=4, **SHORT), T=0.0)


def test_spin_mi_matrix_examples():
    rng = np.random.default_rng(0)
    first = rng.choice([-1, 1], size=2000)
    independent = rng.choice([-1, 1], size=2000)
    m = spin_mi_matrix(np.column_stack([first, first, independent]))
    assert m.diagonal_policy == "self_entropy"
    assert m.names == ["site0", "site1", "site2"]
    assert m.values[0, 1] == pytest.approx(m.values[0, 0])
    np.testing.assert_allclose(np.diag(m.values), np.log(2), atol=1e-3)
    assert m.values[0, 2] == pytest.approx(0.0, abs=2e-3)


def test_spin_mi_matrix_needs_enough_configurations():
    with pytest.raises(InputError, match="insufficient samples"):
        spin_mi_matrix(np.ones((99, 4), dtype=np.int8))


def test_site_subsample_is_seeded_and_sorted():
    configs = np.random.default_rng(1).choice([-1, 1], size=(200, 10))
    a = spin_mi_matrix(configs, site_subsample=4, seed=7)
    b = spin_mi_matrix(configs, site_subsample=4, seed=7)
    assert a.d == 4
    np.testing.assert_array_equal(a.values, b.values)
    sites = [int(name.removeprefix("site")) for name in a.names]
    assert sites == sorted(sites)


def test_hot_lattice_has_little_pairwise_information():
    run = simulate(IsingSpec(L=8, sweeps=10000, burn_in=200, thin=10), T=10.0)
    m = spin_mi_matrix(run.configs)
    off = m.values[~np.eye(m.d, dtype=bool)]
    assert np.median(off) < 0.01


def test_information_decays_with_distance():
    L = 8
    run = simulate(IsingSpec(L=L, sweeps=3000, burn_in=500, thin=5), T=2.5)
    m = spin_mi_matrix(run.configs)
    site = np.arange(L * L).reshape(L, L)
    neighbors = [m.values[site[i, j], site[i, (j + 1) % L]] for i in range(L) for j in range(L)]
    far = [m.values[site[i, j], site[(i + 4) % L, (j + 4) % L]] for i in range(L) for j in range(L)]
    assert np.mean(neighbors) > 2 * np.mean(far)


def test_sweep_rows_and_matrices():
    spec = IsingSpec(L=4, T_list=[1.0, 5.0], sweeps=1000, burn_in=100, thin=5, budget_C=1.0)
    seen = []
    rows = criticality_sweep(spec, on_matrix=lambda T, m: seen.append((T, m.d)))
    assert [r.T for r in rows] == [1.0, 5.0]
    assert seen == [(1.0, 16), (5.0, 16)]
    for row in rows:
        assert row.n_configs == 200
        assert row.site_subsample == 16
        assert row.capacity_modes is not None
        assert row.exceeds_capacity == (row.erank > row.capacity_modes)
    assert rows[0].mean_abs_magnetization > rows[1].mean_abs_magnetization


def test_sweep_threads_match():
    spec = IsingSpec(L=4, T_list=[1.5, 3.0], sweeps=1000, burn_in=100, thin=5, seed=9)
    assert criticality_sweep(spec) == criticality_sweep(spec, threads=2)


def test_sweep_warns_when_temperatures_miss_the_transition(caplog):
    spec = IsingSpec(L=4, T_list=[1.0, 1.5], sweeps=1000, burn_in=100, thin=5)
    with caplog.at_level(logging.WARNING, logger="infolab.ising"):
        criticality_sweep(spec)
    assert "do not straddle" in caplog.text


def test_mann_kendall():
    rising = mann_kendall(np.arange(20.0) ** 2)
    assert rising.tau == pytest.approx(1.0)
    assert rising.p_value < 0.01
    falling = mann_kendall(-np.arange(20.0))
    assert falling.tau == pytest.approx(-1.0)


@pytest.mark.slow
def test_effective_rank_dips_at_the_transition():
    rows = criticality_sweep(IsingSpec(L=16, seed=0), threads=5)
    erank = {r.T: r.erank for r in rows}
    assert all(r.n_configs >= 2000 for r in rows)
    # Long-range order at T_c concentrates the spin MI spectrum on few modes
    assert erank[2.27] < min(erank[1.5], erank[3.5])
    magnetization = {r.T: r.mean_abs_magnetization for r in rows}
    assert magnetization[1.5] > 0.9
    assert magnetization[3.5] < 0.2


@pytest.mark.slow
def test_effective_rank_curve_is_reproducible_across_seeds():
    first = [r.erank for r in criticality_sweep(IsingSpec(L=16, seed=0), threads=5)]
    second = [r.erank for r in criticality_sweep(IsingSpec(L=16, seed=1), threads=5)]
    spread = max(first) - min(first)
    assert max(abs(a - b) for a, b in zip(first, second)) < 0.15 * spread


@pytest.mark.slow
def test_energy_has_no_drift_after_burn_in():
    run = simulate(IsingSpec(L=16, seed=0), T=1.5)
    assert run.energy_per_site.size >= 2000
    assert mann_kendall(run.energy_per_site).p_value >= 0.01
