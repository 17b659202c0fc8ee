"""Every subcommand end to end, through `infolab.cli.run`."""
import json
import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from infolab.cli import run
from infolab.commands import OUT_DIR_ENV
from infolab.io import read_header, read_matrix, write_matrix
from infolab.mi_estimation import EstimatorConfig, SampleMatrix, build_mi_matrix
from infolab.spectral import spectral_summary

FIXTURES = Path(__file__).parent / "integration"


def _read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


@pytest.fixture
def discrete_samples(tmp_path: Path) -> Path:
    rng = np.random.default_rng(0)
    a = rng.integers(0, 4, 2000)
    b = rng.integers(0, 2, 2000)
    frame = pd.DataFrame({"a": a, "a_copy": a, "b": b, "noisy": (b + (rng.random(2000) < 0.1)) % 2})
    path = tmp_path / "samples.csv"
    frame.to_csv(path, index=False)
    return path


@pytest.fixture
def continuous_samples(tmp_path: Path) -> Path:
    rng = np.random.default_rng(1)
    x = rng.standard_normal(1000)
    frame = pd.DataFrame({"x": x, "x_noisy": x + 0.3 * rng.standard_normal(1000), "z": rng.standard_normal(1000)})
    path = tmp_path / "continuous.csv"
    frame.to_csv(path, index=False)
    return path


def test_dilution(tmp_path: Path):
    out = tmp_path / "dilution.csv"
    assert run(["dilution", "--dims", "4,8", "--pairs", "1000", "--out", str(out)]) == 0

    frame = _read_csv(out)
    assert list(frame["d"]) == [4, 8]
    assert list(frame.columns[:3]) == ["d", "n_pairs", "metric"]
    np.testing.assert_allclose(frame["d_times_eta_bar"], frame["d"] * frame["eta_bar"], rtol=1e-9)

    header = read_header(out)
    assert header["tool"].startswith("infolab ")
    assert header["subcommand"] == "dilution"
    assert json.loads(header["overrides"]) == {"dims": [4, 8], "pairs": 1000, "out": str(out)}


def test_reruns_are_byte_identical(tmp_path: Path):
    out = tmp_path / "dilution.csv"
    argv = ["dilution", "--dims", "2,3", "--pairs", "1000", "--seed", "5", "--out", str(out)]
    assert run(argv) == 0
    first = out.read_bytes()
    assert run(argv) == 0
    assert out.read_bytes() == first

    single = tmp_path / "single.csv"
    assert run(argv[:-1] + [str(single), "--threads", "1"]) == 0
    pd.testing.assert_frame_equal(_read_csv(single), _read_csv(out))


def test_config_file(tmp_path: Path):
    out = tmp_path / "dilution.csv"
    assert run(["dilution", "--config", str(FIXTURES / "dilution.yaml"), "--out", str(out)]) == 0
    frame = _read_csv(out)
    assert set(frame["metric"]) == {"mahalanobis"}
    assert list(frame["d"]) == [4, 8]


def test_out_dir_from_environment(tmp_path: Path, monkeypatch):
    monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "results"))
    monkeypatch.chdir(tmp_path)
    assert run(["dilution", "--dims", "2", "--pairs", "1000", "--out", "sweep.csv"]) == 0
    assert (tmp_path / "results" / "sweep.csv").exists()
    assert not (tmp_path / "sweep.csv").exists()


def test_mi_matrix_and_weights(tmp_path: Path, discrete_samples: Path):
    out = tmp_path / "mi.csv"
    argv = ["mi-matrix", "--in", str(discrete_samples), "--kinds", "discrete", "--transform", "exp_scale", "--out", str(out)]
    assert run(argv) == 0

    values, names, header = read_matrix(out)
    assert names == ["a", "a_copy", "b", "noisy"]
    assert header["units"] == "nats"
    assert header["diagonal_policy"] == "self_entropy"
    assert values[0, 1] == pytest.approx(values[0, 0], rel=1e-9)
    assert values[0, 2] < 0.01
    np.testing.assert_array_equal(values, values.T)

    weights, _, weights_header = read_matrix(tmp_path / "mi_weights.csv")
    assert weights_header["transform"] == "exp_scale(1)"
    assert np.all(np.diag(weights) == 0)
    assert weights[0, 1] == pytest.approx(math.exp(values[0, 1]), rel=1e-9)


def test_mi_matrix_json(tmp_path: Path, discrete_samples: Path):
    out = tmp_path / "mi.json"
    assert run(["mi-matrix", "--in", str(discrete_samples), "--kinds", "discrete", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["names"] == ["a", "a_copy", "b", "noisy"]
    assert payload["estimator"]["method"] is None
    assert np.asarray(payload["values"]).shape == (4, 4)


def test_mi_matrix_without_dependence_is_a_numerical_failure(tmp_path: Path, capsys):
    path = tmp_path / "independent.csv"
    pd.DataFrame({"x": [0, 0, 1, 1] * 25, "y": [0, 1, 0, 1] * 25}).to_csv(path, index=False)
    argv = ["mi-matrix", "--in", str(path), "--kinds", "discrete", "--transform", "normalize_max"]
    argv += ["--out", str(tmp_path / "m.csv")]
    assert run(argv) == 2
    assert "no dependence structure" in capsys.readouterr().err


def test_erank_reads_matrices_in_bits(tmp_path: Path, discrete_samples: Path):
    matrix = tmp_path / "mi_bits.csv"
    argv = ["mi-matrix", "--in", str(discrete_samples), "--kinds", "discrete", "estimator.log_base=bits", "--out", str(matrix)]
    assert run(argv) == 0
    assert read_header(matrix)["units"] == "bits"

    out = tmp_path / "erank.json"
    assert run(["erank", "--matrix", str(matrix), "--out", str(out)]) == 0
    payload = json.loads(out.read_text())

    frame = pd.read_csv(discrete_samples)
    s = SampleMatrix(frame.to_numpy(dtype=float), ("discrete",))
    expected = spectral_summary(build_mi_matrix(s, EstimatorConfig()))
    np.testing.assert_allclose(payload["singular_values"], expected.singular_values, rtol=1e-9, atol=1e-9)
    assert payload["effective_rank"] == pytest.approx(expected.effective_rank, rel=1e-9)
    assert payload["randomized"] is False
    assert payload["diagonal_policy"] == "self_entropy"


def test_erank_randomized_and_csv(tmp_path: Path):
    matrix = tmp_path / "m.csv"
    write_matrix(matrix, np.diag([3.0, 2.0, 1.0]), ["a", "b", "c"], {"units": "nats"})

    out = tmp_path / "erank.json"
    argv = ["erank", "--matrix", str(matrix), "--randomized", "--rank", "2", "--oversample", "5", "--out", str(out)]
    assert run(argv) == 0
    payload = json.loads(out.read_text())
    assert payload["sketch_size"] == 3
    assert payload["effective_rank"] == pytest.approx(spectral_summary(np.diag([3.0, 2.0, 1.0])).effective_rank, abs=1e-8)

    out = tmp_path / "spectrum.csv"
    assert run(["erank", "--matrix", str(matrix), "--out", str(out)]) == 0
    frame = _read_csv(out)
    assert list(frame.columns) == ["index", "sigma", "p"]
    np.testing.assert_allclose(frame["p"], [0.5, 1 / 3, 1 / 6], rtol=1e-9)
    assert float(read_header(out)["numerical_rank"]) == 3


def test_capacity(tmp_path: Path):
    matrix = tmp_path / "m.csv"
    write_matrix(matrix, np.diag([3.0, 2.0, 1.0]), ["a", "b", "c"], {"units": "nats"})
    out = tmp_path / "capacity.json"
    assert run(["capacity", "--matrix", str(matrix), "--capacity", "5", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["capacity_modes"] == 2
    assert payload["exceeds_capacity"] is True
    assert payload["header"]["seed"] == 0

    assert run(["capacity", "--matrix", str(matrix), "--out", str(out)]) == 1


def test_emergence(tmp_path: Path, continuous_samples: Path):
    out = tmp_path / "emergence.json"
    assert run(["emergence", "--in", str(continuous_samples), "--capacity", "0.5", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["variables"] == ["x", "x_noisy", "z"]
    assert payload["emerged"] == (payload["complexity"] > payload["capacity_modes"])
    assert payload["theta_source"] in ("override", "formula", "fallback_default")


def test_emergence_theta_override(tmp_path: Path, continuous_samples: Path):
    out = tmp_path / "emergence.json"
    argv = ["emergence", "--in", str(continuous_samples), "--capacity", "0.5", "--theta", "0.2", "--out", str(out)]
    assert run(argv) == 0
    payload = json.loads(out.read_text())
    assert (payload["theta"], payload["theta_source"]) == (0.2, "override")


def test_ib_solution(tmp_path: Path):
    out = tmp_path / "ib.json"
    assert run(["ib", "--flip", "0.1", "--lambda", "0.01", "--restarts", "3", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["lambda"] == 0.01
    assert payload["beta"] == pytest.approx(100.0)
    assert payload["I_fY"] == pytest.approx(0.3681, abs=1e-3)
    assert payload["dpi_holds"] is True
    assert payload["header"]["I_SY"] == pytest.approx(0.3681, abs=1e-4)


def test_ib_problem_file(tmp_path: Path):
    out = tmp_path / "ib.json"
    assert run(["ib", "--in", str(FIXTURES / "bsc_problem.yaml"), "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["lambda"] == 0.05
    assert payload["within_budget"] is False
    assert len(payload["encoder"]) == 2


def test_ib_curve(tmp_path: Path):
    out = tmp_path / "curve.csv"
    assert run(["ib", "--flip", "0.1", "--lambdas", "0.1,5.0", "--restarts", "2", "--out", str(out)]) == 0
    frame = _read_csv(out)
    assert list(frame.columns) == ["lambda", "beta", "I_Sf", "I_fY", "residual", "iterations"]
    assert list(frame["lambda"]) == [0.1, 5.0]
    assert frame["I_fY"].iloc[0] > frame["I_fY"].iloc[1]


def test_homology(tmp_path: Path):
    matrix = tmp_path / "m.csv"
    write_matrix(matrix, np.ones((2, 2)), ["a", "b"], {"units": "nats", "diagonal_policy": "self_entropy"})

    out = tmp_path / "barcode.csv"
    argv = ["homology", "--matrix", str(matrix), "--min-persistence", "0.5", "--capacity", "0.5", "--out", str(out)]
    assert run(argv) == 0
    frame = _read_csv(out)
    assert list(frame.columns) == ["level", "birth", "death", "contiguous"]
    assert list(frame["level"]) == [1, 0]
    header = read_header(out)
    assert header["persistent_modes"] == "1"
    assert header["capacity_modes"] == "0"
    assert header["diagonal_policy"] == "self_entropy"

    out = tmp_path / "barcode.json"
    assert run(["homology", "--matrix", str(matrix), "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["ranks"] == [1, 1, 0]
    assert payload["intervals"][0] == {"level": 1, "birth": 0.0, "death": 1.0, "contiguous": True}


def test_ising(tmp_path: Path):
    out = tmp_path / "ising.csv"
    matrices = tmp_path / "matrices"
    argv = ["ising", "--L", "4", "--temps", "1.0,3.0", "--sweeps", "500", "--burn-in", "50", "--thin", "5"]
    argv += ["--matrices-out", str(matrices), "--out", str(out)]
    assert run(argv) == 0
    frame = _read_csv(out)
    assert list(frame["T"]) == [1.0, 3.0]
    assert "capacity_modes" not in frame.columns
    assert list(frame["n_configs"]) == [100, 100]
    assert sorted(p.name for p in matrices.iterdir()) == ["mi_T1.csv", "mi_T3.csv"]
    values, names, header = read_matrix(matrices / "mi_T3.csv")
    assert values.shape == (16, 16)
    assert header["T"] == "3.0"


def test_output_to_stdout(capsys):
    assert run(["dilution", "--dims", "2", "--pairs", "1000", "--out", "-"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# tool: infolab ")
    assert "d_times_eta_bar" in out
