"""Reading inputs and writing plot-ready outputs.

Every output starts with a header: `# key: value` lines in CSV files and a `header` object in JSON files. CSV files
use ',' delimiters, '.' decimals, LF line endings and 12 significant digits; JSON keys are sorted. Writing the same
table with the same header always produces the same bytes.
"""
import json
import logging
import sys
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd
import yaml

from infolab.bottleneck import IBProblem
from infolab.errors import InputError
from infolab.mi_estimation import ColumnKind, SampleMatrix

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"
HEADER_PREFIX = "# "
STDOUT = "-"

Kinds = str | Sequence[str] | Mapping[str, str]


def _resolve_kinds(kinds: Kinds, names: Sequence[str]) -> tuple[ColumnKind, ...]:
    if isinstance(kinds, Mapping):
        missing = [n for n in names if n not in kinds]
        if missing:
            raise InputError(f"no kind declared for columns {missing}")
        return tuple(kinds[n] for n in names)  # type: ignore[misc]
    if isinstance(kinds, str):
        kinds = [k.strip() for k in kinds.split(",")]
    return tuple(kinds)  # type: ignore[arg-type]


def read_kinds_file(path: str | Path) -> dict[str, str]:
    """YAML mapping from column name to `continuous` or `discrete`."""
    with Path(path).open(encoding="utf-8") as f:
        kinds = yaml.load(f, yaml.SafeLoader)
    if not isinstance(kinds, dict):
        raise InputError(f"kinds file {path} must hold a mapping from column name to kind")
    return {str(k): str(v) for k, v in kinds.items()}


def read_samples(path: str | Path, kinds: Kinds = "continuous") -> SampleMatrix:
    """Samples CSV: one header row of variable names, one row per sample, `#` lines ignored."""
    try:
        frame = pd.read_csv(path, comment="#")
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise InputError(f"cannot parse samples file {path}: {e}") from None

    non_numeric = [c for c in frame.columns if not pd.api.types.is_numeric_dtype(frame[c])]
    if non_numeric:
        raise InputError(f"non-numeric columns in {path}: {non_numeric}")
    names = [str(c) for c in frame.columns]
    logger.info("Read %d samples of %d variables from %s", len(frame), len(names), path)
    return SampleMatrix(frame.to_numpy(dtype=float), _resolve_kinds(kinds, names), tuple(names))


def read_matrix(path: str | Path) -> tuple[np.ndarray, list[str], dict[str, str]]:
    """A square matrix written by `write_matrix`: values, variable names and the header lines."""
    header = read_header(path)
    frame = pd.read_csv(path, comment="#", index_col=0)
    if frame.shape[0] != frame.shape[1]:
        raise InputError(f"matrix in {path} is not square: {frame.shape}")
    return frame.to_numpy(dtype=float), [str(c) for c in frame.columns], header


def read_header(path: str | Path) -> dict[str, str]:
    out = {}
    with Path(path).open(encoding="utf-8") as f:
        for line in f:
            if not line.startswith(HEADER_PREFIX):
                break
            key, _, value = line[len(HEADER_PREFIX) :].rstrip("\n").partition(": ")
            out[key] = value
    return out


def read_ib_problem(path: str | Path) -> IBProblem:
    """JSON or YAML with keys `joint`, `cardinality_f`, `lambda` and optionally `budget_C`."""
    with Path(path).open(encoding="utf-8") as f:
        raw = yaml.load(f, yaml.SafeLoader)
    if not isinstance(raw, dict):
        raise InputError(f"problem file {path} must hold a mapping")
    unknown = set(raw) - {"joint", "cardinality_f", "lambda", "budget_C"}
    if unknown:
        raise InputError(f"unknown keys in problem file {path}: {sorted(unknown)}")
    try:
        return IBProblem(
            joint=np.asarray(raw["joint"], dtype=float),
            cardinality_f=int(raw["cardinality_f"]),
            lam=float(raw["lambda"]),
            budget_C=None if raw.get("budget_C") is None else float(raw["budget_C"]),
        )
    except KeyError as e:
        raise InputError(f"problem file {path} is missing key {e}") from None


def _header_lines(header: Mapping[str, Any]) -> str:
    lines = []
    for key, value in header.items():
        text = value if isinstance(value, str) else json.dumps(value, sort_keys=True)
        lines.append(f"{HEADER_PREFIX}{key}: {text}\n")
    return "".join(lines)


def _emit(path: str | Path, text: str) -> None:
    if str(path) == STDOUT:
        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.info("Wrote %s", path)


def write_csv(path: str | Path, frame: pd.DataFrame, header: Mapping[str, Any], index: bool = False) -> None:
    body = frame.to_csv(index=index, float_format=FLOAT_FORMAT, lineterminator="\n")
    _emit(path, _header_lines(header) + body)


def write_matrix(path: str | Path, values: np.ndarray, names: Sequence[str], header: Mapping[str, Any]) -> None:
    frame = pd.DataFrame(np.asarray(values, dtype=float), index=list(names), columns=list(names))
    frame.index.name = "variable"
    write_csv(path, frame, header, index=True)


def write_json(path: str | Path, payload: Mapping[str, Any], header: Mapping[str, Any]) -> None:
    text = json.dumps({"header": dict(header), **payload}, sort_keys=True, indent=2, allow_nan=False)
    _emit(path, text + "\n")
