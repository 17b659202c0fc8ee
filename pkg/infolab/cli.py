"""Parse the command line into run configurations and dispatch subcommands.

`infolab SUBCOMMAND [--config=FILE.yaml] [ASSIGNMENTS...]`

Assignments are applied left to right onto one dict, which is then converted into the subcommand's config dataclass:

  - `--config=PATH` (first argument only) seeds the dict from a YAML file.
  - `path.to.key=VALUE` or `--set=path.to.key=VALUE` sets a key to the JSON-parsed VALUE, or to the raw string if it
    does not parse and does not look like JSON.
  - `--set-json=path.to.key=JSON` is the same, but VALUE must be JSON.
  - `--set-from-file=path.to.key=PATH` sets a key to the contents of a YAML file.
  - `--flag VALUE` and `--flag=VALUE` set key `flag` (dashes become underscores). A flag followed by nothing or by
    another flag is set to `true`.
"""
import dataclasses
import json
import logging
import re
import sys
import typing
from pathlib import Path
from typing import Any, Mapping, Sequence, TypeVar

import numpy as np
import yaml
from databind.core import ConversionError

from infolab._version import __version__
from infolab.commands import SUBCOMMANDS, make_header
from infolab.config_ops import config_merge
from infolab.errors import InputError, NumericalError
from infolab.serialize import from_dict, to_dict

logger = logging.getLogger(__name__)

T = TypeVar("T")

FLAG_KEYS = {"in": "input", "lambda": "lam"}
CONFIG_FLAG = "--config"


class CLIParseError(InputError):
    pass


def _equals_key_and_value(s: str) -> tuple[str, str]:
    key, *value = s.split("=")
    return key, "=".join(value)


def assign_from_dotlist(out: dict[str, Any], dot_key: str, value: Any) -> None:
    non_recursive_keys = dot_key.split(".")

    x = out
    for key in non_recursive_keys[:-1]:
        if key not in x or not isinstance(x[key], dict):
            # Anything that is not a dict here gets replaced by a fresh dict
            x[key] = dict()
        x = x[key]

    x[non_recursive_keys[-1]] = value


JSON_LIKE_CHARS = r'\[\]{}"'
INTENDED_JSON = re.compile(f"^.*[{JSON_LIKE_CHARS}].*$")


def parse_value(value: str, origin: str) -> Any:
    try:
        return json.loads(value)
    except json.JSONDecodeError as e:
        if INTENDED_JSON.fullmatch(value):
            raise CLIParseError(f"From CLI assignment {origin!r}: {e.msg}") from None
        return value


def _assign(out: dict[str, Any], key: str, value: Any, aliases: Mapping[str, Mapping[str, str]]) -> None:
    if key in aliases and isinstance(value, str):
        if value not in aliases[key]:
            raise CLIParseError(f"Unknown value {value!r} for {key}; choose one of {sorted(aliases[key])}")
        value = {"_type_": aliases[key][value]}
    assign_from_dotlist(out, key, value)


def _load_yaml(path: str) -> Any:
    try:
        with Path(path).open(encoding="utf-8") as f:
            return yaml.load(f, yaml.SafeLoader)
    except FileNotFoundError:
        raise CLIParseError(f"no such file: {path}") from None


def _is_flag(arg: str) -> bool:
    return arg.startswith("--") and len(arg) > 2


def parse_cli_into_dict(args: Sequence[str], aliases: Mapping[str, Mapping[str, str]] | None = None) -> dict[str, Any]:
    aliases = aliases or {}
    out: dict[str, Any] = {}
    i = 0
    while i < len(args):
        arg = args[i]
        i += 1
        if arg.startswith("--set="):
            _, key_value_pair = _equals_key_and_value(arg)
            key, value = _equals_key_and_value(key_value_pair)
            _assign(out, key, parse_value(value, key_value_pair), aliases)

        elif arg.startswith("--set-json="):
            _, key_value_pair = _equals_key_and_value(arg)
            key, value = _equals_key_and_value(key_value_pair)
            try:
                parsed_value = json.loads(value)
            except json.JSONDecodeError as e:
                raise CLIParseError(f"From CLI assignment {key_value_pair!r}: {e.msg}") from None
            _assign(out, key, parsed_value, aliases)

        elif arg.startswith("--set-from-file="):
            _, key_value_pair = _equals_key_and_value(arg)
            key, file_path = _equals_key_and_value(key_value_pair)
            _assign(out, key, _load_yaml(file_path), aliases)

        elif arg == CONFIG_FLAG or arg.startswith(CONFIG_FLAG + "="):
            if i != 1:
                raise CLIParseError(f"{CONFIG_FLAG} can only be the first argument, but I received {list(args)}")
            if arg == CONFIG_FLAG:
                if i >= len(args):
                    raise CLIParseError(f"{CONFIG_FLAG} needs a file path")
                file_path = args[i]
                i += 1
            else:
                _, file_path = _equals_key_and_value(arg)
            d = _load_yaml(file_path)
            if not isinstance(d, dict):
                raise CLIParseError(f"Config file {file_path} must hold a mapping")
            out = {}
            for key, value in d.items():
                _assign(out, str(key), value, aliases)

        elif _is_flag(arg):
            name, has_value, value = arg[2:].partition("=")
            if not has_value:
                if i < len(args) and not _is_flag(args[i]):
                    value = args[i]
                    i += 1
                else:
                    value = "true"
            key = FLAG_KEYS.get(name, name.replace("-", "_"))
            _assign(out, key, parse_value(value, arg), aliases)

        else:
            if arg.startswith("-"):
                raise CLIParseError(f"Unrecognized argument {arg!r}. Flags take the form `--name VALUE` or `--name=VALUE`.")
            if "=" not in arg:
                raise CLIParseError(f"Argument {arg} is not a valid assignment, it contains no `=`.")
            key, value = _equals_key_and_value(arg)
            _assign(out, key, parse_value(value, arg), aliases)

    return out


def _strip_optional(hint: Any) -> Any:
    args = [a for a in typing.get_args(hint) if a is not type(None)]
    if type(None) in typing.get_args(hint) and len(args) == 1:
        return args[0]
    return hint


def _coerce(value: Any, hint: Any) -> Any:
    """Command-line friendly conversions: comma lists into lists, ints into floats."""
    hint = _strip_optional(hint)
    if typing.get_origin(hint) is list:
        (item_hint,) = typing.get_args(hint) or (Any,)
        if isinstance(value, str):
            value = [parse_value(v.strip(), value) for v in value.split(",") if v.strip()]
        elif not isinstance(value, list):
            value = [value]
        return [_coerce(v, item_hint) for v in value]
    if hint is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def _all_defaulted(datatype: type) -> bool:
    missing = dataclasses.MISSING
    return all(f.default is not missing or f.default_factory is not missing for f in dataclasses.fields(datatype))


def parse_cli(args: Sequence[str], datatype: type[T], aliases: Mapping[str, Mapping[str, str]] | None = None) -> T:
    cfg = parse_cli_into_dict(args, aliases)
    if dataclasses.is_dataclass(datatype):
        hints = typing.get_type_hints(datatype)
        cfg = {k: _coerce(v, hints[k]) if k in hints else v for k, v in cfg.items()}
        if _all_defaulted(datatype):
            # Flags and file values land on top of the serialized defaults
            cfg = config_merge(to_dict(datatype()), cfg)
    return from_dict(cfg, datatype)


def usage() -> str:
    lines = [f"infolab {__version__}", "", "usage: infolab SUBCOMMAND [--config=FILE] [--flag VALUE | key=VALUE ...]", ""]
    width = max(len(name) for name in SUBCOMMANDS)
    lines += [f"  {name:<{width}}  {sub.summary}" for name, sub in SUBCOMMANDS.items()]
    lines += ["", "exit status: 0 success, 1 input error, 2 numerical failure"]
    return "\n".join(lines) + "\n"


def run(argv: Sequence[str]) -> int:
    """Run one subcommand and return the process exit status."""
    if not argv or argv[0] not in SUBCOMMANDS:
        if argv and argv[0] in ("-h", "--help", "help"):
            sys.stdout.write(usage())
            return 0
        if argv:
            sys.stderr.write(f"error: unknown subcommand {argv[0]!r}\n")
        sys.stderr.write(usage())
        return 1

    name, args = argv[0], list(argv[1:])
    sub = SUBCOMMANDS[name]
    try:
        cfg = parse_cli(args, sub.config, sub.aliases)
        if cfg.verbose:
            logging.getLogger("infolab").setLevel(logging.DEBUG)
        if cfg.threads is not None and cfg.threads < 1:
            raise InputError(f"threads must be >= 1, got {cfg.threads}")
        logger.debug("Resolved %s config: %s", name, cfg)
        sub.run(cfg, make_header(name, cfg))
    except (NumericalError, np.linalg.LinAlgError, ArithmeticError) as e:
        sys.stderr.write(f"numerical failure: {e}\n")
        return 2
    except (InputError, ConversionError, KeyError, TypeError, ValueError, OSError, yaml.YAMLError) as e:
        sys.stderr.write(f"input error: {e}\n")
        return 1
    return 0


def main() -> None:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run(sys.argv[1:]))
