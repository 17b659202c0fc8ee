"""Merge and diff nested configuration mappings
"""
from typing import Any, Mapping


def _has_type_change(c1: Mapping, c2: Mapping) -> bool:
    return "_type_" in c2 and c1.get("_type_") != c2["_type_"]


def config_merge(c1: Any, c2: Any) -> Any:
    """Merge `c2` onto `c1`.

    Mappings merge key by key, recursively. Everything else, lists included, is a leaf that `c2` replaces. A mapping
    in `c2` that names a different `_type_` than the one in `c1` replaces it wholesale, because the fields of one
    concrete class mean nothing to another.

    Args:
        c1: The base config, usually the serialized defaults.
        c2: The update, usually a config file or command-line assignments.

    Returns:
        A new merged object. Neither input is mutated.
    """
    if isinstance(c1, Mapping) and isinstance(c2, Mapping) and not _has_type_change(c1, c2):
        out = dict(c1)
        for key, value in c2.items():
            out[key] = config_merge(out[key], value) if key in out else value
        return out
    return c2


def config_diff(c_from: Any, c_to: Any) -> Any:
    """Output the minimal `update` such that `config_merge(c_from, update) == c_to`.

    Only mappings are diffed recursively; a mapping whose keys shrink or whose `_type_` changes is returned whole.

    >>> config_diff({"a": 1, "b": {"c": 2, "d": 3}}, {"a": 1, "b": {"c": 2, "d": 4}})
    {'b': {'d': 4}}
    """
    if isinstance(c_from, Mapping) and isinstance(c_to, Mapping):
        if not set(c_to.keys()).issuperset(c_from.keys()) or _has_type_change(c_from, c_to):
            return dict(c_to)
        out = {}
        for key, v_to in c_to.items():
            if key not in c_from:
                out[key] = v_to
            elif c_from[key] != v_to:
                out[key] = config_diff(c_from[key], v_to)
        return out
    return c_to
