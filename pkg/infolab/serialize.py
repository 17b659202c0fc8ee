"""Convert configs and results to and from JSON-compatible objects.

Two converters are added on top of the stock databind JSON mapper:

- `ABCConverter` stores the concrete class of abstract dataclasses under the `_type_` key, so the `transform` field
  of a config, typed as the abstract `WeightTransform`, can be filled from YAML or the command line.
- `NumpyConverter` turns arrays into nested lists and numpy scalars into Python scalars.
"""
import abc
import dataclasses
import importlib
from typing import Any, Callable, ClassVar, Mapping, TypeVar

import databind.json
import numpy as np
from databind.core import (
    Context,
    ConversionError,
    Converter,
    ObjectMapper,
    Setting,
    SettingsProvider,
)
from databind.json.converters import SchemaConverter
from typeapi import AnnotatedTypeHint, ClassTypeHint, TypeHint

T = TypeVar("T")


def _unwrap_annotated(hint: TypeHint) -> TypeHint:
    if isinstance(hint, AnnotatedTypeHint):
        return hint[0]
    return hint


def serialize_class_or_function(cls_or_fn: type | Callable) -> str:
    """Converts class or function into a "module:qualname" string."""
    mod_name = cls_or_fn.__module__
    if mod_name == "__main__":
        raise ValueError(f"Cannot serialize {cls_or_fn} from `__main__`: it cannot be imported back in another run.")
    out = f"{mod_name}:{cls_or_fn.__qualname__}"
    if "<locals>" in out or "<lambda>" in out:
        raise ValueError(f"Cannot serialize object {cls_or_fn} because it is ephemeral.")
    return out


def deserialize_class_or_function(value: str) -> type | Callable:
    """Imports some class or function from a "module:qualname" string."""
    module_name, qualname = value.split(":")
    module = importlib.import_module(module_name)

    obj: Any = module
    for part in qualname.split("."):
        obj = getattr(obj, part)
    return obj


class ABCConverter(Converter):
    """De/serializes abstract dataclasses (subclasses of abc.ABC) by storing their concrete type under `_type_`."""

    TYPE_KEY: ClassVar[str] = "_type_"

    def convert(self, ctx: Context) -> Any:
        datatype = _unwrap_annotated(ctx.datatype)
        if not isinstance(datatype, ClassTypeHint):
            raise NotImplementedError

        if hasattr(datatype.type, self.TYPE_KEY):
            raise TypeError(f"Class {datatype.type} has a '{self.TYPE_KEY}' attribute which I would have to overwrite.")

        if ctx.direction.is_serialize():
            if not issubclass(datatype.type, abc.ABC):
                raise NotImplementedError

            cls = ctx.value.__class__
            out = SchemaConverter().convert(dataclasses.replace(ctx, datatype=TypeHint(cls)))
            cls_fields = set(f.name for f in dataclasses.fields(cls))
            if set(out.keys()) != cls_fields:
                raise ValueError(  # pragma: no cover
                    f"Serializing {cls} produced fields {set(out.keys())}, expected {cls_fields}."
                )
            # New dict so the type key comes first in the output
            return {self.TYPE_KEY: serialize_class_or_function(cls), **out}

        elif ctx.direction.is_deserialize():
            cls: type = datatype.type
            if not isinstance(ctx.value, Mapping):
                if issubclass(cls, abc.ABC):
                    raise ConversionError(self, ctx, f"value must be a Mapping to deserialize into {cls}")
                raise NotImplementedError

            if self.TYPE_KEY not in ctx.value:
                if issubclass(cls, abc.ABC):
                    raise KeyError(
                        f'Input {ctx.value} has no key "{self.TYPE_KEY}", so I don\'t know which subclass of {cls} to build.'
                    )
                raise NotImplementedError

            value = dict(ctx.value)
            concrete_cls = deserialize_class_or_function(value.pop(self.TYPE_KEY))
            if not (isinstance(concrete_cls, type) and issubclass(concrete_cls, cls)):
                raise ConversionError(self, ctx, f"_type_-specified class {concrete_cls} is not a subclass of {cls}.")

            return SchemaConverter().convert(dataclasses.replace(ctx, value=value, datatype=TypeHint(concrete_cls)))
        else:
            raise ValueError(f"Unknown {ctx.direction=}")  # pragma: no cover


class NumpyConverter(Converter):
    """Arrays become nested lists, numpy scalars become Python scalars."""

    def convert(self, ctx: Context) -> Any:
        datatype = _unwrap_annotated(ctx.datatype)
        if not isinstance(datatype, ClassTypeHint):
            raise NotImplementedError

        if issubclass(datatype.type, np.ndarray):
            if ctx.direction.is_serialize():
                return np.asarray(ctx.value).tolist()
            try:
                return np.asarray(ctx.value, dtype=float)
            except (TypeError, ValueError) as e:
                raise ConversionError(self, ctx, f"cannot read an array from {ctx.value!r}: {e}")

        if ctx.direction.is_serialize() and isinstance(ctx.value, np.generic):
            return ctx.value.item()
        raise NotImplementedError


def get_object_mapper() -> ObjectMapper[Any, databind.json.JsonType]:
    mapper = databind.json.get_object_mapper()
    converters = mapper.module.converters[0].converters  # type: ignore
    for i in range(len(converters)):
        if isinstance(converters[i], SchemaConverter):
            converters.insert(i, ABCConverter())
            converters.insert(i, NumpyConverter())
            break

    assert any(isinstance(c, ABCConverter) for c in converters)
    return mapper


def from_dict(
    value: databind.json.JsonType, datatype: type[T], *, settings: SettingsProvider | list[Setting] | None = None
) -> T:
    "Get a value of type `datatype` from a dict object."
    return get_object_mapper().deserialize(value, datatype, settings=settings)


def to_dict(
    value: Any, datatype: type[T] | None = None, *, settings: SettingsProvider | list[Setting] | None = None
) -> databind.json.JsonType:
    "Convert `value` to a dict object which can be serialized."
    if datatype is None:
        datatype = type(value)
    return get_object_mapper().serialize(value, datatype, settings=settings)
