"""
Things: the immutable values that flow through stages.

A thing is one of Integer (int), Boolean (bool), Symbol, Text (str),
List (tuple of things) or Record.
"""
from dataclasses import dataclass
from typing import Any, Tuple, Union


@dataclass(frozen=True)
class Symbol:
    name: str

    def __str__(self):
        return f"#{self.name}"


@dataclass(frozen=True)
class Record:
    fields: Tuple[Tuple[str, Any], ...]

    @classmethod
    def of(cls, mapping):
        return cls(tuple(mapping.items()))

    def get(self, key):
        for name, value in self.fields:
            if name == key:
                return value
        raise KeyError(key)

    def __len__(self):
        return len(self.fields)


Thing = Union[int, bool, str, Symbol, tuple, Record]


def type_name(thing):
    """Returns the thing's type tag. Booleans are checked before integers."""
    if isinstance(thing, bool):
        return 'boolean'
    if isinstance(thing, int):
        return 'integer'
    if isinstance(thing, Symbol):
        return 'symbol'
    if isinstance(thing, str):
        return 'text'
    if isinstance(thing, tuple):
        return 'list'
    if isinstance(thing, Record):
        return 'record'
    raise TypeError(f"Not a thing: {thing!r}")


def is_thing(value):
    try:
        type_name(value)
    except TypeError:
        return False
    if isinstance(value, tuple):
        return all(is_thing(v) for v in value)
    if isinstance(value, Record):
        return all(is_thing(v) for _, v in value.fields)
    return True


def _quote(text):
    escaped = text.replace('\\', '\\\\').replace('"', '\\"').replace('\n', '\\n')
    return f'"{escaped}"'


def render(thing):
    """Renders a thing in literal syntax (the same syntax the parser reads)."""
    if thing is None:
        return '-'
    kind = type_name(thing)
    if kind == 'boolean':
        return 'true' if thing else 'false'
    if kind == 'integer':
        return str(thing)
    if kind == 'symbol':
        return str(thing)
    if kind == 'text':
        return _quote(thing)
    if kind == 'list':
        return '[' + ', '.join(render(t) for t in thing) + ']'
    return '{' + ', '.join(f"{k}: {render(v)}" for k, v in thing.fields) + '}'
