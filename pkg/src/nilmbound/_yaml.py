"""YAML loading with line numbers, plus small field-checking helpers.

Mappings come back as :class:`Record` (a ``dict``) that remembers the line of
the mapping and of each key, so validation errors can point into the file.
"""

import math

import yaml

from .errors import CatalogError


class Record(dict):
    line = None
    key_lines = {}

    def where(self, key=None, path=""):
        line = self.key_lines.get(key, self.line) if key is not None else self.line
        target = f"{path}.{key}" if key is not None and path else (key or path)
        return f"line {line}, {target}" if line else target


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    loader.flatten_mapping(node)
    record = Record(loader.construct_mapping(node, deep=True))
    record.line = node.start_mark.line + 1
    record.key_lines = {k.value: k.start_mark.line + 1 for k, _ in node.value}
    return record


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def load(text):
    try:
        return yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        location = f"line {mark.line + 1}, column {mark.column + 1}" if mark else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise CatalogError(f"malformed document: {problem}", location) from None


def require_mapping(value, path, parent=None, key=None):
    if not isinstance(value, dict):
        where = parent.where(key, path) if isinstance(parent, Record) else path
        raise CatalogError(f"expected a mapping, got {type(value).__name__}", where)
    if not isinstance(value, Record):
        value = Record(value)
    return value


def reject_unknown(record, allowed, path):
    for key in record:
        if key not in allowed:
            raise CatalogError(
                f"unknown field {key!r} (allowed: {', '.join(sorted(allowed))})",
                record.where(key, path),
            )


def require(record, key, path):
    if key not in record:
        raise CatalogError(f"missing required field {key!r}", record.where(None, path))
    return record[key]


def real(record, key, path, default=None, positive=False, nonnegative=False):
    if key not in record:
        if default is None:
            raise CatalogError(f"missing required field {key!r}", record.where(None, path))
        return default
    value = record[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise CatalogError(f"expected a finite number, got {value!r}", record.where(key, path))
    if positive and value <= 0:
        raise CatalogError(f"must be positive, got {value!r}", record.where(key, path))
    if nonnegative and value < 0:
        raise CatalogError(f"must be non-negative, got {value!r}", record.where(key, path))
    return float(value)


def real_list(record, key, path, length=None):
    value = require(record, key, path)
    if not isinstance(value, list) or any(
        isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) for v in value
    ):
        raise CatalogError("expected a list of finite numbers", record.where(key, path))
    if length is not None and len(value) != length:
        raise CatalogError(f"expected {length} entries, got {len(value)}", record.where(key, path))
    return [float(v) for v in value]
