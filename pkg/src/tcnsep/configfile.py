"""Plain-text ``key = value`` configuration files.

One assignment per line; ``#`` starts a comment. Values are coerced to the
field types of the dataclass they configure. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import types
import typing
from pathlib import Path
from typing import Any, Iterable, Mapping


class ConfigError(ValueError):
    """Invalid configuration (bad key, value or combination)."""


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def read_config(path: str | Path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def apply_overrides(base: Mapping[str, str], overrides: Iterable[str]) -> dict[str, str]:
    out = dict(base)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        out[key] = value
    return out


def write_config(path: str | Path, values: Mapping[str, Any]) -> None:
    lines = [f"{k} = {format_value(v)}" for k, v in values.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    return str(value)


def _coerce(raw: str, tp: Any, key: str) -> Any:
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if raw.strip().lower() in ("", "none", "null"):
            if type(None) in args:
                return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(raw, inner[0], key)
    if origin in (tuple, list):
        inner = args[0] if args else str
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        vals = [_coerce(p, inner, key) for p in parts]
        return tuple(vals) if origin is tuple else vals
    try:
        if tp is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        if tp is str:
            return raw
    except ValueError as exc:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from exc
    raise ConfigError(f"unsupported field type for {key}: {tp}")


def field_names(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def build_dataclass(cls, values: Mapping[str, str], strict: bool = True):
    """Instantiate ``cls`` from string values, coercing by field type."""
    hints = typing.get_type_hints(cls)
    names = field_names(cls)
    kwargs = {}
    for key, raw in values.items():
        if key not in names:
            if strict:
                raise ConfigError(f"unknown config key: {key}")
            continue
        kwargs[key] = _coerce(raw, hints[key], key)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def split_config(values: Mapping[str, str], *classes, extra: Iterable[str] = ()) -> list:
    """Build several dataclasses from one flat mapping.

    Each key must belong to one of ``classes`` or to ``extra``; the first
    unclaimed key is reported by name.
    """
    claimed = set(extra)
    for cls in classes:
        claimed |= field_names(cls)
    for key in values:
        if key not in claimed:
            raise ConfigError(f"unknown config key: {key}")
    return [build_dataclass(cls, {k: v for k, v in values.items() if k in field_names(cls)}) for cls in classes]


def dataclass_items(obj) -> dict[str, Any]:
    return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}
