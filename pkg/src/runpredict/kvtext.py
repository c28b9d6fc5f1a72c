"""Flat ``key = value`` text files used for configs and scenario files.

Lines are blank, ``# comment``, or ``key = value``.  Values keep their raw
string form; consumers coerce types with the ``take_*`` helpers, which pop
keys from a working dict so unknown leftovers can be reported.  Parse errors
carry the offending line number.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

from .errors import ConfigError

_MISSING = object()


def parse_kv(text: str, source: str = "<string>") -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key.isidentifier():
            raise ConfigError(f"{source}:{lineno}: bad key {key!r}")
        if key in pairs:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        pairs[key] = value.strip()
    return pairs


def read_kv(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_kv(text, source=str(path))


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ",".join(format_value(v) for v in value)
    if value is None:
        return ""
    return str(value)


def format_kv(pairs: Mapping[str, object], header: str | None = None) -> str:
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    lines.extend(f"{key} = {format_value(value)}" for key, value in pairs.items())
    return "\n".join(lines) + "\n"


def write_kv(path, pairs: Mapping[str, object], header: str | None = None) -> None:
    Path(path).write_text(format_kv(pairs, header))


def _take(pairs: dict, key: str, default):
    if key in pairs:
        return pairs.pop(key)
    if default is _MISSING:
        raise ConfigError(f"missing required key {key!r}")
    return _MISSING if default is _MISSING else default


def take_str(pairs: dict, key: str, default=_MISSING) -> str:
    value = _take(pairs, key, default)
    return value if isinstance(value, str) else value


def take_float(pairs: dict, key: str, default=_MISSING) -> float:
    value = _take(pairs, key, default)
    if not isinstance(value, str):
        return value
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected a number, got {value!r}") from exc


def take_int(pairs: dict, key: str, default=_MISSING) -> int:
    value = _take(pairs, key, default)
    if not isinstance(value, str):
        return value
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected an integer, got {value!r}") from exc


def take_bool(pairs: dict, key: str, default=_MISSING) -> bool:
    value = _take(pairs, key, default)
    if not isinstance(value, str):
        return value
    lowered = value.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(f"key {key!r}: expected true/false, got {value!r}")


def take_floats(pairs: dict, key: str, default=_MISSING) -> tuple[float, ...]:
    value = _take(pairs, key, default)
    if not isinstance(value, str):
        return tuple(value)
    parts = [p.strip() for p in value.split(",") if p.strip()]
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected comma-separated numbers") from exc


def take_strs(pairs: dict, key: str, default=_MISSING) -> tuple[str, ...]:
    value = _take(pairs, key, default)
    if not isinstance(value, str):
        return tuple(value)
    return tuple(p.strip() for p in value.split(",") if p.strip())


def reject_unknown(pairs: dict, source: str) -> None:
    if pairs:
        names = ", ".join(sorted(pairs))
        raise ConfigError(f"{source}: unknown keys: {names}")
