"""INI-style experiment configs with per-section schemas.

Every key must appear in the schema; its default fixes the type.  Tuple
defaults read lists separated by commas, or by semicolons when the items
themselves contain commas.
"""
from __future__ import annotations

import configparser
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    pass


def _guess(raw: str):
    for kind in (int, float):
        try:
            return kind(raw)
        except ValueError:
            pass
    return raw


def _coerce(raw: str, default: Any, where: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            sep = ";" if ";" in raw else ","
            items = [s.strip() for s in raw.split(sep) if s.strip()]
            if default:
                return tuple(_coerce(s, default[0], where) for s in items)
            return tuple(_guess(s) for s in items)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {type(default).__name__}") from None


def parse(text: str, schema: Mapping[str, Mapping[str, Any]], source: str = "<config>") -> dict[str, dict[str, Any]]:
    """Parse ``text`` against ``schema``; missing keys take schema defaults."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(str(e)) from None
    out = {sec: dict(keys) for sec, keys in schema.items()}
    for sec in cp.sections():
        if sec not in schema:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in schema[sec]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]")
            out[sec][key] = _coerce(raw, schema[sec][key], f"{source} [{sec}] {key}")
    return out


def read_raw(text: str) -> dict[str, dict[str, str]]:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(str(e)) from None
    return {s: dict(cp.items(s)) for s in cp.sections()}


def load(path: str | Path, schema: Mapping[str, Mapping[str, Any]]) -> dict[str, dict[str, Any]]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e}") from None
    return parse(text, schema, str(p))


def dump(values: Mapping[str, Mapping[str, Any]]) -> str:
    """Inverse of ``parse`` for the value types it produces."""
    lines = []
    for sec, keys in values.items():
        lines.append(f"[{sec}]")
        for k, v in keys.items():
            if isinstance(v, tuple):
                sep = "; " if any(isinstance(x, str) and "," in x for x in v) else ", "
                v = sep.join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{k} = {v}")
        lines.append("")
    return "\n".join(lines)
