"""Plain ``key = value`` config files.

Blank lines and ``#`` comments are ignored.  Values are kept as strings;
callers convert.  Floats should be written with ``repr`` so that a
read/write cycle is bit-exact.
"""

from __future__ import annotations

from pathlib import Path


class ConfigError(ValueError):
    pass


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_kv(path: str | Path) -> dict[str, str]:
    return parse_kv(Path(path).read_text())


def format_kv(items: dict[str, object]) -> str:
    lines = []
    for key, value in items.items():
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def as_float(cfg: dict[str, str], key: str, default: float | None = None) -> float:
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return float(cfg[key])
    except ValueError:
        raise ConfigError(f"{key}: not a number: {cfg[key]!r}") from None


def as_int(cfg: dict[str, str], key: str, default: int | None = None) -> int:
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(cfg[key])
    except ValueError:
        raise ConfigError(f"{key}: not an integer: {cfg[key]!r}") from None


def parse_pmf(text: str) -> dict[int, float]:
    """Parse ``"1:0.5, 2:0.5"`` (keys may be negative for signed walks)."""
    pmf: dict[int, float] = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            k, p = item.split(":")
            pmf[int(k)] = float(p)
        except ValueError:
            raise ConfigError(f"bad pmf entry {item!r}; expected 'k:prob'") from None
    if not pmf:
        raise ConfigError("empty pmf")
    return pmf


def format_pmf(pmf: dict[int, float]) -> str:
    return ",".join(f"{k}:{float(p)!r}" for k, p in sorted(pmf.items()))
