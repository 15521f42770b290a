"""Flat ``key = value`` configuration with dotted section prefixes.

Grammar, one entry per line::

    # comment
    graphon.family = product
    sizes = 64, 128, 256
    filter.c = 0.1

Blank lines and ``#`` comments are ignored. Values are kept as strings and
converted on access by the typed getters, so ``--set key=value`` overrides
behave exactly like file entries. A key given twice keeps the last value.
"""

from __future__ import annotations

import builtins
import re

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z0-9_]+)*$")
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    pass


def _entry(text: str, where: str):
    if "=" not in text:
        raise ConfigError(f"{where}: expected 'key = value', got {text!r}")
    key, value = (s.strip() for s in text.split("=", 1))
    if not _KEY.match(key):
        raise ConfigError(f"{where}: invalid key {key!r}")
    return key, value


def parse_config(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if line:
            key, value = _entry(line, f"{source}:{lineno}")
            out[key] = value
    return out


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return parse_config(fh.read(), str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def apply_overrides(cfg: dict, overrides) -> dict:
    out = dict(cfg)
    for item in overrides or ():
        key, value = _entry(item, "--set")
        out[key] = value
    return out


class Config:
    """Typed read access; every key read is recorded so unknown keys can be reported."""

    def __init__(self, values: dict):
        self.values = dict(values)
        self.used = set()

    def _raw(self, key, default):
        self.used.add(key)
        return self.values.get(key, default)

    def str(self, key, default=None, choices=None):
        v = self._raw(key, default)
        if v is None:
            raise ConfigError(f"missing required key {key!r}")
        v = str(v).strip()
        if choices is not None and v not in choices:
            raise ConfigError(f"{key} must be one of {sorted(choices)}, got {v!r}")
        return v

    def int(self, key, default=None, minimum=None):
        v = self._raw(key, default)
        try:
            out = int(v)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} must be an integer, got {v!r}") from None
        if minimum is not None and out < minimum:
            raise ConfigError(f"{key} must be >= {minimum}, got {out}")
        return out

    def float(self, key, default=None, lo=None, hi=None):
        v = self._raw(key, default)
        try:
            out = float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} must be a number, got {v!r}") from None
        if (lo is not None and out < lo) or (hi is not None and out > hi):
            raise ConfigError(f"{key} must lie in [{lo}, {hi}], got {out}")
        return out

    def optional_float(self, key):
        return None if self.values.get(key) in (None, "") else self.float(key)

    def bool(self, key, default=False):
        v = self._raw(key, default)
        if isinstance(v, bool):
            return v
        s = str(v).strip().lower()
        if s in _TRUE:
            return True
        if s in _FALSE:
            return False
        raise ConfigError(f"{key} must be a boolean, got {v!r}")

    def list(self, key, default=None, kind=builtins.str, nonempty=True):
        v = self._raw(key, default)
        if v is None:
            raise ConfigError(f"missing required key {key!r}")
        items = v if isinstance(v, (list, tuple)) else [s.strip() for s in str(v).split(",")]
        items = [s for s in items if s != ""]
        if nonempty and not items:
            raise ConfigError(f"{key} must not be empty")
        try:
            return [kind(s) for s in items]
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: cannot read {items!r} as {kind.__name__}") from None

    def sizes(self, key, default=None, minimum=2):
        out = self.list(key, default, int)
        if any(n < minimum for n in out):
            raise ConfigError(f"{key}: sizes must be at least {minimum}")
        return out

    def unused(self):
        return sorted(set(self.values) - self.used)
