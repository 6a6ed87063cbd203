"""TOML config files for ``TrainConfig`` with ``section.key=value`` overrides."""
from __future__ import annotations

import copy
import dataclasses
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from .errors import ConfigurationError
from .training import TrainConfig

SECTIONS = ("model", "data", "train", "freezeout")


def _coerce(section, key, value, current):
    where = f"{section}.{key}"
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigurationError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(current, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(current, list):
        if isinstance(value, int) and not isinstance(value, bool):
            value = [value]
        if not isinstance(value, list) or not all(isinstance(v, int) for v in value):
            raise ConfigurationError(f"{where}: expected a list of integers, got {value!r}")
        return list(value)
    if isinstance(current, str):
        if not isinstance(value, str):
            raise ConfigurationError(f"{where}: expected a string, got {value!r}")
        return value
    raise ConfigurationError(f"{where}: unsupported value {value!r}")


def _set(config, section, key, value):
    if section not in SECTIONS:
        raise ConfigurationError(f"unknown config section {section!r}")
    sec = getattr(config, section)
    names = {f.name for f in dataclasses.fields(sec)}
    if key not in names:
        raise ConfigurationError(f"unknown config key {section}.{key}")
    setattr(sec, key, _coerce(section, key, value, getattr(sec, key)))


def from_dict(raw, base=None):
    config = TrainConfig() if base is None else _copy(base)
    for section, body in raw.items():
        if section not in SECTIONS:
            raise ConfigurationError(f"unknown config section {section!r}")
        if not isinstance(body, dict):
            raise ConfigurationError(f"[{section}] must be a table")
        for key, value in body.items():
            _set(config, section, key, value)
    return config


def _copy(config):
    return copy.deepcopy(config)


def to_dict(config):
    return {s: dataclasses.asdict(getattr(config, s)) for s in SECTIONS}


def loads(text):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config parse error: {exc}") from None
    return from_dict(raw).validate()


def load(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    return loads(path.read_text())


def dumps(config):
    return tomli_w.dumps(to_dict(config))


def _parse_value(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(config, overrides):
    """Apply ``section.key=value`` strings; a bare ``key`` must name a unique field."""
    config = _copy(config)
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not key=value")
        dotted, text = item.split("=", 1)
        dotted = dotted.strip()
        if "." in dotted:
            section, key = dotted.split(".", 1)
        else:
            owners = [s for s in SECTIONS
                      if dotted in {f.name for f in dataclasses.fields(getattr(config, s))}]
            if len(owners) != 1:
                raise ConfigurationError(
                    f"unknown config key {dotted}" if not owners
                    else f"ambiguous config key {dotted}; use one of "
                         + ", ".join(f"{s}.{dotted}" for s in owners))
            section, key = owners[0], dotted
        _set(config, section, key, _parse_value(text.strip()))
    return config.validate()
