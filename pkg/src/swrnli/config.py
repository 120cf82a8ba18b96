"""INI run configuration.

Each section maps onto one estimator's constructor parameters::

    [parser]
    epochs = 30
    encoder_hidden = 64

    [da]
    attend_hidden = 200
    lr = 3e-4

    [nli]
    architecture = da
    fusion = sa

Values are parsed as Python literals when possible and kept as strings otherwise.
"""
from __future__ import annotations

import ast
import configparser
import hashlib
import json
from pathlib import Path

from .exceptions import ContractError

SECTIONS = ("run", "parser", "nli", "da", "esim", "search", "probes")


def parse_value(text: str):
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    if lowered in ("none", "null", ""):
        return None
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def load_config(path) -> dict[str, dict]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read(path, encoding="utf-8")
    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        raise ContractError(f"{path}: unknown config sections {unknown}; expected {list(SECTIONS)}")
    return {s: {k: parse_value(v) for k, v in parser.items(s)} for s in parser.sections()}


def dump_config(config: dict[str, dict]) -> str:
    lines = []
    for section in sorted(config):
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v!r}" if isinstance(v, str) else f"{k} = {v}"
                     for k, v in sorted(config[section].items()))
        lines.append("")
    return "\n".join(lines)


def apply_overrides(config: dict[str, dict], overrides: list[str]) -> dict[str, dict]:
    """Apply ``section.key=value`` strings on top of ``config`` (a new dict is returned)."""
    out = {s: dict(v) for s, v in config.items()}
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.partition(".")
        if not sep or not dot or not name:
            raise ContractError(f"override {item!r} is not of the form section.key=value")
        if section not in SECTIONS:
            raise ContractError(f"unknown config section {section!r} in override {item!r}")
        out.setdefault(section, {})[name] = parse_value(value)
    return out


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


def estimator_kwargs(estimator_cls, section: dict) -> dict:
    """Keep only keys the estimator accepts; anything else is a configuration error."""
    allowed = set(estimator_cls._get_param_names())
    bad = sorted(set(section) - allowed)
    if bad:
        raise ContractError(f"{estimator_cls.__name__} has no parameters {bad}")
    return dict(section)
