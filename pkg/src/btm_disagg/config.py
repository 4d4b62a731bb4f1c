"""TOML configuration shared by synthesis and disaggregation.

A file may be flat (``key = value`` lines) or use ``[synth]`` and
``[pipeline]`` tables. Flat keys are routed to whichever section declares
them; anything else is rejected.
"""

from __future__ import annotations

from .errors import ConfigError

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


def _known_keys():
    from dataclasses import fields

    from .pipeline import PipelineConfig
    from .synthetic import SynthConfig

    return {
        "synth": {f.name for f in fields(SynthConfig)},
        "pipeline": {f.name for f in fields(PipelineConfig)},
    }


def read_config(path, known=None):
    """Split a config file into per-section mappings.

    ``known`` maps each section name to the set of keys it accepts; by
    default the fields of the synthesis and pipeline configs.
    """
    known = _known_keys() if known is None else known
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out = {name: {} for name in known}
    for key, value in data.items():
        if key in known and isinstance(value, dict):
            out[key].update(value)
            continue
        owners = [name for name, keys in known.items() if key in keys]
        if not owners:
            raise ConfigError(f"{path}: unknown config key {key!r}")
        for name in owners:
            out[name][key] = value
    return out
