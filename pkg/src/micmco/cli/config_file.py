"""
Config Files
Flat UTF-8 key=value documents in dotenv syntax: one pair per line, '#' starts
a comment at the start of a line or after whitespace, values may be quoted
"""

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from dotenv.parser import Binding, parse_stream

from ..errors import ConfigError
from ..training.run_config import CONFIG_KEYS, RunConfig


@dataclass
class ConfigDocument:
    """Raw values as written, with the line each key came from"""
    values: Dict[str, str] = field(default_factory=dict)
    lines: Dict[str, int] = field(default_factory=dict)


def _line_of(binding: Binding) -> int:
    # the binding's mark sits before any blank lines that precede the pair
    text = binding.original.string
    leading = text[: len(text) - len(text.lstrip())]
    return binding.original.line + leading.count("\n")


def parse_key_values(text: str) -> ConfigDocument:
    """
    Split a key=value document with the dotenv parser

    Raises:
        ConfigError: a line without '=', an empty key, or a repeated key
    """
    doc = ConfigDocument()
    for binding in parse_stream(io.StringIO(text)):
        number = _line_of(binding)
        if binding.error:
            raw = binding.original.string.strip()
            if raw.startswith("="):
                raise ConfigError("empty key", line=number)
            raise ConfigError(f"expected key=value, got '{raw}'", line=number)
        if binding.key is None:
            continue
        if binding.value is None:
            raise ConfigError(f"expected key=value, got '{binding.original.string.strip()}'", line=number)
        key = binding.key
        if key in doc.values:
            raise ConfigError(f"repeated (first set on line {doc.lines[key]})", key=key, line=number)
        doc.values[key] = binding.value
        doc.lines[key] = number
    return doc


def read_text(path: Union[str, Path]) -> str:
    path = Path(path)
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"no such file '{path}'") from None
    except UnicodeDecodeError as e:
        raise ConfigError(f"'{path}' is not UTF-8: {e}") from None


def parse_run_config(text: str, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """RunConfig from config text; missing keys take their defaults"""
    doc = parse_key_values(text)
    values: Dict[str, Any] = dict(doc.values)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_values(values, doc.lines)


def load_run_config(path: Union[str, Path], overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    return parse_run_config(read_text(path), overrides)


def format_run_config(config: RunConfig) -> str:
    """Every key with its effective value, in documented order"""
    data = config.to_dict()
    data["n_latents"] = config.latent_spec().n_latents
    if "lam" not in config.model_fields_set:
        # derived for objective=power, where writing the default back would conflict
        data.pop("lambda", None)
    lines = [f"{key}={data[key]}" for key in CONFIG_KEYS if key in data]
    return "\n".join(lines) + "\n"
