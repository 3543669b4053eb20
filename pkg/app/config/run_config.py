"""
Run configuration loading.

A run is configured by one flat JSON document (see configs/) plus CLI
flag overrides. Every RunConfig key has exactly one flag, generated from
the schema: `--key-with-dashes VALUE`, or `--key/--no-key` for booleans.
Flags that are not given leave the file value in place.

Usage:
    parser = argparse.ArgumentParser()
    add_run_config_flags(parser)
    args = parser.parse_args()
    config = load_run_config(args.config, overrides_from_args(args))
"""

import argparse
import json
import logging
import os
import typing
from typing import Any, Dict, Optional

from pydantic import ValidationError

from app.schemas import RunConfig


logger = logging.getLogger(__name__)


class ConfigError(Exception):
    """Raised when a run configuration cannot be loaded or validated."""
    pass


def _base_type(annotation):
    """int for Optional[int], etc."""
    if typing.get_origin(annotation) is typing.Union:
        args = [a for a in typing.get_args(annotation) if a is not type(None)]
        return args[0]
    return annotation


def flag_name(key: str) -> str:
    return "--" + key.replace("_", "-")


def add_run_config_flags(parser: argparse.ArgumentParser) -> None:
    """Add --config and one override flag per RunConfig key."""
    parser.add_argument("--config", default=None, help="JSON run configuration file")
    group = parser.add_argument_group("run configuration overrides")
    for key, info in RunConfig.model_fields.items():
        kind = _base_type(info.annotation)
        if kind is bool:
            group.add_argument(
                flag_name(key),
                dest=key,
                action=argparse.BooleanOptionalAction,
                default=argparse.SUPPRESS,
                help=f"override '{key}' (default {info.default})",
            )
        else:
            group.add_argument(
                flag_name(key),
                dest=key,
                type=kind,
                default=argparse.SUPPRESS,
                metavar=kind.__name__.upper(),
                help=f"override '{key}' (default {info.default})",
            )


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """The RunConfig keys actually given on the command line."""
    return {key: getattr(args, key) for key in RunConfig.model_fields if hasattr(args, key)}


def load_run_config(
    path: Optional[str],
    overrides: Optional[Dict[str, Any]] = None,
    defaults: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """
    Merge a JSON config file with overrides and validate the result.

    Args:
        path: Config file, or None for schema defaults
        overrides: Keys taking precedence over the file
        defaults: Keys the file itself overrides (e.g. a checkpoint's config)

    Returns:
        RunConfig: Validated effective configuration

    Raises:
        ConfigError: If the file is unreadable, not a JSON object, or the
            merged document fails validation (including unknown keys)
    """
    document: Dict[str, Any] = dict(defaults or {})
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, encoding="utf-8") as f:
                from_file = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot parse config file {path}: {e}")
        if not isinstance(from_file, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        document.update(from_file)

    document.update(overrides or {})
    try:
        config = RunConfig(**document)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"invalid run configuration: {problems}")
    logger.debug(f"[CONFIG] effective run config: {config.model_dump()}")
    return config
