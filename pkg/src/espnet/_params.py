import logging
import os
import pathlib
from collections import namedtuple

import yaml

__all__ = ['SwitchParams', 'ControllerParams', 'SimParams', 'WorkCost',
           'ReportParams', 'DEFAULTS', 'log_level_from_env']

logger = logging.getLogger(__name__)

path = pathlib.Path(__file__).parent.resolve()
with open(path / "config/defaults.yaml", "r") as f:
    DEFAULTS = yaml.safe_load(f)


def _defaults(group: str, fields: list[str]) -> tuple:
    return tuple(DEFAULTS[group][field] for field in fields)


SwitchParams = namedtuple(
    'SwitchParams',
    ['register_size', 'outer_ttl'],
    defaults=_defaults('switch', ['register_size', 'outer_ttl']),
)

ControllerParams = namedtuple(
    'ControllerParams',
    ['spd_priority_base', 'spi_retries', 'delete_retries'],
    defaults=_defaults('controller', ['spd_priority_base', 'spi_retries', 'delete_retries']),
)

SimParams = namedtuple(
    'SimParams',
    ['packet_interval', 'control_latency', 'link_delay'],
    defaults=_defaults('sim', ['packet_interval', 'control_latency', 'link_delay']),
)

WorkCost = namedtuple(
    'WorkCost',
    ['lookup', 'parse_byte', 'frame_byte', 'cipher_byte', 'auth_byte'],
    defaults=_defaults('work_cost', ['lookup', 'parse_byte', 'frame_byte', 'cipher_byte', 'auth_byte']),
)

ReportParams = namedtuple(
    'ReportParams',
    ['n_boot', 'confidence'],
    defaults=_defaults('report', ['n_boot', 'confidence']),
)


def _validate_group(params, cls, name: str):
    if params is None:
        return cls()  # all defaults
    if isinstance(params, cls):
        return params
    if isinstance(params, dict):
        unknown = set(params) - set(cls._fields)
        if unknown:
            raise ValueError(f"Unknown {name} parameters: {sorted(unknown)}.")
        return cls(**params)
    raise ValueError(
        f"{name} parameters of type {type(params)} not understood. "
        f"Please specify a dict or {cls.__name__} object."
    )


def validate_switch_params(params: dict | SwitchParams | None) -> SwitchParams:
    """Validates and returns a SwitchParams tuple.

    >>> validate_switch_params({'register_size': 16}).outer_ttl
    64
    """
    params = _validate_group(params, SwitchParams, 'Switch')
    if params.register_size <= 0:
        raise ValueError(f"Register size must be positive, found {params.register_size}.")
    if not 1 < params.outer_ttl < 256:
        raise ValueError(f"Outer ttl must be in (1, 255], found {params.outer_ttl}.")
    return params


def validate_controller_params(params: dict | ControllerParams | None) -> ControllerParams:
    """Validates and returns a ControllerParams tuple."""
    params = _validate_group(params, ControllerParams, 'Controller')
    if params.spi_retries < 1 or params.delete_retries < 0:
        raise ValueError("Retry counts must be non-negative (spi_retries >= 1).")
    return params


def validate_sim_params(params: dict | SimParams | None) -> SimParams:
    """Validates and returns a SimParams tuple.

    Control messages must be slower than data links, otherwise an old
    decryption SA could be removed while its last packets are in flight.
    """
    params = _validate_group(params, SimParams, 'Simulation')
    if params.packet_interval <= 0:
        raise ValueError(f"Packet interval must be positive, found {params.packet_interval}.")
    if params.link_delay < 0 or params.control_latency <= params.link_delay:
        raise ValueError(
            "Expected 0 <= link_delay < control_latency, found "
            f"link_delay={params.link_delay}, control_latency={params.control_latency}."
        )
    return params


def validate_work_cost(params: dict | WorkCost | None) -> WorkCost:
    """Validates and returns a WorkCost tuple."""
    params = _validate_group(params, WorkCost, 'Work cost')
    if any(v < 0 for v in params):
        raise ValueError(f"Work costs must be non-negative, found {params}.")
    return params


def validate_report_params(params: dict | ReportParams | None) -> ReportParams:
    """Validates and returns a ReportParams tuple."""
    params = _validate_group(params, ReportParams, 'Report')
    if not 0 < params.confidence < 100:
        raise ValueError(f"Confidence must be a percentage, found {params.confidence}.")
    return params


def log_level_from_env(default: str = 'WARNING') -> int:
    """Reads the ESPNET_LOG environment variable."""
    name = os.environ.get('ESPNET_LOG', default).upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        logger.warning(f"ESPNET_LOG={name!r} not understood, using {default}.")
        level = logging.getLevelName(default)
    return level
