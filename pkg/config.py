#!/usr/bin/env python3
"""
Configuration for the SOAR inverse source engine
Flat dotted keys; a JSON file and --set key=value overrides are merged on top
of DEFAULTS. Defaults reproduce the method comparison setting (Example 1).
"""

import copy
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Union

from errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULTS: Dict[str, Any] = {
    # =========================================================================
    # EXAMPLE
    # =========================================================================
    'example': 'example1',           # example1 | example2

    # =========================================================================
    # MESH
    # =========================================================================
    'mesh.radius': 1.0,
    'mesh.coarse_rings': 8,          # reconstruction mesh
    'mesh.measurement': 'refined',   # refined: nested red refinement of the reconstruction mesh | disk
    'mesh.refine_levels': 3,         # measurement mesh = reconstruction mesh refined this often
    'mesh.fine_rings': 64,           # measurement disk when mesh.measurement = disk
    'mesh.shape_c2': 10.0,           # shape-regularity warning bound on longest/inradius
    'mesh.solver': 'direct',         # direct | krylov

    # =========================================================================
    # NOISE
    # =========================================================================
    'noise.delta_prime': 0.05,       # 5% multiplicative noise
    'noise.seed': 0,

    # =========================================================================
    # DATA
    # =========================================================================
    'data.g2': 0.0,                  # Neumann data of the measurement
    'data.mesh_path': '',            # reconstruct on this mesh file instead of a disk mesh
    'data.path': '',                 # BDATA file on that mesh instead of synthetic data

    # =========================================================================
    # METHOD
    # =========================================================================
    'method.name': 'SOAR1',          # SOAR1-SOAR4 | DRM | NU | NESTEROV

    # =========================================================================
    # SOAR
    # =========================================================================
    'soar.dt': 10.0,
    'soar.eta': 0.05,                # constant damping (SOAR1, SOAR2)
    'soar.r': 5.0,                   # eta(t) = r/t (SOAR3, SOAR4)
    'soar.t0': 1.0,

    # =========================================================================
    # STOPPING
    # =========================================================================
    'stop.tau': 0.01,
    'stop.absorb_c0': True,          # threshold tau*delta instead of C0*tau*delta
    'stop.eps0': 1e-6,
    'stop.n_max': 50000,

    # =========================================================================
    # INITIAL STATE
    # =========================================================================
    'init.p0': 0.0,
    'init.q0': 0.0,

    # =========================================================================
    # DRM
    # =========================================================================
    'drm.eta': 1.0,
    'drm.dt': 10.0,
    'drm.c_eps': 0.1,                # eps(t) = c_eps / (t ln t)

    # =========================================================================
    # NU-METHOD
    # =========================================================================
    'nu.nu': 0.5,                    # Chebyshev method

    # =========================================================================
    # NESTEROV
    # =========================================================================
    'nesterov.alpha': 3.0,
    'nesterov.omega': 10.0,
    'nesterov.gradient_at': 'z',     # z (extrapolated point) | p

    # =========================================================================
    # SWEEP
    # =========================================================================
    'sweep.axis': 'delta_prime',     # delta_prime | tau | dt | eta | r | method
    'sweep.values': [2.0 ** -i for i in range(1, 7)],

    # =========================================================================
    # COMPARE
    # =========================================================================
    'compare.methods': ['DRM', 'NU', 'NESTEROV', 'SOAR1', 'SOAR2', 'SOAR3', 'SOAR4'],
    'compare.delta_primes': [0.05, 0.10, 0.20],

    # =========================================================================
    # OUTPUT
    # =========================================================================
    'output.excel': False,           # also write an .xlsx workbook for compare
}

# Named experiment settings applied between a config file and --set overrides
PROTOCOLS = {
    # large damping, explicit C0 in the threshold C0*tau*delta
    'noise_sweep': {
        'method.name': 'SOAR1',
        'stop.tau': 1.1,
        'stop.absorb_c0': False,
        'soar.dt': 1.0,
        'soar.eta': 1.0,
        'init.p0': 30.0,
        'init.q0': 0.0,
        'sweep.axis': 'delta_prime',
        'sweep.values': [2.0 ** -i for i in range(1, 7)],
    },
    # small damping with C0 absorbed into tau
    'small_damping': {
        'method.name': 'SOAR1',
        'stop.tau': 0.01,
        'stop.absorb_c0': True,
        'soar.dt': 10.0,
        'soar.eta': 0.1,
        'init.p0': 0.0,
        'init.q0': 0.0,
        'noise.delta_prime': 0.05,
    },
}

SWEEP_AXES = ('delta_prime', 'tau', 'dt', 'eta', 'r', 'method')

_POSITIVE = ['mesh.radius', 'soar.dt', 'soar.r', 'soar.t0', 'stop.tau', 'drm.dt', 'nu.nu', 'nesterov.omega']
_NON_NEGATIVE = ['noise.delta_prime', 'soar.eta', 'stop.eps0', 'stop.n_max', 'drm.eta', 'drm.c_eps']
_AT_LEAST_ONE = ['mesh.fine_rings', 'mesh.coarse_rings', 'mesh.refine_levels']
_CHOICES = {
    'mesh.measurement': ('refined', 'disk'),
    'mesh.solver': ('direct', 'krylov'),
    'nesterov.gradient_at': ('z', 'p'),
    'sweep.axis': SWEEP_AXES,
}


def flatten(mapping: Mapping, prefix: str = '') -> Dict[str, Any]:
    flat = {}
    for key, value in mapping.items():
        dotted = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, Mapping):
            flat.update(flatten(value, dotted))
        else:
            flat[dotted] = value
    return flat


def _coerce(key: str, value: Any) -> Any:
    default = DEFAULTS[key]
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", key)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", key)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", key)
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"expected a list, got {value!r}", key)
        return list(value)
    if not isinstance(value, str):
        raise ConfigError(f"expected a string, got {value!r}", key)
    return value


def merge(config: Dict[str, Any], updates: Mapping) -> Dict[str, Any]:
    for key, value in flatten(updates).items():
        if key not in DEFAULTS:
            raise ConfigError("unknown configuration key", key)
        config[key] = _coerce(key, value)
    return config


def parse_override(text: str) -> Dict[str, Any]:
    """'key=value' with value parsed as JSON, falling back to a plain string"""
    if '=' not in text:
        raise ConfigError(f"override '{text}' is not of the form key=value")
    key, raw = text.split('=', 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return {key: value}


def load_config(path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = (),
                protocol: Optional[str] = None) -> Dict[str, Any]:
    """DEFAULTS <- JSON file <- protocol <- overrides, then validated"""
    if protocol is not None and protocol not in PROTOCOLS:
        raise ConfigError(f"unknown protocol '{protocol}' (choose from {', '.join(PROTOCOLS)})")
    config = copy.deepcopy(DEFAULTS)
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})")
        except OSError as e:
            raise ConfigError(f"{path}: {e}")
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        # a provenance record carries the effective configuration under 'config'
        if isinstance(data.get('config'), dict):
            data = data['config']
        merge(config, data)
        logger.debug(f"Loaded configuration from {path}")
    if protocol is not None:
        merge(config, copy.deepcopy(PROTOCOLS[protocol]))
        logger.debug(f"Applied protocol {protocol}")
    for text in overrides:
        merge(config, parse_override(text))
    validate_config(config)
    return config


def validate_config(config: Mapping[str, Any]):
    from data_gen import EXAMPLES
    from methods.factory import METHOD_NAMES

    for key in _POSITIVE:
        if not config[key] > 0:
            raise ConfigError(f"must be > 0, got {config[key]}", key)
    for key in _NON_NEGATIVE:
        if config[key] < 0:
            raise ConfigError(f"must be >= 0, got {config[key]}", key)
    for key in _AT_LEAST_ONE:
        if config[key] < 1:
            raise ConfigError(f"must be >= 1, got {config[key]}", key)
    for key, choices in _CHOICES.items():
        if config[key] not in choices:
            raise ConfigError(f"must be one of {', '.join(choices)}, got '{config[key]}'", key)

    if config['example'].lower() not in EXAMPLES:
        raise ConfigError(f"unknown example '{config['example']}'", 'example')
    if (config['mesh.measurement'] == 'disk' and config['mesh.fine_rings'] <= config['mesh.coarse_rings']
            and not config['data.path']):
        raise ConfigError("measurement mesh must be finer than the reconstruction mesh", 'mesh.fine_rings')
    if config['method.name'].upper() not in METHOD_NAMES:
        raise ConfigError(f"unknown method '{config['method.name']}'", 'method.name')
    if config['nesterov.alpha'] < 3:
        raise ConfigError(f"must be >= 3, got {config['nesterov.alpha']}", 'nesterov.alpha')
    if config['drm.dt'] + config['soar.t0'] <= 1.0:
        raise ConfigError("soar.t0 + drm.dt must exceed 1", 'drm.dt')
    if config['data.path'] and not config['data.mesh_path']:
        raise ConfigError("data.path requires data.mesh_path", 'data.path')
    if not config['sweep.values']:
        raise ConfigError("sweep needs at least one value", 'sweep.values')
    for name in config['compare.methods']:
        if str(name).upper() not in METHOD_NAMES:
            raise ConfigError(f"unknown method '{name}'", 'compare.methods')
    for value in config['compare.delta_primes']:
        if not isinstance(value, (int, float)) or value < 0:
            raise ConfigError(f"noise fractions must be >= 0, got {value!r}", 'compare.delta_primes')
