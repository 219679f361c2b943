"""
Build regularization methods from a flat configuration mapping
"""

import logging
from dataclasses import replace
from typing import Dict, List, Mapping, Optional, Union

import numpy as np

from assembly import FemSystem
from data_gen import BoundaryData
from linsolve import BlockFactorization
from .base_method import MOROZOV, BaseMethod, RunRecord, StoppingRule
from .drm import DrmConfig, DrmMethod
from .nesterov import NesterovConfig, NesterovMethod
from .nu_method import NuConfig, NuMethod
from .soar import SOAR_PRESETS, soar_preset

logger = logging.getLogger(__name__)

BASELINES = ['DRM', 'NU', 'NESTEROV']
METHOD_NAMES: List[str] = list(SOAR_PRESETS) + BASELINES

BaselineConfig = Union[DrmConfig, NuConfig, NesterovConfig]


def stopping_from_config(config: Mapping) -> StoppingRule:
    return StoppingRule(tau=float(config['stop.tau']), absorb_c0=bool(config['stop.absorb_c0']),
                        eps0=float(config['stop.eps0']), n_max=int(config['stop.n_max']))


def build_method(name: str, config: Mapping, p0: Optional[Union[float, np.ndarray]] = None) -> BaseMethod:
    """
    SOAR1-SOAR4, DRM, NU or NESTEROV from dotted config keys.
    p0 overrides init.p0 (e.g. a vector).
    """
    key = name.upper()
    stopping = stopping_from_config(config)
    p0 = config['init.p0'] if p0 is None else p0

    if key in SOAR_PRESETS:
        return soar_preset(key, dt=config['soar.dt'], eta=config['soar.eta'], r=config['soar.r'],
                           t0=config['soar.t0'], stopping=stopping, p0=p0, q0=config['init.q0'])
    if key == 'DRM':
        return DrmMethod(DrmConfig(eta=config['drm.eta'], dt=config['drm.dt'], c_eps=config['drm.c_eps'],
                                   stopping=stopping, p0=p0, q0=config['init.q0'], t0=config['soar.t0']))
    if key == 'NU':
        return NuMethod(NuConfig(nu=config['nu.nu'], stopping=stopping, p0=p0))
    if key == 'NESTEROV':
        return NesterovMethod(NesterovConfig(alpha=config['nesterov.alpha'], omega=config['nesterov.omega'],
                                             gradient_at=config['nesterov.gradient_at'],
                                             stopping=stopping, p0=p0))
    raise ValueError(f"unknown method '{name}' (known: {', '.join(METHOD_NAMES)})")


def baseline_method(cfg: BaselineConfig) -> BaseMethod:
    if isinstance(cfg, DrmConfig):
        return DrmMethod(cfg)
    if isinstance(cfg, NuConfig):
        return NuMethod(cfg)
    if isinstance(cfg, NesterovConfig):
        return NesterovMethod(cfg)
    raise TypeError(f"not a baseline configuration: {type(cfg).__name__}")


def run_baseline(system: FemSystem, fact: BlockFactorization, data: BoundaryData, cfg: BaselineConfig,
                 p_true: Optional[np.ndarray] = None) -> RunRecord:
    """Run DRM, the nu-method or Nesterov with Morozov stopping"""
    cfg = replace(cfg, stopping=replace(cfg.stopping, discrepancy=MOROZOV))
    return baseline_method(cfg).run(system, fact, data, p_true)


def describe_method(method: BaseMethod) -> Dict:
    info = {'method': method.name, 'tau': method.stopping.tau, 'absorb_c0': method.stopping.absorb_c0,
            'eps0': method.stopping.eps0, 'n_max': method.stopping.n_max,
            'discrepancy': method.stopping.discrepancy}
    info.update(method.get_parameters())
    return info
