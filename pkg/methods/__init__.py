# Regularization methods package: SOAR and the comparison baselines
from .base_method import BaseMethod, IterRow, IterState, RunRecord, StoppingRule, TerminationReason
from .discrepancy import (c0_constant, discrepancy_morozov, discrepancy_total_energy, norm_omega,
                          norm_P, relative_l2_error)
from .soar import ConstantDamping, DynamicDamping, SoarConfig, SoarMethod, nu_schedule, soar_preset, soar_step
from .drm import DrmConfig, DrmMethod, drm_step
from .nu_method import NuConfig, NuMethod, nu_coefficients, nu_step
from .nesterov import NesterovConfig, NesterovMethod, nesterov_momentum, nesterov_step
from .factory import METHOD_NAMES, build_method, run_baseline

__all__ = [
    'BaseMethod',
    'IterRow',
    'IterState',
    'RunRecord',
    'StoppingRule',
    'TerminationReason',
    'c0_constant',
    'discrepancy_morozov',
    'discrepancy_total_energy',
    'norm_omega',
    'norm_P',
    'relative_l2_error',
    'ConstantDamping',
    'DynamicDamping',
    'SoarConfig',
    'SoarMethod',
    'nu_schedule',
    'soar_preset',
    'soar_step',
    'DrmConfig',
    'DrmMethod',
    'drm_step',
    'NuConfig',
    'NuMethod',
    'nu_coefficients',
    'nu_step',
    'NesterovConfig',
    'NesterovMethod',
    'nesterov_momentum',
    'nesterov_step',
    'METHOD_NAMES',
    'build_method',
    'run_baseline',
]
