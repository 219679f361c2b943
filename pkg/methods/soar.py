"""
Second order asymptotical regularization (SOAR)

The damped flow  p'' + eta(t) p' + w_im(p) = 0  on the permissible region is
integrated with the damped Stormer-Verlet scheme

    q_{k+1/2} = q_k - dt/2 (eta_k q_k + w_k)
    p_{k+1}   = p_k + dt q_{k+1/2}
    q_{k+1}   = q_{k+1/2} - dt/2 (eta_{k+1} q_{k+1/2} + w_{k+1})

where w_k is the nodal adjoint field w_im(p_k) on the region nodes. The
solve at p_{k+1} is kept for the next step, so every step costs one CCBM
and one adjoint solve.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple, Union

import numpy as np

from assembly import FemSystem
from data_gen import BoundaryData
from linsolve import BlockFactorization
from .base_method import (MOROZOV, TOTAL_ENERGY, BaseMethod, Evaluator, IterState, RunRecord,
                          StoppingRule, make_evaluator)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConstantDamping:
    eta: float = 0.05

    def at(self, t: float) -> float:
        return self.eta

    def validate(self):
        if self.eta < 0:
            raise ValueError("soar.eta must be >= 0")

    def describe(self) -> Dict:
        return {'damping': 'constant', 'eta': self.eta}


@dataclass(frozen=True)
class DynamicDamping:
    """eta(t) = r / t for t >= t0"""
    r: float = 5.0
    t0: float = 1.0

    def at(self, t: float) -> float:
        if t < self.t0:
            raise ValueError(f"dynamic damping evaluated at t={t} before t0={self.t0}")
        return self.r / t

    def validate(self):
        if self.r <= 0:
            raise ValueError("soar.r must be > 0")
        if self.t0 <= 0:
            raise ValueError("soar.t0 must be > 0")

    def describe(self) -> Dict:
        return {'damping': 'dynamic', 'r': self.r, 't0': self.t0}


DampingSchedule = Union[ConstantDamping, DynamicDamping]


@dataclass
class SoarConfig:
    dt: float = 10.0
    damping: DampingSchedule = field(default_factory=ConstantDamping)
    stopping: StoppingRule = field(default_factory=StoppingRule)
    p0: Union[float, np.ndarray] = 0.0
    q0: Union[float, np.ndarray] = 0.0
    t0: float = 1.0

    def validate(self):
        if not self.dt > 0:
            raise ValueError("soar.dt must be > 0")
        if self.t0 <= 0:
            raise ValueError("soar.t0 must be > 0")
        self.damping.validate()
        self.stopping.validate()


def soar_step(state: IterState, system: FemSystem, fact: BlockFactorization, config: SoarConfig,
              evaluate: Optional[Evaluator] = None) -> IterState:
    """One damped Stormer-Verlet step; config.dt may be negative for time reversal"""
    if evaluate is None:
        evaluate = make_evaluator(system, fact)
    dt = config.dt
    w = state.w_im
    if w is None:
        _, w = evaluate(state.p)

    t1 = state.t + dt
    q_half = state.q - 0.5 * dt * (config.damping.at(state.t) * state.q + w)
    p1 = state.p + dt * q_half
    u1, w1 = evaluate(p1)
    q1 = q_half - 0.5 * dt * (config.damping.at(t1) * q_half + w1)
    return IterState(k=state.k + 1, t=t1, p=p1, q=q1, p_prev=state.p, w_im=w1, u_im=u1)


class SoarMethod(BaseMethod):
    """SOAR with a constant or r/t damping schedule"""

    def __init__(self, config: SoarConfig, name: str = "SOAR"):
        super().__init__(name, config.stopping, p0=config.p0, q0=config.q0, t0=config.t0, dt=config.dt)
        self.config = config

    def validate(self):
        self.config.validate()

    def step(self, state: IterState, system: FemSystem, fact: BlockFactorization,
             evaluate: Evaluator) -> IterState:
        return soar_step(state, system, fact, self.config, evaluate)

    def get_parameters(self) -> Dict:
        params = {'dt': self.config.dt, 't0': self.config.t0,
                  'discrepancy': self.config.stopping.discrepancy}
        params.update(self.config.damping.describe())
        return params


def run(system: FemSystem, fact: BlockFactorization, data: BoundaryData, config: SoarConfig,
        p_true: Optional[np.ndarray] = None) -> RunRecord:
    return SoarMethod(config).run(system, fact, data, p_true)


# Named variants: damping schedule x discrepancy function
SOAR_PRESETS: Dict[str, Tuple[str, str]] = {
    'SOAR1': ('constant', MOROZOV),
    'SOAR2': ('constant', TOTAL_ENERGY),
    'SOAR3': ('dynamic', MOROZOV),
    'SOAR4': ('dynamic', TOTAL_ENERGY),
}


def soar_preset(name: str, dt: float = 10.0, eta: float = 0.05, r: float = 5.0, t0: float = 1.0,
                stopping: Optional[StoppingRule] = None, p0=0.0, q0=0.0) -> SoarMethod:
    try:
        damping_kind, discrepancy = SOAR_PRESETS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown SOAR variant '{name}' (known: {', '.join(SOAR_PRESETS)})")
    damping = ConstantDamping(eta) if damping_kind == 'constant' else DynamicDamping(r, t0)
    stopping = replace(stopping or StoppingRule(), discrepancy=discrepancy)
    config = SoarConfig(dt=dt, damping=damping, stopping=stopping, p0=p0, q0=q0, t0=t0)
    return SoarMethod(config, name=name.upper())


def nu_schedule(nu: float, k: int) -> Tuple[float, float]:
    """(dt_k, eta_k) discretization parameters under which the damped flow yields the nu-method"""
    if nu <= 0:
        raise ValueError("nu must be > 0")
    if k < 1:
        raise ValueError("k must be >= 1")
    dt_den = (k + 2 * nu - 1) * (2 * k + 4 * nu - 1)
    eta_den = 4 * (2 * k + 2 * nu - 3) * (2 * k + 2 * nu - 1) * (k + nu - 1)
    if dt_den == 0 or eta_den == 0:
        raise ValueError(f"nu schedule undefined at k={k}, nu={nu} (zero denominator)")
    dt_k = 4.0 * (2 * k + 2 * nu - 1) * (k + nu - 1) / dt_den
    eta_num = ((k + 2 * nu - 1) * (2 * k + 4 * nu - 1) * (2 * k + 2 * nu - 3)
               - (k - 1) * (2 * k - 3) * (3 * k + 3 * nu - 1))
    return dt_k, eta_num / eta_den
