"""
Dynamical regularization method (DRM)

    q_{k+1} = (q_k - dt (w_k + eps(t_{k+1}) p_k)) / (1 + eta dt)
    p_{k+1} = p_k + dt q_{k+1}

with the vanishing Tikhonov weight eps(t) = c_eps / (t ln t).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Union

import numpy as np

from assembly import FemSystem
from linsolve import BlockFactorization
from .base_method import BaseMethod, Evaluator, IterState, StoppingRule, make_evaluator

logger = logging.getLogger(__name__)


def drm_epsilon(t: float, c_eps: float = 0.1) -> float:
    """eps(t) = c_eps / (t ln t), defined for t > 1"""
    if t <= 1.0:
        raise ValueError(f"eps(t) = c/(t ln t) is undefined at t={t}")
    return c_eps / (t * math.log(t))


@dataclass
class DrmConfig:
    eta: float = 1.0
    dt: float = 10.0
    c_eps: float = 0.1
    stopping: StoppingRule = field(default_factory=StoppingRule)
    p0: Union[float, np.ndarray] = 0.0
    q0: Union[float, np.ndarray] = 0.0
    t0: float = 1.0

    def validate(self):
        if self.eta < 0:
            raise ValueError("drm.eta must be >= 0")
        if not self.dt > 0:
            raise ValueError("drm.dt must be > 0")
        if self.c_eps < 0:
            raise ValueError("drm.c_eps must be >= 0")
        if self.t0 + self.dt <= 1.0:
            raise ValueError("drm: t0 + dt must exceed 1 for eps(t) to be defined")
        self.stopping.validate()


def drm_step(state: IterState, system: FemSystem, fact: BlockFactorization, cfg: DrmConfig,
             evaluate: Optional[Evaluator] = None) -> IterState:
    """One DRM update; eps is taken at t_{k+1} since eps(t0 = 1) is singular"""
    if evaluate is None:
        evaluate = make_evaluator(system, fact)
    w = state.w_im
    if w is None:
        _, w = evaluate(state.p)

    t1 = state.t + cfg.dt
    eps = drm_epsilon(t1, cfg.c_eps) if cfg.c_eps > 0 else 0.0
    q1 = (state.q - cfg.dt * (w + eps * state.p)) / (1.0 + cfg.eta * cfg.dt)
    p1 = state.p + cfg.dt * q1
    u1, w1 = evaluate(p1)
    return IterState(k=state.k + 1, t=t1, p=p1, q=q1, p_prev=state.p, w_im=w1, u_im=u1)


class DrmMethod(BaseMethod):

    def __init__(self, config: DrmConfig, name: str = "DRM"):
        super().__init__(name, config.stopping, p0=config.p0, q0=config.q0, t0=config.t0, dt=config.dt)
        self.config = config

    def validate(self):
        self.config.validate()

    def initial_state(self, system: FemSystem, evaluate: Evaluator) -> IterState:
        state = super().initial_state(system, evaluate)
        if self.config.c_eps > 0:
            t1 = self.config.t0 + self.config.dt
            note = (f"eps(t) evaluated at t_(k+1); first update uses "
                    f"eps({t1:g}) = {drm_epsilon(t1, self.config.c_eps):.6g}")
            self.notes.append(note)
            logger.info(f"{self.name}: {note}")
        return state

    def step(self, state: IterState, system: FemSystem, fact: BlockFactorization,
             evaluate: Evaluator) -> IterState:
        return drm_step(state, system, fact, self.config, evaluate)

    def get_parameters(self) -> Dict:
        return {'eta': self.config.eta, 'dt': self.config.dt, 'c_eps': self.config.c_eps,
                't0': self.config.t0}
