"""
Nesterov acceleration

    z_k     = p^k + (k-1)/(k+alpha-1) (p^k - p^{k-1})
    p^{k+1} = z_k - omega w^k,        k = 1, 2, ...

w^k is taken at z_k by default; gradient_at='p' evaluates it at p^k instead.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Union

import numpy as np

from assembly import FemSystem
from linsolve import BlockFactorization, solve_ccbm
from .base_method import BaseMethod, Evaluator, IterState, StoppingRule

logger = logging.getLogger(__name__)

GRADIENT_POINTS = ('z', 'p')


def nesterov_momentum(k: int, alpha: float) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    if alpha < 3:
        raise ValueError("alpha must be >= 3")
    return (k - 1) / (k + alpha - 1)


def nesterov_extrapolate(k: int, p_k: np.ndarray, p_prev: np.ndarray, alpha: float) -> np.ndarray:
    return p_k + nesterov_momentum(k, alpha) * (p_k - p_prev)


def nesterov_step(k: int, p_k: np.ndarray, p_prev: np.ndarray, w_at_z: np.ndarray,
                  alpha: float, omega: float) -> np.ndarray:
    return nesterov_extrapolate(k, p_k, p_prev, alpha) - omega * w_at_z


@dataclass
class NesterovConfig:
    alpha: float = 3.0
    omega: float = 10.0
    gradient_at: str = 'z'
    stopping: StoppingRule = field(default_factory=StoppingRule)
    p0: Union[float, np.ndarray] = 0.0

    def validate(self):
        if self.alpha < 3:
            raise ValueError("nesterov.alpha must be >= 3")
        if self.omega <= 0:
            raise ValueError("nesterov.omega must be > 0")
        if self.gradient_at not in GRADIENT_POINTS:
            raise ValueError(f"nesterov.gradient_at must be one of {GRADIENT_POINTS}")
        self.stopping.validate()


class NesterovMethod(BaseMethod):

    def __init__(self, config: NesterovConfig, name: str = "Nesterov"):
        super().__init__(name, config.stopping, p0=config.p0, q0=0.0)
        self.config = config

    def validate(self):
        self.config.validate()

    def step(self, state: IterState, system: FemSystem, fact: BlockFactorization,
             evaluate: Evaluator) -> IterState:
        cfg = self.config
        k = state.k + 1
        z = nesterov_extrapolate(k, state.p, state.p_prev, cfg.alpha)
        if cfg.gradient_at == 'z':
            _, w = evaluate(z)
            p1 = z - cfg.omega * w
            # only the discrepancy is needed at p^{k+1}
            u1, w1 = solve_ccbm(fact, system, p1).im, None
        else:
            p1 = z - cfg.omega * state.w_im
            u1, w1 = evaluate(p1)
        return IterState(k=k, t=state.t + 1.0, p=p1, q=p1 - state.p,
                         p_prev=state.p, w_im=w1, u_im=u1)

    def get_parameters(self) -> Dict:
        return {'alpha': self.config.alpha, 'omega': self.config.omega,
                'gradient_at': self.config.gradient_at}
