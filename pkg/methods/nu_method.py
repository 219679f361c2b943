"""
nu-method (nu = 1/2 is the Chebyshev method)

    p^{k+1} = p^k + mu_k (p^k - p^{k-1}) - omega_k w^k,   k = 1, 2, ...

started from p^1 = p^0.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple, Union

import numpy as np

from assembly import FemSystem
from linsolve import BlockFactorization
from .base_method import BaseMethod, Evaluator, IterState, StoppingRule

logger = logging.getLogger(__name__)


def nu_coefficients(nu: float, k: int) -> Tuple[float, float]:
    """(mu_k, omega_k); k = 1 uses mu_1 = 0, omega_1 = (4 nu + 2)/(4 nu + 1)"""
    if nu <= 0:
        raise ValueError("nu must be > 0")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return 0.0, (4 * nu + 2) / (4 * nu + 1)
    common = (k + 2 * nu - 1) * (2 * k + 4 * nu - 1)
    mu = (k - 1) * (2 * k - 3) * (2 * k + 2 * nu - 1) / (common * (2 * k + 2 * nu - 3))
    omega = 4.0 * (2 * k + 2 * nu - 1) * (k + nu - 1) / common
    return mu, omega


def nu_step(k: int, p_k: np.ndarray, p_prev: np.ndarray, w_im: np.ndarray, nu: float) -> np.ndarray:
    mu, omega = nu_coefficients(nu, k)
    return p_k + mu * (p_k - p_prev) - omega * w_im


@dataclass
class NuConfig:
    nu: float = 0.5
    stopping: StoppingRule = field(default_factory=StoppingRule)
    p0: Union[float, np.ndarray] = 0.0

    def validate(self):
        if self.nu <= 0:
            raise ValueError("nu.nu must be > 0")
        self.stopping.validate()


class NuMethod(BaseMethod):

    def __init__(self, config: NuConfig, name: str = "nu-method"):
        super().__init__(name, config.stopping, p0=config.p0, q0=0.0)
        self.config = config

    def validate(self):
        self.config.validate()

    def step(self, state: IterState, system: FemSystem, fact: BlockFactorization,
             evaluate: Evaluator) -> IterState:
        # the first update carries formula index 1
        p1 = nu_step(state.k + 1, state.p, state.p_prev, state.w_im, self.config.nu)
        u1, w1 = evaluate(p1)
        return IterState(k=state.k + 1, t=state.t + 1.0, p=p1, q=p1 - state.p,
                         p_prev=state.p, w_im=w1, u_im=u1)

    def get_parameters(self) -> Dict:
        return {'nu': self.config.nu}
