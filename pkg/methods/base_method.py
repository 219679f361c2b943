import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from assembly import FemSystem
from data_gen import BoundaryData
from errors import DimensionMismatch, InvalidBoundary, NonFiniteIterate
from linsolve import BlockFactorization, solve_adjoint, solve_ccbm
from .discrepancy import (c0_constant, discrepancy_morozov, discrepancy_total_energy,
                          norm_P, relative_l2_error)

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ['k', 't', 'chi', 'V', 'qnormP', 'l2err']

MOROZOV = 'morozov'
TOTAL_ENERGY = 'total_energy'
DISCREPANCIES = (MOROZOV, TOTAL_ENERGY)

# (u_im over the whole mesh, w_im at the region nodes) for a source vector
Evaluator = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


class TerminationReason(str, Enum):
    DISCREPANCY_MET = "DiscrepancyMet"
    MAX_ITERATIONS = "MaxIterations"


@dataclass
class IterRow:
    """One recorded iteration"""
    k: int
    t: float
    chi: float
    V: float
    qnormP: float
    l2err: Optional[float] = None


@dataclass
class RunRecord:
    """History and outcome of one regularization run"""
    method: str
    rows: List[IterRow] = field(default_factory=list)
    p: Optional[np.ndarray] = None
    reason: Optional[TerminationReason] = None
    notes: List[str] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return self.rows[-1].k if self.rows else 0

    @property
    def final_chi(self) -> float:
        return self.rows[-1].chi if self.rows else float('nan')

    @property
    def final_l2err(self) -> Optional[float]:
        return self.rows[-1].l2err if self.rows else None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(row) for row in self.rows], columns=RECORD_COLUMNS)

    def to_csv(self, path: Union[str, Path]):
        """
        k,t,chi,V,qnormP,l2err with a blank l2err when no ground truth was given

        V is 1/2 ||u_im||^2 and qnormP is the unsquared P-norm sqrt(q^T M0 q)
        of the velocity; chi_TE adds its square.
        """
        self.to_frame().to_csv(path, index=False, na_rep='')

    def summary(self) -> Dict:
        return {
            'method': self.method,
            'iterations': self.iterations,
            'reason': self.reason.value if self.reason else None,
            'final_chi': self.final_chi,
            'l2err': self.final_l2err,
            'notes': list(self.notes),
        }


@dataclass
class StoppingRule:
    """Discrepancy principle: stop once chi <= eps0 or after n_max updates"""
    tau: float = 0.01
    absorb_c0: bool = True
    eps0: float = 1e-6
    n_max: int = 50000
    discrepancy: str = MOROZOV
    c0: float = field(default_factory=lambda: c0_constant(2, 1.0))

    def threshold(self, delta: float) -> float:
        """tau*delta when C0 is absorbed into tau, C0*tau*delta otherwise"""
        scale = self.tau if self.absorb_c0 else self.c0 * self.tau
        return scale * delta

    def validate(self):
        if self.tau <= 0:
            raise ValueError("stop.tau must be > 0")
        if self.eps0 < 0:
            raise ValueError("stop.eps0 must be >= 0")
        if self.n_max < 0:
            raise ValueError("stop.n_max must be >= 0")
        if self.discrepancy not in DISCREPANCIES:
            raise ValueError(f"stop.discrepancy must be one of {DISCREPANCIES}, got '{self.discrepancy}'")


@dataclass
class IterState:
    """Iterate k of a run; w_im and u_im always belong to the current p"""
    k: int
    t: float
    p: np.ndarray
    q: np.ndarray
    p_prev: Optional[np.ndarray] = None
    w_im: Optional[np.ndarray] = None
    u_im: Optional[np.ndarray] = None

    def is_finite(self) -> bool:
        arrays = [self.p, self.q] + [a for a in (self.w_im, self.u_im) if a is not None]
        return all(np.all(np.isfinite(a)) for a in arrays)


def region_vector(value: Union[float, np.ndarray], m0: int, name: str) -> np.ndarray:
    """Broadcast a scalar or check a vector against the region size"""
    array = np.asarray(value, dtype=float)
    if array.ndim == 0:
        return np.full(m0, float(array))
    if array.shape != (m0,):
        raise DimensionMismatch(f"{name} has shape {array.shape}, expected ({m0},)")
    return array.copy()


def make_evaluator(system: FemSystem, fact: BlockFactorization) -> Evaluator:
    """Forward CCBM solve followed by the adjoint solve, two solves per call"""
    omega0_nodes = system.region.omega0_nodes

    def evaluate(p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        u_im = solve_ccbm(fact, system, p).im
        w_im = solve_adjoint(fact, system, u_im).im
        return u_im, w_im[omega0_nodes]

    return evaluate


class BaseMethod(ABC):
    """Abstract base class for all iterative regularization methods"""

    def __init__(self, name: str, stopping: StoppingRule, p0: Union[float, np.ndarray] = 0.0,
                 q0: Union[float, np.ndarray] = 0.0, t0: float = 1.0, dt: float = 1.0):
        self.name = name
        self.stopping = stopping
        self.p0 = p0
        self.q0 = q0
        self.t0 = t0
        self.dt = dt
        self.notes: List[str] = []

    @abstractmethod
    def step(self, state: IterState, system: FemSystem, fact: BlockFactorization,
             evaluate: Evaluator) -> IterState:
        """Advance one iteration - must be implemented by subclasses"""
        pass

    @abstractmethod
    def get_parameters(self) -> Dict:
        """Method-specific parameters for provenance records"""
        pass

    def validate(self):
        self.stopping.validate()

    def initial_state(self, system: FemSystem, evaluate: Evaluator) -> IterState:
        p = region_vector(self.p0, system.m0, "p0")
        q = region_vector(self.q0, system.m0, "q0")
        u_im, w_im = evaluate(p)
        return IterState(k=0, t=self.t0, p=p, q=q, p_prev=p.copy(), w_im=w_im, u_im=u_im)

    def discrepancy(self, state: IterState, system: FemSystem, threshold: float) -> float:
        if self.stopping.discrepancy == TOTAL_ENERGY:
            return discrepancy_total_energy(state.u_im, state.q, system.E, system.M0, threshold ** 2)
        return discrepancy_morozov(state.u_im, system.E, threshold)

    def _row(self, state: IterState, system: FemSystem, chi: float,
             p_true: Optional[np.ndarray]) -> IterRow:
        V = 0.5 * float(state.u_im @ (system.E @ state.u_im))
        l2err = relative_l2_error(state.p, p_true, system.M0) if p_true is not None else None
        return IterRow(k=state.k, t=state.t, chi=chi, V=V, qnormP=norm_P(system.M0, state.q), l2err=l2err)

    def run(self, system: FemSystem, fact: BlockFactorization, data: BoundaryData,
            p_true: Optional[np.ndarray] = None) -> RunRecord:
        """
        Iterate from (p0, q0) at t0 until the discrepancy drops to eps0 or
        n_max updates were made. The discrepancy of iterate k is checked
        before update k+1, so k = 0 can already stop the run.
        """
        self.validate()
        self.notes = []
        if not np.array_equal(data.nodes, system.mesh.boundary_nodes):
            raise InvalidBoundary("boundary data nodes do not match the mesh boundary cycle order")
        system = system.with_loads(data.g1, data.g2)
        evaluate = make_evaluator(system, fact)
        threshold = self.stopping.threshold(data.delta)

        record = RunRecord(method=self.name)
        state = self.initial_state(system, evaluate)
        while True:
            chi = self.discrepancy(state, system, threshold)
            record.rows.append(self._row(state, system, chi, p_true))
            logger.debug(f"{self.name} k={state.k} t={state.t:.4g} chi={chi:.6e}")

            if chi <= self.stopping.eps0:
                record.reason = TerminationReason.DISCREPANCY_MET
                break
            if state.k >= self.stopping.n_max:
                record.reason = TerminationReason.MAX_ITERATIONS
                break

            state = self.step(state, system, fact, evaluate)
            if not state.is_finite():
                raise NonFiniteIterate(state.k, self.name)

        record.p = state.p
        record.notes = list(self.notes)
        logger.info(f"{self.name}: {record.iterations} iterations, {record.reason.value}, "
                    f"chi={record.final_chi:.4e}")
        return record
