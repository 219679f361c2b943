#!/usr/bin/env python3
"""
Linear solves for the coupled complex boundary method

The complex Robin problem is solved in real 2m x 2m block form

    K = [[A, -F],
         [F,  A]],   A = D + E

which does not change with the source, so one factorization serves the
forward CCBM system, the adjoint system and every iteration of a run.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from assembly import BoundaryValues, FemSystem, assemble_boundary_load
from errors import DimensionMismatch, SingularSystem

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
KRYLOV_TOL = 1e-12
PIVOT_TOL = 1e-14


@dataclass(frozen=True)
class ComplexFieldSplit:
    """Nodal values of the real and imaginary parts of a complex P1 field"""
    re: np.ndarray
    im: np.ndarray


@dataclass(eq=False)
class BlockFactorization:
    """Reusable solver for the coupled CCBM matrix"""
    K: sp.csc_matrix
    m: int
    method: str
    metadata: Dict[str, float] = field(default_factory=dict)
    _lu: Optional[spla.SuperLU] = field(default=None, repr=False)
    _ilu: Optional[spla.SuperLU] = field(default=None, repr=False)

    def _raw_solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._lu is not None:
            return self._lu.solve(rhs)
        preconditioner = spla.LinearOperator(self.K.shape, matvec=self._ilu.solve)
        x, info = spla.gmres(self.K, rhs, M=preconditioner, rtol=KRYLOV_TOL, atol=0.0,
                             restart=200, maxiter=50)
        if info != 0:
            logger.warning(f"GMRES stopped with info={info}")
        return x

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve K x = rhs; one refinement sweep if the residual contract is missed"""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (2 * self.m,):
            raise DimensionMismatch(f"right-hand side has shape {rhs.shape}, expected ({2 * self.m},)")
        norm_rhs = np.linalg.norm(rhs)
        if norm_rhs == 0.0:
            return np.zeros_like(rhs)

        x = self._raw_solve(rhs)
        residual = rhs - self.K @ x
        if np.linalg.norm(residual) > RESIDUAL_TOL * norm_rhs:
            x = x + self._raw_solve(residual)
            residual = rhs - self.K @ x
            relative = np.linalg.norm(residual) / norm_rhs
            if relative > RESIDUAL_TOL:
                logger.warning(f"CCBM solve residual {relative:.2e} above {RESIDUAL_TOL:.0e}")
        return x


def ccbm_matrix(system: FemSystem) -> sp.csc_matrix:
    A = system.A
    return sp.bmat([[A, -system.F], [system.F, A]], format="csc")


def factorize_ccbm(system: FemSystem, method: str = "direct", probe_seed: int = 0) -> BlockFactorization:
    """
    Factorize K once per mesh

    method: 'direct' (SuperLU with COLAMD ordering) or 'krylov'
    (GMRES with an incomplete-LU preconditioner). 'direct' falls back to
    'krylov' when the factorization runs out of memory.
    """
    K = ccbm_matrix(system)
    m = system.m
    norm_k = spla.norm(K, 1)
    start = time.perf_counter()

    lu = ilu = None
    if method == "direct":
        try:
            lu = spla.splu(K, permc_spec="COLAMD")
        except MemoryError:
            logger.warning("Direct factorization out of memory, falling back to GMRES/ILU")
            method = "krylov"
        except RuntimeError as e:
            raise SingularSystem(f"CCBM matrix is singular: {e}")
        if lu is not None:
            pivots = np.abs(lu.U.diagonal())
            if pivots.size and pivots.min() < PIVOT_TOL * norm_k:
                raise SingularSystem(f"pivot {pivots.min():.3e} below {PIVOT_TOL:.0e}*||K||")
    if method == "krylov":
        try:
            ilu = spla.spilu(K, drop_tol=1e-5, fill_factor=20)
        except RuntimeError as e:
            raise SingularSystem(f"incomplete factorization failed: {e}")
    elif method != "direct":
        raise ValueError(f"unknown factorization method '{method}'")

    fact = BlockFactorization(K=K, m=m, method=method, _lu=lu, _ilu=ilu)
    elapsed = time.perf_counter() - start

    probe = np.random.default_rng(probe_seed).standard_normal(2 * m)
    residual = np.linalg.norm(K @ fact.solve(probe) - probe) / np.linalg.norm(probe)
    fill = float((lu.L.nnz + lu.U.nnz) / K.nnz) if lu is not None else float(ilu.nnz / K.nnz)
    fact.metadata.update({'factor_time': elapsed, 'fill': fill, 'probe_residual': float(residual)})
    if residual > RESIDUAL_TOL:
        raise SingularSystem(f"factorization probe residual {residual:.2e} exceeds {RESIDUAL_TOL:.0e}")

    logger.info(f"Factorized CCBM system ({2 * m}x{2 * m}, {method}): "
                f"fill {fill:.1f}, {elapsed * 1e3:.1f} ms, probe residual {residual:.1e}")
    return fact


def _split(x: np.ndarray, m: int) -> ComplexFieldSplit:
    return ComplexFieldSplit(re=x[:m].copy(), im=x[m:].copy())


def solve_ccbm(fact: BlockFactorization, system: FemSystem, p: np.ndarray) -> ComplexFieldSplit:
    """(u_re, u_im) for source coefficients p on the region nodes"""
    p = np.asarray(p, dtype=float)
    if p.shape != (system.m0,):
        raise DimensionMismatch(f"source vector has shape {p.shape}, expected ({system.m0},)")
    rhs = np.concatenate([system.B @ p + system.b2, system.b1])
    return _split(fact.solve(rhs), system.m)


def solve_adjoint(fact: BlockFactorization, system: FemSystem, u_im: np.ndarray) -> ComplexFieldSplit:
    """(w_re, w_im) of the adjoint problem driven by u_im"""
    u_im = np.asarray(u_im, dtype=float)
    if u_im.shape != (system.m,):
        raise DimensionMismatch(f"u_im has shape {u_im.shape}, expected ({system.m},)")
    rhs = np.concatenate([system.E @ u_im, np.zeros(system.m)])
    return _split(fact.solve(rhs), system.m)


def solve_neumann(system: FemSystem, p: np.ndarray, g2: Optional[BoundaryValues] = None) -> np.ndarray:
    """u solving -Lap u + u = p chi_region with du/dn = g2"""
    p = np.asarray(p, dtype=float)
    if p.shape != (system.m0,):
        raise DimensionMismatch(f"source vector has shape {p.shape}, expected ({system.m0},)")
    rhs = system.B @ p
    if g2 is not None:
        rhs = rhs + assemble_boundary_load(system.mesh, g2, system.F)
    A = system.A.tocsc()
    u = spla.splu(A).solve(rhs)
    norm_rhs = np.linalg.norm(rhs)
    if norm_rhs > 0:
        relative = np.linalg.norm(rhs - A @ u) / norm_rhs
        if relative > RESIDUAL_TOL:
            logger.warning(f"Neumann solve residual {relative:.2e} above {RESIDUAL_TOL:.0e}")
    return u


def objective_value(fact: BlockFactorization, system: FemSystem, p: np.ndarray) -> float:
    """V_h(p) = 1/2 ||u_im(p)||^2 in L2(domain)"""
    u_im = solve_ccbm(fact, system, p).im
    return 0.5 * float(u_im @ (system.E @ u_im))


def objective_gradient(fact: BlockFactorization, system: FemSystem, p: np.ndarray) -> np.ndarray:
    """Coefficient gradient dV_h/dp = B^T w_im"""
    u_im = solve_ccbm(fact, system, p).im
    w_im = solve_adjoint(fact, system, u_im).im
    return system.B.T @ w_im
