"""
Discrete norms and discrepancy functions shared by every method
"""

import math

import numpy as np
import scipy.sparse as sp

from errors import DimensionMismatch, ZeroReference


def c0_constant(d: int, radius: float) -> float:
    """C0 = max(d, R) sqrt(2 pi)"""
    if d not in (2, 3):
        raise ValueError(f"spatial dimension must be 2 or 3, got {d}")
    if radius <= 0:
        raise ValueError("radius must be > 0")
    return max(d, radius) * math.sqrt(2.0 * math.pi)


def _quadratic(matrix: sp.spmatrix, v: np.ndarray, what: str) -> float:
    v = np.asarray(v, dtype=float)
    if v.shape != (matrix.shape[0],):
        raise DimensionMismatch(f"{what} has shape {v.shape}, expected ({matrix.shape[0]},)")
    # round-off can push the quadratic form slightly below zero
    return max(float(v @ (matrix @ v)), 0.0)


def norm_omega(E: sp.spmatrix, v: np.ndarray) -> float:
    """||v||_{0,Omega} = sqrt(v^T E v)"""
    return math.sqrt(_quadratic(E, v, "field"))


def norm_P(M0: sp.spmatrix, q: np.ndarray) -> float:
    """||q||_P = sqrt(q^T M0 q) on the permissible region"""
    return math.sqrt(_quadratic(M0, q, "region vector"))


def discrepancy_morozov(u_im: np.ndarray, E: sp.spmatrix, threshold: float) -> float:
    """chi = ||u_im|| - threshold"""
    return norm_omega(E, u_im) - threshold


def discrepancy_total_energy(u_im: np.ndarray, q: np.ndarray, E: sp.spmatrix, M0: sp.spmatrix,
                             threshold_sq: float) -> float:
    """chi_TE = ||u_im||^2 + ||q||_P^2 - threshold^2"""
    return _quadratic(E, u_im, "field") + _quadratic(M0, q, "velocity") - threshold_sq


def relative_l2_error(p: np.ndarray, p_true: np.ndarray, M0: sp.spmatrix) -> float:
    """||p - p_true||_P / ||p_true||_P"""
    reference = norm_P(M0, p_true)
    if reference == 0.0:
        raise ZeroReference("reference source has zero norm")
    return norm_P(M0, np.asarray(p, dtype=float) - np.asarray(p_true, dtype=float)) / reference
