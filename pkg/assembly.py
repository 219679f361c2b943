#!/usr/bin/env python3
"""
P1 finite-element assembly for the coupled complex boundary method
Stiffness D, mass E, boundary mass F, source coupling B, region mass M0
and the boundary load vectors b1, b2
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, Mapping, Optional, Union

import numpy as np
import scipy.sparse as sp

from errors import DegenerateElement, EmptyRegion, InvalidBoundary, MissingBoundaryValue
from mesh import Mesh, RegionMask, triangle_geometry

logger = logging.getLogger(__name__)

DEGENERATE_AREA_FACTOR = 1e-14

# Reference P1 mass on a triangle, scaled by area/12
_LOCAL_MASS = np.array([[2.0, 1.0, 1.0],
                        [1.0, 2.0, 1.0],
                        [1.0, 1.0, 2.0]]) / 12.0

# Reference P1 mass on an edge, scaled by length/6
_EDGE_MASS = np.array([[2.0, 1.0],
                       [1.0, 2.0]]) / 6.0

BoundaryValues = Union[np.ndarray, Mapping[int, float]]


def _checked_areas(mesh: Mesh) -> np.ndarray:
    area, _, _ = triangle_geometry(mesh.nodes, mesh.triangles)
    bad = np.flatnonzero(area < DEGENERATE_AREA_FACTOR * mesh.h ** 2)
    if bad.size:
        raise DegenerateElement(f"{bad.size} degenerate triangles (first: {int(bad[0])})")
    return area


def _scatter(rows: np.ndarray, cols: np.ndarray, values: np.ndarray, shape) -> sp.csr_matrix:
    """Sum element contributions into a CSR matrix with sorted column indices"""
    matrix = sp.coo_matrix((values.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()
    matrix.sum_duplicates()
    matrix.sort_indices()
    return matrix


def _element_pairs(connectivity: np.ndarray):
    """Row/column index blocks for every (i, j) pair of local dofs"""
    n_local = connectivity.shape[1]
    rows = np.repeat(connectivity, n_local, axis=1).reshape(-1, n_local, n_local)
    cols = np.tile(connectivity, (1, n_local)).reshape(-1, n_local, n_local)
    return rows, cols


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """d_ls = integral of grad(psi_s).grad(psi_l) over the domain"""
    area = _checked_areas(mesh)
    xy = mesh.nodes[mesh.triangles]                       # (t, 3, 2)
    # b_i = y_{i+1} - y_{i+2}, c_i = x_{i+2} - x_{i+1}
    b = np.roll(xy[:, :, 1], -1, axis=1) - np.roll(xy[:, :, 1], -2, axis=1)
    c = np.roll(xy[:, :, 0], -2, axis=1) - np.roll(xy[:, :, 0], -1, axis=1)
    local = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (4.0 * area[:, None, None])

    rows, cols = _element_pairs(mesh.triangles)
    return _scatter(rows, cols, local, (mesh.n_nodes, mesh.n_nodes))


def _local_mass(mesh: Mesh, elements: Optional[np.ndarray] = None) -> np.ndarray:
    area = _checked_areas(mesh)
    if elements is not None:
        area = area[elements]
    return area[:, None, None] * _LOCAL_MASS[None, :, :]


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    """e_ls = integral of psi_s psi_l over the domain"""
    rows, cols = _element_pairs(mesh.triangles)
    return _scatter(rows, cols, _local_mass(mesh), (mesh.n_nodes, mesh.n_nodes))


def _require_region(region: RegionMask):
    if region is None or len(region.member_elements) == 0:
        raise EmptyRegion("permissible region is empty")


def assemble_region_mass(mesh: Mesh, region: RegionMask) -> sp.csr_matrix:
    """M0: mass matrix over the region, indexed by region-local node numbers"""
    _require_region(region)
    local_index = region.local_index(mesh.n_nodes)
    conn = local_index[mesh.triangles[region.member_elements]]
    rows, cols = _element_pairs(conn)
    return _scatter(rows, cols, _local_mass(mesh, region.member_elements), (region.m0, region.m0))


def assemble_source_coupling(mesh: Mesh, region: RegionMask) -> sp.csr_matrix:
    """B (m x m0): b_lj = integral over the region of psi_l psi_{k_j}"""
    _require_region(region)
    local_index = region.local_index(mesh.n_nodes)
    tri = mesh.triangles[region.member_elements]
    rows, _ = _element_pairs(tri)
    _, cols = _element_pairs(local_index[tri])
    return _scatter(rows, cols, _local_mass(mesh, region.member_elements), (mesh.n_nodes, region.m0))


def assemble_boundary_mass(mesh: Mesh) -> sp.csr_matrix:
    """f_ls = integral over the boundary of psi_s psi_l"""
    edges = mesh.boundary_edges
    if len(edges) == 0:
        raise InvalidBoundary("mesh has no boundary edges")
    length = np.linalg.norm(mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]], axis=1)
    if np.any(length <= 0):
        raise InvalidBoundary("zero-length boundary edge")
    local = length[:, None, None] * _EDGE_MASS[None, :, :]
    rows, cols = _element_pairs(edges)
    return _scatter(rows, cols, local, (mesh.n_nodes, mesh.n_nodes))


def extend_boundary_values(mesh: Mesh, g: BoundaryValues) -> np.ndarray:
    """Nodal vector equal to g on the boundary and zero inside"""
    boundary_nodes = mesh.boundary_nodes
    full = np.zeros(mesh.n_nodes)
    if isinstance(g, Mapping):
        missing = [int(n) for n in boundary_nodes if int(n) not in g]
        if missing:
            raise MissingBoundaryValue(f"no boundary value for node {missing[0]} ({len(missing)} missing)")
        full[boundary_nodes] = [float(g[int(n)]) for n in boundary_nodes]
    else:
        values = np.asarray(g, dtype=float).ravel()
        if values.shape[0] != boundary_nodes.shape[0]:
            raise MissingBoundaryValue(
                f"expected {boundary_nodes.shape[0]} boundary values, got {values.shape[0]}")
        full[boundary_nodes] = values
    if not np.all(np.isfinite(full)):
        raise MissingBoundaryValue("boundary values contain nan/inf")
    return full


def assemble_boundary_load(mesh: Mesh, g: BoundaryValues, boundary_mass: Optional[sp.spmatrix] = None) -> np.ndarray:
    """b_l = integral over the boundary of g psi_l, g piecewise linear on the boundary"""
    F = assemble_boundary_mass(mesh) if boundary_mass is None else boundary_mass
    return F @ extend_boundary_values(mesh, g)


@dataclass(frozen=True, eq=False)
class FemSystem:
    """Assembled matrices and loads of the discrete CCBM problem"""
    D: sp.csr_matrix
    E: sp.csr_matrix
    F: sp.csr_matrix
    B: sp.csr_matrix
    M0: sp.csr_matrix
    b1: np.ndarray
    b2: np.ndarray
    mesh: Mesh
    region: RegionMask

    @property
    def m(self) -> int:
        return self.mesh.n_nodes

    @property
    def m0(self) -> int:
        return self.region.m0

    @property
    def A(self) -> sp.csr_matrix:
        return (self.D + self.E).tocsr()

    def with_loads(self, g1: Optional[BoundaryValues] = None, g2: Optional[BoundaryValues] = None) -> "FemSystem":
        """Same matrices, new boundary data"""
        b1 = np.zeros(self.m) if g1 is None else assemble_boundary_load(self.mesh, g1, self.F)
        b2 = np.zeros(self.m) if g2 is None else assemble_boundary_load(self.mesh, g2, self.F)
        return replace(self, b1=b1, b2=b2)

    def summary(self) -> Dict[str, int]:
        return {
            'm': self.m,
            'm0': self.m0,
            'nnz_D': int(self.D.nnz),
            'nnz_E': int(self.E.nnz),
            'nnz_F': int(self.F.nnz),
            'nnz_B': int(self.B.nnz),
        }


def assemble_system(mesh: Mesh, region: RegionMask,
                    g1: Optional[BoundaryValues] = None,
                    g2: Optional[BoundaryValues] = None) -> FemSystem:
    """Assemble every matrix and load of the discrete problem; missing data means zero"""
    F = assemble_boundary_mass(mesh)
    system = FemSystem(
        D=assemble_stiffness(mesh),
        E=assemble_mass(mesh),
        F=F,
        B=assemble_source_coupling(mesh, region),
        M0=assemble_region_mass(mesh, region),
        b1=np.zeros(mesh.n_nodes),
        b2=np.zeros(mesh.n_nodes),
        mesh=mesh,
        region=region,
    )
    system = system.with_loads(g1, g2)
    logger.debug(f"Assembled FEM system: {system.summary()}")
    return system
