#!/usr/bin/env python3
"""
Tests for P1 matrix and load assembly
"""

import numpy as np
import pytest

from assembly import (assemble_boundary_load, assemble_boundary_mass, assemble_mass, assemble_region_mass,
                      assemble_source_coupling, assemble_stiffness, assemble_system, extend_boundary_values)
from errors import DegenerateElement, EmptyRegion, InvalidBoundary, MissingBoundaryValue
from mesh import Mesh, boundary_param, mark_region, whole_domain


def test_stiffness_is_symmetric_with_zero_row_sums(disk4):
    D = assemble_stiffness(disk4)
    assert abs(D - D.T).max() < 1e-14
    assert np.allclose(D @ np.ones(disk4.n_nodes), 0.0, atol=1e-12)
    assert D.has_sorted_indices


def test_stiffness_energy_of_linear_function(disk4):
    D = assemble_stiffness(disk4)
    x = disk4.nodes[:, 0]
    # |grad x|^2 = 1, reproduced exactly by P1
    assert x @ D @ x == pytest.approx(disk4.areas().sum(), rel=1e-12)


def test_mass_matrix_integrates_constants(disk4):
    E = assemble_mass(disk4)
    ones = np.ones(disk4.n_nodes)
    assert ones @ E @ ones == pytest.approx(disk4.areas().sum(), rel=1e-12)
    assert np.all(np.linalg.eigvalsh(E.toarray()) > 0)


def test_region_mass_and_coupling(disk4):
    region = mark_region(disk4, lambda x: (np.abs(x[:, 0]) < 0.5) & (np.abs(x[:, 1]) < 0.5))
    M0 = assemble_region_mass(disk4, region)
    B = assemble_source_coupling(disk4, region)
    region_area = disk4.areas()[region.member_elements].sum()

    assert M0.shape == (region.m0, region.m0)
    assert B.shape == (disk4.n_nodes, region.m0)
    assert np.ones(region.m0) @ M0 @ np.ones(region.m0) == pytest.approx(region_area, rel=1e-12)
    assert np.allclose(np.asarray(B.sum(axis=0)).ravel(), np.asarray(M0.sum(axis=0)).ravel())
    # B^T w equals M0 applied to w on the region nodes
    w = np.sin(disk4.nodes[:, 0]) + disk4.nodes[:, 1] ** 2
    assert np.allclose(B.T @ w, M0 @ w[region.omega0_nodes], atol=1e-14)


def test_coupling_on_whole_domain_is_mass(disk4):
    region = mark_region(disk4, whole_domain)
    B = assemble_source_coupling(disk4, region)
    assert abs(B - assemble_mass(disk4)).max() < 1e-15


def test_boundary_mass_measures_perimeter(disk4):
    F = assemble_boundary_mass(disk4)
    ones = np.ones(disk4.n_nodes)
    assert ones @ F @ ones == pytest.approx(boundary_param(disk4).length, rel=1e-12)
    interior = np.setdiff1d(np.arange(disk4.n_nodes), disk4.boundary_nodes)
    assert F[interior].nnz == 0


def test_boundary_load_constant(disk4):
    load = assemble_boundary_load(disk4, np.full(len(disk4.boundary_nodes), 2.0))
    assert load.sum() == pytest.approx(2.0 * boundary_param(disk4).length, rel=1e-12)


def test_extend_boundary_values_from_mapping(disk4):
    g = {int(n): float(n) for n in disk4.boundary_nodes}
    full = extend_boundary_values(disk4, g)
    assert np.array_equal(full[disk4.boundary_nodes], disk4.boundary_nodes.astype(float))
    assert np.count_nonzero(full) == len(disk4.boundary_nodes)


def test_missing_boundary_value(disk4):
    g = {int(n): 1.0 for n in disk4.boundary_nodes[1:]}
    with pytest.raises(MissingBoundaryValue):
        extend_boundary_values(disk4, g)
    with pytest.raises(MissingBoundaryValue):
        extend_boundary_values(disk4, np.ones(3))


def test_degenerate_element_rejected():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    mesh = Mesh(nodes, np.array([[0, 1, 2]]), np.array([[0, 1], [1, 2], [2, 0]]), 2.0)
    with pytest.raises(DegenerateElement):
        assemble_stiffness(mesh)


def test_no_boundary_rejected(disk4):
    mesh = Mesh(disk4.nodes, disk4.triangles, np.zeros((0, 2), dtype=np.int64), disk4.h)
    with pytest.raises(InvalidBoundary):
        assemble_boundary_mass(mesh)


def test_empty_region_rejected(disk4):
    region = mark_region(disk4, whole_domain)
    empty = type(region)(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), {})
    with pytest.raises(EmptyRegion):
        assemble_region_mass(disk4, empty)


def test_system_with_loads_reuses_matrices(disk4):
    system = assemble_system(disk4, mark_region(disk4, whole_domain))
    assert not system.b1.any() and not system.b2.any()
    n = len(disk4.boundary_nodes)
    loaded = system.with_loads(np.ones(n), np.zeros(n))
    assert loaded.D is system.D and loaded.F is system.F
    assert np.allclose(loaded.b1, system.F @ extend_boundary_values(disk4, np.ones(n)))
    assert system.summary()['m'] == disk4.n_nodes


REFERENCE = Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]),
                 np.array([[0, 1], [1, 2], [2, 0]]), np.sqrt(2.0))


def test_reference_triangle_matrices():
    D = assemble_stiffness(REFERENCE).toarray()
    E = assemble_mass(REFERENCE).toarray()
    assert np.allclose(D, [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]], atol=1e-15)
    assert np.allclose(E, np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24.0, atol=1e-15)


def test_stiffness_is_scale_invariant():
    doubled = Mesh(2.0 * REFERENCE.nodes, REFERENCE.triangles, REFERENCE.boundary_edges, 2.0 * REFERENCE.h)
    D = assemble_stiffness(REFERENCE).toarray()
    assert np.allclose(assemble_stiffness(doubled).toarray(), D, atol=1e-15)
    assert np.allclose(assemble_mass(doubled).toarray(), 4.0 * assemble_mass(REFERENCE).toarray(), atol=1e-15)


def test_single_edge_boundary_mass():
    segment = Mesh(np.array([[0.0, 0.0], [3.0, 0.0]]), np.zeros((0, 3), dtype=np.int64),
                   np.array([[0, 1]]), 3.0)
    F = assemble_boundary_mass(segment).toarray()
    assert np.allclose(F, 0.5 * np.array([[2.0, 1.0], [1.0, 2.0]]), atol=1e-15)


def test_assembly_ignores_element_order(disk4):
    rng = np.random.default_rng(3)
    order = rng.permutation(disk4.n_triangles)
    rotated = np.roll(disk4.triangles[order], 1, axis=1)
    shuffled = Mesh(disk4.nodes, rotated, disk4.boundary_edges, disk4.h)
    region, shuffled_region = mark_region(disk4, whole_domain), mark_region(shuffled, whole_domain)
    for assemble in (assemble_stiffness, assemble_mass, assemble_boundary_mass):
        assert abs(assemble(disk4) - assemble(shuffled)).max() < 1e-14
    B, B_shuffled = assemble_source_coupling(disk4, region), assemble_source_coupling(shuffled, shuffled_region)
    assert np.array_equal(region.omega0_nodes, shuffled_region.omega0_nodes)
    assert abs(B - B_shuffled).max() < 1e-14
