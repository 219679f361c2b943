#!/usr/bin/env python3
"""
Tests for the coupled CCBM solves, the adjoint gradient and the Neumann solver
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from assembly import assemble_system
from errors import DimensionMismatch
from linsolve import (factorize_ccbm, objective_gradient, objective_value, solve_adjoint, solve_ccbm,
                      solve_neumann)
from mesh import generate_disk_mesh, mark_region, whole_domain
from methods import norm_omega


def _boundary_angle(mesh):
    xy = mesh.nodes[mesh.boundary_nodes]
    return np.arctan2(xy[:, 1], xy[:, 0])


def test_factorization_metadata(whole4):
    system, fact = whole4
    assert fact.method == "direct"
    assert fact.metadata['probe_residual'] < 1e-10
    assert fact.metadata['fill'] >= 1.0
    assert fact.K.shape == (2 * system.m, 2 * system.m)


def test_solve_satisfies_block_system(square4):
    system, fact = square4
    theta = _boundary_angle(system.mesh)
    loaded = system.with_loads(np.cos(theta), np.sin(2 * theta))
    p = np.linspace(0.5, 1.5, system.m0)
    u = solve_ccbm(fact, loaded, p)
    A = loaded.A
    assert np.allclose(A @ u.re - loaded.F @ u.im, loaded.B @ p + loaded.b2, atol=1e-11)
    assert np.allclose(loaded.F @ u.re + A @ u.im, loaded.b1, atol=1e-11)


def test_gradient_identity(square4):
    system, fact = square4
    theta = _boundary_angle(system.mesh)
    loaded = system.with_loads(1.0 + 0.3 * np.cos(theta), 0.2 * np.sin(theta))
    rng = np.random.default_rng(7)
    p = rng.standard_normal(system.m0)
    grad = objective_gradient(fact, loaded, p)

    eps = 1e-6
    for _ in range(10):
        d = rng.standard_normal(system.m0)
        fd = (objective_value(fact, loaded, p + eps * d) - objective_value(fact, loaded, p - eps * d)) / (2 * eps)
        exact = d @ grad
        assert abs(fd - exact) <= 1e-5 * max(abs(exact), 1e-12)


def test_gradient_is_mass_weighted_adjoint(square4):
    system, fact = square4
    theta = _boundary_angle(system.mesh)
    loaded = system.with_loads(np.cos(theta), None)
    p = np.ones(system.m0)
    u_im = solve_ccbm(fact, loaded, p).im
    w_im = solve_adjoint(fact, loaded, u_im).im
    assert np.allclose(objective_gradient(fact, loaded, p), loaded.M0 @ w_im[loaded.region.omega0_nodes])


@pytest.mark.parametrize("c", [1.0, 2.5])
def test_constant_solution_is_exact(whole4, c):
    system, fact = whole4
    n = len(system.mesh.boundary_nodes)
    loaded = system.with_loads(np.full(n, c), np.zeros(n))
    u = solve_ccbm(fact, loaded, np.full(system.m0, c))
    assert norm_omega(loaded.E, u.im) <= 1e-10
    assert np.allclose(u.re, c, atol=1e-10)


def test_zero_boundary_coupling_decouples(whole4):
    system, _ = whole4
    decoupled = replace(system, F=0 * system.F)
    fact = factorize_ccbm(decoupled)
    p = np.ones(system.m0)
    u = solve_ccbm(fact, decoupled, p)
    assert np.allclose(system.A @ u.re, system.B @ p, atol=1e-11)
    assert np.allclose(u.im, 0.0)


def test_krylov_matches_direct(square4):
    system, direct = square4
    krylov = factorize_ccbm(system, method="krylov")
    theta = _boundary_angle(system.mesh)
    loaded = system.with_loads(np.cos(theta), np.zeros(len(theta)))
    p = np.linspace(0.0, 1.0, system.m0)
    a = solve_ccbm(direct, loaded, p)
    b = solve_ccbm(krylov, loaded, p)
    assert np.allclose(a.re, b.re, atol=1e-8) and np.allclose(a.im, b.im, atol=1e-8)


def test_unknown_factorization_method(whole4):
    system, _ = whole4
    with pytest.raises(ValueError):
        factorize_ccbm(system, method="cholesky")


def test_dimension_checks(whole4):
    system, fact = whole4
    with pytest.raises(DimensionMismatch):
        solve_ccbm(fact, system, np.ones(system.m0 + 1))
    with pytest.raises(DimensionMismatch):
        solve_adjoint(fact, system, np.ones(3))
    with pytest.raises(DimensionMismatch):
        fact.solve(np.ones(system.m))
    assert not fact.solve(np.zeros(2 * system.m)).any()


def test_neumann_convergence_order():
    """u = 1 + x1 solves -Lap u + u = 1 + x1 with du/dn = x1 on the unit circle"""
    errors, sizes = [], []
    for n_rings in (8, 16, 32):
        mesh = generate_disk_mesh(1.0, n_rings)
        system = assemble_system(mesh, mark_region(mesh, whole_domain))
        exact = 1.0 + mesh.nodes[:, 0]
        u = solve_neumann(system, exact, mesh.nodes[mesh.boundary_nodes, 0])
        e = u - exact
        errors.append(math.sqrt(e @ (system.A @ e)))
        sizes.append(mesh.h)
    for k in range(2):
        rate = math.log(errors[k] / errors[k + 1]) / math.log(sizes[k] / sizes[k + 1])
        assert rate >= 0.9
