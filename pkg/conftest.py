"""
Shared fixtures: small disk meshes keep the default suite fast
"""

import numpy as np
import pytest

from assembly import assemble_system
from data_gen import BoundaryData, example_region, make_measurement, transfer_boundary
from linsolve import factorize_ccbm
from mesh import generate_disk_mesh, mark_region, refine_mesh, whole_domain


@pytest.fixture(scope="session")
def disk4():
    return generate_disk_mesh(1.0, 4)


@pytest.fixture(scope="session")
def whole4(disk4):
    region = mark_region(disk4, whole_domain)
    system = assemble_system(disk4, region)
    return system, factorize_ccbm(system)


@pytest.fixture(scope="session")
def square4(disk4):
    region = mark_region(disk4, lambda x: (np.abs(x[:, 0]) < 0.5) & (np.abs(x[:, 1]) < 0.5))
    system = assemble_system(disk4, region)
    return system, factorize_ccbm(system)


def constant_data(mesh, c: float, delta: float = 0.0) -> BoundaryData:
    """g1 = c, g2 = 0: exact Cauchy data of u = c with source p = c on the whole disk"""
    n = len(mesh.boundary_nodes)
    return BoundaryData(nodes=mesh.boundary_nodes.copy(), g1=np.full(n, c), g2=np.zeros(n), delta=delta)


@pytest.fixture(scope="session")
def example_data(disk4):
    """Exact Example 1 data measured on the once-refined 4-ring mesh, transferred back to it"""
    fine = refine_mesh(disk4, 1)
    exact = make_measurement(fine, example_region('example1', fine), 'example1')
    return transfer_boundary(fine, disk4, exact)
