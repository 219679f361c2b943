#!/usr/bin/env python3
"""
Synthetic measurement data
Fine-mesh Neumann forward solve, trace extraction, seeded multiplicative
noise and arc-length transfer of boundary data between meshes
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, Optional, Union

import numpy as np

from assembly import assemble_system
from errors import EmptyRegion, InvalidBoundary, MissingBoundaryValue, ParseError
from linsolve import solve_neumann
from mesh import Mesh, RegionMask, boundary_param, mark_region

logger = logging.getLogger(__name__)

BDATA_HEADER = "BDATA v1"

PointFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ExampleProblem:
    """Permissible region and true source of a synthetic experiment"""
    name: str
    region: PointFunction       # (n, 2) points -> bool
    source: PointFunction       # (n, 2) points -> values


def _square_region(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    return (np.abs(x) < 0.5) & (np.abs(y) < 0.5)


def _linear_source(points: np.ndarray) -> np.ndarray:
    return 1.0 + points[:, 0] + points[:, 1]


def _two_disk_region(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    return ((x + 0.5) ** 2 + y ** 2 < 0.01) | ((x - 0.5) ** 2 + y ** 2 < 0.01)


def _two_disk_source(points: np.ndarray) -> np.ndarray:
    # left disk carries the linear profile, right disk the exponential one
    s = 1.0 + points[:, 0] + points[:, 1]
    return np.where(points[:, 0] < 0.0, s, np.exp(s))


EXAMPLES: Dict[str, ExampleProblem] = {
    'example1': ExampleProblem('example1', _square_region, _linear_source),
    'example2': ExampleProblem('example2', _two_disk_region, _two_disk_source),
}


def get_example(example: Union[str, ExampleProblem]) -> ExampleProblem:
    if isinstance(example, ExampleProblem):
        return example
    try:
        return EXAMPLES[example.lower()]
    except KeyError:
        raise ValueError(f"unknown example '{example}' (known: {', '.join(EXAMPLES)})")


@dataclass(frozen=True, eq=False)
class TrueSource:
    """Nodal interpolant of the exact source on the region nodes"""
    name: str
    values: np.ndarray
    expression: PointFunction


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Boundary values aligned with a mesh's boundary_nodes"""
    nodes: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    delta: float = 0.0
    delta_prime: float = 0.0
    seed: Optional[int] = None
    exact_g1: Optional[np.ndarray] = None
    exact_g2: Optional[np.ndarray] = None

    @property
    def is_exact(self) -> bool:
        return self.delta == 0.0

    def equals(self, other: "BoundaryData") -> bool:
        return (np.array_equal(self.nodes, other.nodes) and np.array_equal(self.g1, other.g1)
                and np.array_equal(self.g2, other.g2) and self.delta == other.delta)


def sample_true_source(example: Union[str, ExampleProblem], mesh: Mesh, region: RegionMask) -> TrueSource:
    """Interpolate the example's source at the region nodes"""
    if region is None or region.m0 == 0:
        raise EmptyRegion("permissible region is empty")
    problem = get_example(example)
    values = np.asarray(problem.source(mesh.nodes[region.omega0_nodes]), dtype=float)
    return TrueSource(problem.name, values, problem.source)


def example_region(example: Union[str, ExampleProblem], mesh: Mesh) -> RegionMask:
    return mark_region(mesh, get_example(example).region)


def make_measurement(fine_mesh: Mesh, region_fine: RegionMask, example: Union[str, ExampleProblem],
                     g2: Union[float, np.ndarray] = 0.0) -> BoundaryData:
    """Exact Dirichlet trace g1 of the Neumann forward solution on the fine mesh"""
    source = sample_true_source(example, fine_mesh, region_fine)
    n_boundary = len(fine_mesh.boundary_nodes)
    g2_values = np.broadcast_to(np.asarray(g2, dtype=float), (n_boundary,)).copy()

    system = assemble_system(fine_mesh, region_fine)
    u = solve_neumann(system, source.values, g2_values)
    g1 = u[fine_mesh.boundary_nodes]
    logger.info(f"Measurement for {source.name}: {n_boundary} boundary nodes, "
                f"max|g1|={np.abs(g1).max():.6f}")
    return BoundaryData(nodes=fine_mesh.boundary_nodes.copy(), g1=g1, g2=g2_values,
                        exact_g1=g1, exact_g2=g2_values)


def uniform_draws(seed: int, shape) -> np.ndarray:
    """Uniform [0, 1) draws from a Philox counter-based generator keyed by seed"""
    return np.random.Generator(np.random.Philox(key=int(seed))).random(shape)


def add_noise(data: BoundaryData, delta_prime: float, seed: int,
              rand: Optional[Callable[[tuple], np.ndarray]] = None) -> BoundaryData:
    """
    g_j^delta = [1 + delta' (2 rand - 1)] g_j on every boundary node, j = 1, 2

    Draws come from uniform_draws(seed, (2, n)) unless a `rand(shape)`
    hook is given. delta is recomputed as the discrete sup-norm misfit.
    """
    if delta_prime < 0:
        raise ValueError("delta_prime must be >= 0")
    g1 = data.g1 if data.exact_g1 is None else data.exact_g1
    g2 = data.g2 if data.exact_g2 is None else data.exact_g2
    shape = (2, len(g1))
    draws = uniform_draws(seed, shape) if rand is None else np.asarray(rand(shape), dtype=float)

    noisy1 = (1.0 + delta_prime * (2.0 * draws[0] - 1.0)) * g1
    noisy2 = (1.0 + delta_prime * (2.0 * draws[1] - 1.0)) * g2
    delta = max(float(np.max(np.abs(noisy1 - g1), initial=0.0)),
                float(np.max(np.abs(noisy2 - g2), initial=0.0)))
    return BoundaryData(nodes=data.nodes, g1=noisy1, g2=noisy2, delta=delta,
                        delta_prime=float(delta_prime), seed=int(seed), exact_g1=g1, exact_g2=g2)


def _values_along(mesh: Mesh, data: BoundaryData):
    param = boundary_param(mesh)
    if len(data.nodes) != len(param.nodes):
        raise InvalidBoundary(f"data has {len(data.nodes)} boundary values, mesh has {len(param.nodes)} boundary nodes")
    position = {int(n): i for i, n in enumerate(data.nodes)}
    try:
        order = np.array([position[int(n)] for n in param.nodes])
    except KeyError as e:
        raise InvalidBoundary(f"boundary node {e} has no data")
    return param, order


def transfer_boundary(src_mesh: Mesh, dst_mesh: Mesh, data: BoundaryData) -> BoundaryData:
    """Periodic linear interpolation in normalised arc length s/L"""
    src_param, src_order = _values_along(src_mesh, data)
    dst_param = boundary_param(dst_mesh)
    s_src = src_param.arclength / src_param.length
    s_dst = dst_param.arclength / dst_param.length

    def move(values: Optional[np.ndarray]) -> Optional[np.ndarray]:
        if values is None:
            return None
        along = np.interp(s_dst, s_src, values[src_order], period=1.0)
        # back to the destination mesh's stored boundary order
        position = {int(n): i for i, n in enumerate(dst_param.nodes)}
        return along[[position[int(n)] for n in dst_mesh.boundary_nodes]]

    return replace(data, nodes=dst_mesh.boundary_nodes.copy(), g1=move(data.g1), g2=move(data.g2),
                   exact_g1=move(data.exact_g1), exact_g2=move(data.exact_g2))


def save_boundary_data(data: BoundaryData, path: Union[str, Path]):
    """Write the BDATA v1 text format"""
    lines = [BDATA_HEADER, f"DELTA {data.delta:.17g}", f"N {len(data.nodes)}"]
    lines += [f"{int(n)} {a:.17g} {b:.17g}" for n, a, b in zip(data.nodes, data.g1, data.g2)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_boundary_data(path: Union[str, Path]) -> BoundaryData:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != BDATA_HEADER:
        raise ParseError(f"missing '{BDATA_HEADER}' header", 1)
    try:
        key, value = lines[1].split()
        assert key == "DELTA"
        delta = float(value)
    except (IndexError, ValueError, AssertionError):
        raise ParseError("expected 'DELTA <float>'", 2)
    try:
        key, value = lines[2].split()
        assert key == "N"
        count = int(value)
    except (IndexError, ValueError, AssertionError):
        raise ParseError("expected 'N <count>'", 3)

    nodes, g1, g2 = [], [], []
    for lineno in range(3, 3 + count):
        if lineno >= len(lines):
            raise ParseError("boundary data truncated", lineno + 1)
        fields = lines[lineno].split()
        if len(fields) != 3:
            raise ParseError("expected 'node_index g1 g2'", lineno + 1)
        try:
            nodes.append(int(fields[0]))
            g1.append(float(fields[1]))
            g2.append(float(fields[2]))
        except ValueError:
            raise ParseError("invalid number", lineno + 1)
    if not np.all(np.isfinite(g1 + g2)):
        raise MissingBoundaryValue("boundary data contains nan/inf")
    return BoundaryData(nodes=np.array(nodes, dtype=np.int64), g1=np.array(g1), g2=np.array(g2), delta=delta)
