#!/usr/bin/env python3
"""
Triangular meshes of disk domains
Structured polar generator, permissible-region marking, boundary
parametrisation and the MESH2D v1 text format
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Tuple, Union

import numpy as np

from errors import EmptyRegion, InvalidBoundary, ParseError

logger = logging.getLogger(__name__)

MESH_HEADER = "MESH2D v1"
DEFAULT_SHAPE_C2 = 10.0


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


def triangle_geometry(nodes: np.ndarray, triangles: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Signed areas, longest sides and inradii of all triangles"""
    p0 = nodes[triangles[:, 0]]
    p1 = nodes[triangles[:, 1]]
    p2 = nodes[triangles[:, 2]]
    e0 = p1 - p0
    e1 = p2 - p0
    signed_area = 0.5 * (e0[:, 0] * e1[:, 1] - e0[:, 1] * e1[:, 0])

    sides = np.stack([
        np.linalg.norm(p1 - p2, axis=1),
        np.linalg.norm(p2 - p0, axis=1),
        np.linalg.norm(p0 - p1, axis=1),
    ], axis=1)
    longest = sides.max(axis=1)
    perimeter = sides.sum(axis=1)
    inradius = 2.0 * np.abs(signed_area) / np.where(perimeter > 0, perimeter, 1.0)
    return signed_area, longest, inradius


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation with a counter-clockwise boundary cycle"""
    nodes: np.ndarray           # (m, 2)
    triangles: np.ndarray       # (t, 3), counter-clockwise
    boundary_edges: np.ndarray  # (b, 2), one closed CCW cycle
    h: float

    @classmethod
    def build(cls, nodes, triangles, boundary_edges, shape_c2: float = DEFAULT_SHAPE_C2) -> "Mesh":
        """Create a mesh, computing h and warning on shape-regularity violations"""
        nodes = _frozen(nodes, float).reshape(-1, 2)
        triangles = _frozen(triangles, np.int64).reshape(-1, 3)
        boundary_edges = _frozen(boundary_edges, np.int64).reshape(-1, 2)
        _, longest, inradius = triangle_geometry(nodes, triangles)
        h = float(longest.max()) if len(longest) else 0.0

        bad = np.count_nonzero(longest > shape_c2 * inradius)
        if bad:
            logger.warning(f"{bad} triangles violate shape regularity l <= {shape_c2:g} r")
        return cls(nodes, triangles, boundary_edges, h)

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @property
    def boundary_nodes(self) -> np.ndarray:
        """Boundary nodes in the stored cycle order (start node of each edge)"""
        return self.boundary_edges[:, 0]

    def areas(self) -> np.ndarray:
        signed_area, _, _ = triangle_geometry(self.nodes, self.triangles)
        return signed_area

    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def edges(self) -> np.ndarray:
        """Unique undirected edges, each as (min, max)"""
        tri = self.triangles
        all_edges = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        return np.unique(np.sort(all_edges, axis=1), axis=0)

    def equals(self, other: "Mesh") -> bool:
        return (np.array_equal(self.nodes, other.nodes)
                and np.array_equal(self.triangles, other.triangles)
                and np.array_equal(self.boundary_edges, other.boundary_edges)
                and self.h == other.h)

    def validate(self):
        """Orientation, index range and boundary-cycle checks; raises ValueError"""
        m = self.n_nodes
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= m):
            raise ValueError("triangle references a node index out of range")
        if self.boundary_edges.size and (self.boundary_edges.min() < 0 or self.boundary_edges.max() >= m):
            raise ValueError("boundary edge references a node index out of range")
        if np.any(self.areas() <= 0):
            raise ValueError("triangle with non-positive signed area")

        tri = self.triangles
        directed = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        undirected, counts = np.unique(np.sort(directed, axis=1), axis=0, return_counts=True)
        outer = {tuple(e) for e in undirected[counts == 1]}
        given = {tuple(sorted(e)) for e in self.boundary_edges.tolist()}
        if outer != given:
            raise ValueError("boundary edges differ from the edges owned by a single triangle")
        directed_set = {tuple(e) for e in directed.tolist()}
        if any(tuple(e) not in directed_set for e in self.boundary_edges.tolist()):
            raise ValueError("boundary edges are not oriented counter-clockwise")
        boundary_param(self)


@dataclass(frozen=True, eq=False)
class RegionMask:
    """Elements and nodes of the permissible region"""
    member_elements: np.ndarray   # sorted triangle indices
    omega0_nodes: np.ndarray      # sorted global node indices (the k_l)
    global_to_local: Dict[int, int] = field(repr=False)

    @property
    def m0(self) -> int:
        return int(self.omega0_nodes.shape[0])

    def local_index(self, n_nodes: int) -> np.ndarray:
        """Dense global -> local map, -1 outside the region"""
        out = np.full(n_nodes, -1, dtype=np.int64)
        out[self.omega0_nodes] = np.arange(self.m0)
        return out


@dataclass(frozen=True)
class BoundaryParam:
    """Arc-length coordinates of the boundary nodes, starting at the smallest node index"""
    nodes: np.ndarray
    arclength: np.ndarray
    length: float


def generate_disk_mesh(radius: float, n_rings: int, shape_c2: float = DEFAULT_SHAPE_C2) -> Mesh:
    """
    Structured polar mesh of a disk

    Ring j (1..n_rings) sits at radius j*radius/n_rings and carries 6j nodes;
    node 0 is the centre. Each of the six sectors of ring j holds 2j-1 triangles.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if n_rings < 1:
        raise ValueError("n_rings must be >= 1")

    nodes = [(0.0, 0.0)]
    for j in range(1, n_rings + 1):
        r = j * radius / n_rings
        angles = 2.0 * np.pi * np.arange(6 * j) / (6 * j)
        nodes.extend(zip(r * np.cos(angles), r * np.sin(angles)))

    def ring_start(j: int) -> int:
        return 0 if j == 0 else 1 + 3 * j * (j - 1)

    triangles = []
    for j in range(1, n_rings + 1):
        outer0, inner0 = ring_start(j), ring_start(j - 1)
        n_outer, n_inner = 6 * j, max(6 * (j - 1), 1)
        for s in range(6):
            def a(i):
                return outer0 + (s * j + i) % n_outer

            def b(i):
                return inner0 + (s * (j - 1) + i) % n_inner

            for i in range(j):
                triangles.append((b(i), a(i), a(i + 1)))
            for i in range(j - 1):
                triangles.append((b(i), a(i + 1), b(i + 1)))

    start = ring_start(n_rings)
    ring = np.arange(start, start + 6 * n_rings)
    boundary = np.column_stack([ring, np.roll(ring, -1)])

    mesh = Mesh.build(np.array(nodes), np.array(triangles), boundary, shape_c2=shape_c2)
    logger.info(f"Generated disk mesh: {mesh.n_nodes} nodes, {mesh.n_triangles} triangles, h={mesh.h:.4f}")
    return mesh


def refine_mesh(mesh: Mesh, levels: int = 1, shape_c2: float = DEFAULT_SHAPE_C2) -> Mesh:
    """
    Uniform red refinement, each triangle split into four at its edge midpoints

    Existing nodes keep their indices and midpoints stay on the straight
    edges, so the boundary polygon is unchanged and every coarse P1 function
    is a fine P1 function. Each boundary edge (i, j) becomes (i, mid), (mid, j)
    in place, keeping the cycle order and start node.
    """
    if levels < 0:
        raise ValueError("levels must be >= 0")

    nodes, triangles, boundary = mesh.nodes, mesh.triangles, mesh.boundary_edges
    for _ in range(levels):
        m = len(nodes)
        local = np.stack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=1)
        edges, inverse = np.unique(np.sort(local.reshape(-1, 2), axis=1), axis=0, return_inverse=True)
        ab, bc, ca = (m + inverse.reshape(-1, 3)).T
        a, b, c = triangles.T
        nodes = np.vstack([nodes, 0.5 * (nodes[edges[:, 0]] + nodes[edges[:, 1]])])
        triangles = np.concatenate([np.column_stack([a, ab, ca]), np.column_stack([ab, b, bc]),
                                    np.column_stack([ca, bc, c]), np.column_stack([ab, bc, ca])])

        midpoint = {edge: m + i for i, edge in enumerate(map(tuple, edges.tolist()))}
        mids = np.array([midpoint[(min(i, j), max(i, j))] for i, j in boundary.tolist()], dtype=np.int64)
        boundary = np.column_stack([boundary[:, 0], mids, mids, boundary[:, 1]]).reshape(-1, 2)

    refined = Mesh.build(nodes, triangles, boundary, shape_c2=shape_c2)
    logger.info(f"Refined mesh {levels}x: {refined.n_nodes} nodes, {refined.n_triangles} triangles, "
                f"h={refined.h:.4f}")
    return refined


def mark_region(mesh: Mesh, predicate: Callable[[np.ndarray], Union[bool, np.ndarray]]) -> RegionMask:
    """Select the triangles whose centroid satisfies predicate(points) -> bool array"""
    centroids = mesh.centroids()
    selected = np.broadcast_to(np.asarray(predicate(centroids), dtype=bool), (mesh.n_triangles,))
    members = np.flatnonzero(selected)
    if members.size == 0:
        raise EmptyRegion("permissible region contains no element")

    omega0 = np.unique(mesh.triangles[members])
    global_to_local = {int(g): l for l, g in enumerate(omega0)}
    return RegionMask(_frozen(members, np.int64), _frozen(omega0, np.int64), global_to_local)


def whole_domain(points: np.ndarray) -> np.ndarray:
    return np.ones(len(points), dtype=bool)


def boundary_param(mesh: Mesh) -> BoundaryParam:
    """Cumulative polygonal arc length along the boundary cycle"""
    edges = mesh.boundary_edges
    if len(edges) < 3:
        raise InvalidBoundary(f"boundary cycle needs at least 3 edges, got {len(edges)}")

    successor = {}
    for i, j in edges.tolist():
        if i in successor or i == j:
            raise InvalidBoundary(f"node {i} starts more than one boundary edge")
        successor[i] = j
    if set(successor.values()) != set(successor):
        raise InvalidBoundary("boundary edges do not close up")

    first = min(successor)
    order = [first]
    while True:
        nxt = successor[order[-1]]
        if nxt == first:
            break
        if len(order) >= len(successor):
            raise InvalidBoundary("boundary edges form more than one cycle")
        order.append(nxt)
    if len(order) != len(successor):
        raise InvalidBoundary("boundary edges form more than one cycle")

    order = np.array(order, dtype=np.int64)
    pts = mesh.nodes[order]
    seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    arclength = np.concatenate([[0.0], np.cumsum(seg)[:-1]])
    return BoundaryParam(order, arclength, float(seg.sum()))


def mesh_info(mesh: Mesh) -> Dict[str, float]:
    """Summary numbers for a mesh"""
    area, longest, inradius = triangle_geometry(mesh.nodes, mesh.triangles)
    ratio = longest / inradius
    return {
        'nodes': mesh.n_nodes,
        'triangles': mesh.n_triangles,
        'boundary_edges': int(len(mesh.boundary_edges)),
        'h': mesh.h,
        'area': float(area.sum()),
        'boundary_length': boundary_param(mesh).length,
        'min_shape_ratio': float(ratio.min()),
        'max_shape_ratio': float(ratio.max()),
    }


def save_mesh(mesh: Mesh, path: Union[str, Path]):
    """Write the MESH2D v1 text format (17 significant digits)"""
    lines = [MESH_HEADER, f"NODES {mesh.n_nodes}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.nodes.tolist()]
    lines.append(f"TRIANGLES {mesh.n_triangles}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines.append(f"BOUNDARY {len(mesh.boundary_edges)}")
    lines += [f"{i} {j}" for i, j in mesh.boundary_edges.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")
    logger.debug(f"Mesh saved to {path}")


def _read_block(lines: List[str], pos: int, keyword: str, width: int, cast) -> Tuple[list, int]:
    if pos >= len(lines):
        raise ParseError(f"expected '{keyword} <count>', found end of file", pos + 1)
    parts = lines[pos].split()
    if len(parts) != 2 or parts[0] != keyword:
        raise ParseError(f"expected '{keyword} <count>'", pos + 1)
    try:
        count = int(parts[1])
    except ValueError:
        raise ParseError(f"invalid {keyword} count '{parts[1]}'", pos + 1)
    if count < 0:
        raise ParseError(f"negative {keyword} count", pos + 1)

    rows = []
    for offset in range(1, count + 1):
        lineno = pos + offset
        if lineno >= len(lines):
            raise ParseError(f"{keyword} block truncated", lineno + 1)
        fields = lines[lineno].split()
        if len(fields) != width:
            raise ParseError(f"expected {width} values", lineno + 1)
        try:
            rows.append([cast(v) for v in fields])
        except ValueError:
            raise ParseError(f"invalid number in {keyword} block", lineno + 1)
    return rows, pos + count + 1


def load_mesh(path: Union[str, Path], shape_c2: float = DEFAULT_SHAPE_C2) -> Mesh:
    """Read the MESH2D v1 format; ParseError carries the offending line"""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != MESH_HEADER:
        raise ParseError(f"missing '{MESH_HEADER}' header", 1)

    node_rows, pos = _read_block(lines, 1, "NODES", 2, float)
    tri_start = pos
    tri_rows, pos = _read_block(lines, pos, "TRIANGLES", 3, int)
    bnd_start = pos
    bnd_rows, pos = _read_block(lines, pos, "BOUNDARY", 2, int)
    if any(line.strip() for line in lines[pos:]):
        raise ParseError("unexpected content after BOUNDARY block", pos + 1)

    nodes = np.array(node_rows, dtype=float).reshape(-1, 2)
    m = len(nodes)
    for t, tri in enumerate(tri_rows):
        if min(tri) < 0 or max(tri) >= m:
            raise ParseError(f"triangle references node outside 0..{m - 1}", tri_start + t + 2)
    triangles = np.array(tri_rows, dtype=np.int64).reshape(-1, 3)
    if len(triangles):
        area, _, _ = triangle_geometry(nodes, triangles)
        bad = np.flatnonzero(area <= 0)
        if bad.size:
            raise ParseError("triangle is not counter-clockwise (non-positive area)", tri_start + int(bad[0]) + 2)
    for e, edge in enumerate(bnd_rows):
        if min(edge) < 0 or max(edge) >= m:
            raise ParseError(f"boundary edge references node outside 0..{m - 1}", bnd_start + e + 2)

    mesh = Mesh.build(nodes, triangles, np.array(bnd_rows, dtype=np.int64).reshape(-1, 2), shape_c2=shape_c2)
    try:
        mesh.validate()
    except (ValueError, InvalidBoundary) as e:
        raise ParseError(f"malformed BOUNDARY block: {e}", bnd_start + 1) from e
    logger.info(f"Loaded mesh from {path}: {mesh.n_nodes} nodes, {mesh.n_triangles} triangles")
    return mesh
