"""Computational domain, triangulation and the plain-text mesh format.

The domain is the triangle with vertices (0,0), (1,0), (0,1) with the half
disk of radius sqrt(2)/4 centred at (0.5, 0.5) cut out of its hypotenuse.
Its boundary, traversed counter-clockwise, is

    (0,0) -> (1,0) -> (0.75,0.25) -> arc through (0.25,0.25) -> (0.25,0.75)
          -> (0,1) -> (0,0)
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay, cKDTree

PENTAGON = np.array([(0.0, 0.0), (1.0, 0.0), (0.75, 0.25), (0.25, 0.75), (0.0, 1.0)])
ARC_CENTER = np.array([0.5, 0.5])
ARC_RADIUS = math.sqrt(2.0) / 4.0
# arc runs clockwise about its centre, from (0.75,0.25) to (0.25,0.75)
ARC_START_ANGLE = -math.pi / 4.0
ARC_END_ANGLE = -5.0 * math.pi / 4.0

MIN_ARC_SEGMENTS = 8
MIN_ANGLE_DEG = 15.0
DEDUP_TOL = 1e-12

# target edge lengths whose node counts bracket the three published grids
# (198, 679 and 2470 nodes)
GRID_H = {1: 0.049, 2: 0.0245, 3: 0.0124}


class MeshError(ValueError):
    """Raised when a mesh violates one of its structural invariants."""


class MeshFormatError(MeshError):
    """Raised on malformed mesh files; carries the offending line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def domain_area() -> float:
    """Exact area of the domain: unit right triangle minus a half disk."""
    return 0.5 - 0.5 * math.pi * ARC_RADIUS**2


def boundary_length() -> float:
    straight = 1.0 + 1.0 + 2.0 * math.hypot(0.25, 0.25)
    return straight + math.pi * ARC_RADIUS


def inside_domain(p, tol: float = 0.0) -> bool:
    """Closed-set membership test.  ``tol`` enlarges the domain by that distance."""
    return bool(signed_distance(np.asarray(p, dtype=float)[None, :])[0] <= tol)


def signed_distance(p: np.ndarray) -> np.ndarray:
    """Signed distance (negative inside) for an array of points of shape (m, 2).

    Exact inside the domain; outside it is a lower bound on the true
    distance, which is all the mesh generator needs.
    """
    x, y = p[:, 0], p[:, 1]
    d_tri = np.maximum.reduce([-x, -y, (x + y - 1.0) / math.sqrt(2.0)])
    d_disk = ARC_RADIUS - np.hypot(x - ARC_CENTER[0], y - ARC_CENTER[1])
    return np.maximum(d_tri, d_disk)


@dataclass(frozen=True)
class Mesh:
    """Planar P1 triangulation.

    nodes : (n, 2) float array
    triangles : (m, 3) int array, counter-clockwise
    boundary_edges : (b, 2) int array
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float).reshape(-1, 2)
        tris = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        bedges = np.array(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        n = len(nodes)
        for name, arr in (("triangle", tris), ("boundary edge", bedges)):
            if arr.size and (arr.min() < 0 or arr.max() >= n):
                raise MeshError(f"{name} index out of range [0, {n})")
        if not np.all(np.isfinite(nodes)):
            raise MeshError("non-finite node coordinates")

        area = signed_areas(nodes, tris)
        if np.any(np.abs(area) <= 1e-14):
            raise MeshError("degenerate triangle")
        flip = area < 0
        tris[flip] = tris[flip][:, [0, 2, 1]]

        for arr in (nodes, tris, bedges):
            arr.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "boundary_edges", bedges)
        _check_topology(self)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def areas(self) -> np.ndarray:
        return signed_areas(self.nodes, self.triangles)

    def area(self) -> float:
        return float(self.areas().sum())

    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted, shape (e, 2)."""
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    def max_edge_length(self) -> float:
        e = self.edges()
        return float(np.linalg.norm(self.nodes[e[:, 0]] - self.nodes[e[:, 1]], axis=1).max())

    def min_angle(self) -> float:
        """Smallest interior angle over all triangles, in degrees."""
        p = self.nodes[self.triangles]
        angles = []
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            cos = np.einsum("ij,ij->i", a, b) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
            )
            angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
        return float(np.min(angles))

    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_edges)


def signed_areas(nodes: np.ndarray, tris: np.ndarray) -> np.ndarray:
    p0, p1, p2 = nodes[tris[:, 0]], nodes[tris[:, 1]], nodes[tris[:, 2]]
    return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))


def _edge_counts(tris: np.ndarray):
    e = np.sort(tris[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    return np.unique(e, axis=0, return_counts=True)


def _check_topology(mesh: Mesh) -> None:
    nodes, tris, bedges = mesh.nodes, mesh.triangles, mesh.boundary_edges
    if len(nodes) > 1 and cKDTree(nodes).query_pairs(DEDUP_TOL):
        raise MeshError("duplicate nodes")
    if len(tris) == 0:
        return

    edges, counts = _edge_counts(tris)
    if np.any(counts > 2):
        raise MeshError("edge shared by more than two triangles")
    expected = {tuple(e) for e in edges[counts == 1]}
    given = {tuple(sorted(e)) for e in bedges.tolist()}
    if len(given) != len(bedges) or given != expected:
        raise MeshError("boundary edges do not match the edges with one incident triangle")

    # one closed loop: every boundary node has degree two and the walk
    # starting anywhere visits every boundary edge
    deg = np.bincount(bedges.ravel(), minlength=len(nodes))
    if np.any((deg != 0) & (deg != 2)):
        raise MeshError("boundary is not a simple closed curve")
    nbrs: dict[int, list[int]] = {}
    for i, j in bedges.tolist():
        nbrs.setdefault(i, []).append(j)
        nbrs.setdefault(j, []).append(i)
    start = int(bedges[0, 0])
    prev, cur, steps = -1, start, 0
    while True:
        a, b = nbrs[cur]
        nxt = a if a != prev else b
        prev, cur = cur, nxt
        steps += 1
        if cur == start:
            break
    if steps != len(bedges):
        raise MeshError("boundary consists of more than one loop")


def _boundary_points(h: float) -> np.ndarray:
    """Boundary nodes in counter-clockwise order, corners included once."""
    pts = []

    def segment(a, b):
        m = max(1, math.ceil(math.dist(a, b) / h))
        t = np.arange(m) / m
        pts.append(np.outer(1 - t, a) + np.outer(t, b))

    segment(PENTAGON[0], PENTAGON[1])
    segment(PENTAGON[1], PENTAGON[2])
    m = math.ceil(math.pi * ARC_RADIUS / h)
    if m < MIN_ARC_SEGMENTS:
        raise MeshError(f"h={h} resolves the arc with only {m} segments (need {MIN_ARC_SEGMENTS})")
    theta = ARC_START_ANGLE + (ARC_END_ANGLE - ARC_START_ANGLE) * np.arange(m) / m
    arc = ARC_CENTER + ARC_RADIUS * np.column_stack([np.cos(theta), np.sin(theta)])
    arc[0] = PENTAGON[2]  # exact corner coordinates
    pts.append(arc)
    segment(PENTAGON[3], PENTAGON[4])
    segment(PENTAGON[4], PENTAGON[0])
    return np.vstack(pts)


def _interior_lattice(h: float) -> np.ndarray:
    dy = h * math.sqrt(3.0) / 2.0
    rows = []
    for j in range(1, int(1.0 / dy) + 2):
        x = np.arange(0.0, 1.0 + h, h) + (0.5 * h if j % 2 else 0.0)
        rows.append(np.column_stack([x, np.full_like(x, j * dy)]))
    p = np.vstack(rows)
    return p[signed_distance(p) < -0.35 * h]


def _triangulate(p: np.ndarray, h: float) -> np.ndarray:
    tris = Delaunay(p).simplices
    centroids = p[tris].mean(axis=1)
    return tris[signed_distance(centroids) < -1e-3 * h]


def _smooth(p: np.ndarray, tris: np.ndarray, n_fixed: int, h: float) -> np.ndarray:
    """One Laplacian smoothing pass of the free (interior) nodes."""
    e = tris[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    e = np.unique(np.sort(e, axis=1), axis=0)
    i = np.concatenate([e[:, 0], e[:, 1]])
    j = np.concatenate([e[:, 1], e[:, 0]])
    deg = np.bincount(i, minlength=len(p)).astype(float)
    acc = np.zeros_like(p)
    np.add.at(acc, i, p[j])
    new = p.copy()
    free = np.arange(n_fixed, len(p))
    free = free[deg[free] > 0]
    cand = acc[free] / deg[free, None]
    ok = signed_distance(cand) < -0.2 * h
    new[free[ok]] = cand[ok]
    return new


def generate_mesh(h: float, smoothing_passes: int = 12) -> Mesh:
    """Triangulate the domain with target edge length ``h``.

    Boundary nodes are placed uniformly on each boundary piece (exactly on
    the arc), interior nodes start on an equilateral lattice of spacing
    ``h`` clipped away from the boundary, and a few Laplacian smoothing
    passes with re-triangulation even out the transition layer.
    """
    if not 0.0 < h < 0.5:
        raise MeshError(f"target edge length must satisfy 0 < h < 0.5, got {h}")
    bnd = _boundary_points(h)
    p = np.vstack([bnd, _interior_lattice(h)])
    nb = len(bnd)

    for _ in range(smoothing_passes):
        p = _smooth(p, _triangulate(p, h), nb, h)
    tris = _triangulate(p, h)
    # acute corners can leave an edge spanning two boundary pieces
    for _ in range(3):
        e = np.unique(np.sort(tris[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1), axis=0)
        long = np.linalg.norm(p[e[:, 0]] - p[e[:, 1]], axis=1) > 1.45 * h
        if not long.any():
            break
        mid = 0.5 * (p[e[long, 0]] + p[e[long, 1]])
        p = np.vstack([p, mid[signed_distance(mid) < -1e-3 * h]])
        tris = _triangulate(p, h)

    used = np.unique(tris)
    if len(used) != len(p):
        remap = -np.ones(len(p), dtype=np.int64)
        remap[used] = np.arange(len(used))
        if np.any(remap[:nb] < 0):
            raise MeshError("boundary node dropped by the triangulation")
        p, tris = p[used], remap[tris]

    bedges = np.column_stack([np.arange(nb), (np.arange(nb) + 1) % nb])
    mesh = Mesh(p, tris, bedges)
    angle = mesh.min_angle()
    if angle < MIN_ANGLE_DEG:
        raise MeshError(f"minimum angle {angle:.1f} deg below {MIN_ANGLE_DEG} deg")
    return mesh


def reference_grid(level: int) -> Mesh:
    """Mesh of refinement level 1, 2 or 3 (about 200, 700 and 2500 nodes)."""
    return generate_mesh(GRID_H[level])


def write_mesh(mesh: Mesh, path) -> None:
    lines = [f"nodes {mesh.n_nodes}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.nodes.tolist()]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines.append(f"bedges {len(mesh.boundary_edges)}")
    lines += [f"{i} {j}" for i, j in mesh.boundary_edges.tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_mesh(path) -> Mesh:
    raw = Path(path).read_text(encoding="utf-8").splitlines()
    lines = [(k + 1, ln.split()) for k, ln in enumerate(raw) if ln.strip()]
    pos = 0

    def section(keyword, width, conv):
        nonlocal pos
        if pos >= len(lines):
            raise MeshFormatError(len(raw) + 1, f"missing '{keyword}' section")
        lineno, tok = lines[pos]
        if len(tok) != 2 or tok[0] != keyword:
            raise MeshFormatError(lineno, f"expected '{keyword} <count>'")
        try:
            count = int(tok[1])
        except ValueError:
            raise MeshFormatError(lineno, f"bad count {tok[1]!r}") from None
        pos += 1
        rows = []
        for _ in range(count):
            if pos >= len(lines):
                raise MeshFormatError(len(raw) + 1, f"'{keyword}' section truncated")
            lineno, tok = lines[pos]
            if len(tok) != width:
                raise MeshFormatError(lineno, f"expected {width} values, got {len(tok)}")
            try:
                rows.append((lineno, [conv(t) for t in tok]))
            except ValueError:
                raise MeshFormatError(lineno, f"cannot parse {' '.join(tok)!r}") from None
            pos += 1
        return rows

    nodes = section("nodes", 2, float)
    tris = section("triangles", 3, int)
    bedges = section("bedges", 2, int)
    if pos != len(lines):
        raise MeshFormatError(lines[pos][0], "unexpected trailing content")

    n = len(nodes)
    for lineno, idx in tris + bedges:
        if any(i < 0 or i >= n for i in idx):
            raise MeshFormatError(lineno, f"node index out of range [0, {n})")
    return Mesh(
        np.array([r for _, r in nodes], dtype=float).reshape(-1, 2),
        np.array([r for _, r in tris], dtype=np.int64).reshape(-1, 3),
        np.array([r for _, r in bedges], dtype=np.int64).reshape(-1, 2),
    )
