"""Structured P2 triangulation of the rounded square.

The bounding box is covered by an n-by-n grid of square cells, each split
into two triangles with checkerboard-alternating diagonals (mirror and
rotation symmetric for even n).  The four corner cells are re-triangulated
as fans that follow the corner arcs with enough chord segments to keep the
boundary polyline within ``ARC_TOL`` of the true curve.  Boundary edges
carry their endpoint arclength parameters so that loads can be integrated
in the boundary's own arclength measure.

Quadratic elements are subparametric: straight triangles, midside nodes at
chord midpoints, P2 used for the displacement field only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    BoundaryGeometry,
    arclength_parameter,
    boundary_distance,
)

__all__ = [
    "Mesh",
    "SubdomainPartition",
    "MeshError",
    "build_mesh",
    "build_subdomains",
    "roi_mask",
    "write_mesh_file",
]

ARC_TOL = 5e-7  # chord deviation budget per corner arc, half the 1e-6 contract
DIRICHLET_HALF_SPAN = 0.1  # clamped segments: |x| <= 0.1 on top and bottom edges


class MeshError(ValueError):
    """Raised for invalid meshing inputs or a mesh too coarse to use."""


@dataclass
class Mesh:
    """Conforming P2 triangulation with tagged, arclength-parametrized boundary."""

    geometry: BoundaryGeometry
    spacing: float
    vertices: np.ndarray  # (nv, 2) triangle corner coordinates
    triangles: np.ndarray  # (ne, 3) CCW vertex indices
    nodes: np.ndarray  # (nn, 2) all P2 nodes: vertices then midside nodes
    tri_nodes: np.ndarray  # (ne, 6) P2 connectivity [v0 v1 v2 m01 m12 m20]
    boundary_edges: np.ndarray  # (nbe, 2) vertex ids, CCW along the boundary
    boundary_mid: np.ndarray  # (nbe,) midside node id of each boundary edge
    boundary_arc: np.ndarray  # (nbe, 2) endpoint arclength params, t1 may exceed L
    boundary_dirichlet: np.ndarray  # (nbe,) bool tag
    dirichlet_nodes: np.ndarray  # sorted node ids with clamped displacement
    element_areas: np.ndarray  # (ne,)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_elements(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_nodes

    @property
    def area(self) -> float:
        return float(self.element_areas.sum())

    @property
    def max_edge_length(self) -> float:
        return self.spacing * np.sqrt(2.0)


@dataclass
class SubdomainPartition:
    """Perturbation-basis partition: a k-by-k grid of squares, each split
    along its bottom-left to top-right diagonal into two triangles."""

    geometry: BoundaryGeometry
    count: int
    grid: int  # k
    cell_width: float
    labels: np.ndarray  # (ne,) subdomain index per mesh element
    midpoints: np.ndarray  # (N, 2) hypotenuse midpoints (cell centers)
    centroids: np.ndarray  # (N, 2) centroids of the ideal triangles
    areas: np.ndarray  # (N,) element-sum areas

    def elements(self, n: int) -> np.ndarray:
        return np.flatnonzero(self.labels == n)


def _corner_arc_segments(radius: float) -> int:
    """Chord count per quarter arc keeping sagitta below ARC_TOL."""
    theta_max = np.sqrt(8.0 * ARC_TOL / radius)
    return max(2, int(np.ceil((np.pi / 2) / theta_max)))


def build_mesh(geom: BoundaryGeometry, target_element_count: int = 1632) -> Mesh:
    """Triangulate the rounded square with roughly ``target_element_count`` cells.

    The grid resolution is snapped to a multiple of ten so cell lines align
    with the default 5x5 subdomain partition (keeps subdomain areas uniform)
    and stay mirror symmetric.  Corner fans add a fixed number of elements,
    so very small targets overshoot.
    """
    if not geom.radius > 0:
        raise MeshError("degenerate geometry: corner radius must be positive")
    if target_element_count < 50:
        raise MeshError(f"target element count must be >= 50, got {target_element_count}")

    n = max(10, 10 * round(np.sqrt(target_element_count / 2.0) / 10.0))
    r = geom.radius
    a = geom.half_width
    h = 2.0 * a / n
    if h < 4.0 * r:
        raise MeshError(
            f"grid spacing {h:.3g} too small for corner radius {r:.3g}; "
            "reduce the target element count or the radius"
        )

    # Symmetric grid coordinates: exact negation pairs, exact endpoints.
    xs = (np.arange(n + 1) - n // 2) * h
    xs[0], xs[-1] = -a, a

    corner_cells = {(0, 0), (n - 1, 0), (0, n - 1), (n - 1, n - 1)}
    box_corners = {(0, 0), (n, 0), (0, n), (n, n)}

    coords: list[tuple[float, float]] = []
    index: dict[tuple[int, int], int] = {}
    for j in range(n + 1):
        for i in range(n + 1):
            if (i, j) in box_corners:
                continue
            index[(i, j)] = len(coords)
            coords.append((xs[i], xs[j]))

    triangles: list[tuple[int, int, int]] = []
    for j in range(n):
        for i in range(n):
            if (i, j) in corner_cells:
                continue
            bl, br = index[(i, j)], index[(i + 1, j)]
            tr, tl = index[(i + 1, j + 1)], index[(i, j + 1)]
            if (i + j) % 2 == 0:  # diagonal bl-tr
                triangles.append((bl, br, tr))
                triangles.append((bl, tr, tl))
            else:  # diagonal br-tl
                triangles.append((bl, br, tl))
                triangles.append((br, tr, tl))

    def add_node(x: float, y: float) -> int:
        coords.append((x, y))
        return len(coords) - 1

    n_arc = _corner_arc_segments(r)
    theta = np.linspace(0.0, np.pi / 2, n_arc + 1)
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    # Per corner: interior fan apex v0, entry/exit grid nodes (CCW along the
    # boundary), arc points including both tangencies, and the arc center.
    corners = [
        # bottom-right: arc from (0.5, -a) to (a, -0.5)
        dict(
            v0=index[(n - 1, 1)],
            entry=index[(n - 1, 0)],
            exit=index[(n, 1)],
            arc_x=0.5 + r * sin_t,
            arc_y=-0.5 - r * cos_t,
            w=(0.5, -0.5),
        ),
        # top-right: arc from (a, 0.5) to (0.5, a)
        dict(
            v0=index[(n - 1, n - 1)],
            entry=index[(n, n - 1)],
            exit=index[(n - 1, n)],
            arc_x=0.5 + r * cos_t,
            arc_y=0.5 + r * sin_t,
            w=(0.5, 0.5),
        ),
        # top-left: arc from (-0.5, a) to (-a, 0.5)
        dict(
            v0=index[(1, n - 1)],
            entry=index[(1, n)],
            exit=index[(0, n - 1)],
            arc_x=-0.5 - r * sin_t,
            arc_y=0.5 + r * cos_t,
            w=(-0.5, 0.5),
        ),
        # bottom-left: arc from (-a, -0.5) to (-0.5, -a)
        dict(
            v0=index[(1, 1)],
            entry=index[(0, 1)],
            exit=index[(1, 0)],
            arc_x=-0.5 - r * cos_t,
            arc_y=-0.5 - r * sin_t,
            w=(-0.5, -0.5),
        ),
    ]

    for c in corners:
        arc_ids = [add_node(x, y) for x, y in zip(c["arc_x"], c["arc_y"])]
        w_id = add_node(*c["w"])
        fan = [(c["v0"], c["entry"], arc_ids[0]), (c["v0"], arc_ids[0], w_id)]
        fan += [(w_id, arc_ids[i], arc_ids[i + 1]) for i in range(n_arc)]
        fan += [(c["v0"], w_id, arc_ids[-1]), (c["v0"], arc_ids[-1], c["exit"])]
        triangles.extend(fan)

    vertices = np.asarray(coords)
    tris = np.asarray(triangles, dtype=np.int64)

    # Enforce CCW orientation and positive areas.
    v0, v1, v2 = vertices[tris[:, 0]], vertices[tris[:, 1]], vertices[tris[:, 2]]
    cross = (v1[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1]) - (v2[:, 0] - v0[:, 0]) * (
        v1[:, 1] - v0[:, 1]
    )
    flip = cross < 0
    tris[flip, 1], tris[flip, 2] = tris[flip, 2].copy(), tris[flip, 1].copy()
    areas = 0.5 * np.abs(cross)
    if np.any(areas <= 0):
        raise MeshError("degenerate element produced during meshing")

    return _finish_mesh(geom, h, vertices, tris, areas)


def _finish_mesh(geom, h, vertices, tris, areas) -> Mesh:
    """Attach P2 nodes, boundary edges, arclength params, and tags."""
    ne = tris.shape[0]
    L = geom.circumference

    # Unique edges; midside node per edge.
    raw = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    keys = np.sort(raw, axis=1)
    uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    n_vert = vertices.shape[0]
    mid_ids = n_vert + np.arange(uniq.shape[0])
    midpoints = 0.5 * (vertices[uniq[:, 0]] + vertices[uniq[:, 1]])
    nodes = np.vstack([vertices, midpoints])

    tri_nodes = np.empty((ne, 6), dtype=np.int64)
    tri_nodes[:, :3] = tris
    edge_of = inverse.reshape(3, ne).T  # column order: (01, 12, 20)
    tri_nodes[:, 3:] = mid_ids[edge_of]

    # Boundary edges: those owned by exactly one triangle, directed as they
    # appear in their CCW owner (so they run CCW along the boundary).
    boundary_edge_ids = np.flatnonzero(counts == 1)
    is_boundary = np.isin(inverse, boundary_edge_ids)
    directed = raw[is_boundary]
    edge_ids = inverse[is_boundary]
    order = np.argsort(edge_ids)
    directed = directed[order]
    edge_ids = edge_ids[order]

    t_vertex = np.full(n_vert, np.nan)
    bverts = np.unique(directed)
    t_vertex[bverts] = arclength_parameter(geom, vertices[bverts])

    t0 = t_vertex[directed[:, 0]]
    t1 = t_vertex[directed[:, 1]]
    t1 = np.where(t1 <= t0, t1 + L, t1)

    mid_t = np.mod(0.5 * (t0 + t1), L)
    span = DIRICHLET_HALF_SPAN
    top_mid = L / 2.0  # arclength of the top-edge midpoint
    dist0 = np.minimum(mid_t, L - mid_t)
    dist_top = np.abs(mid_t - top_mid)
    dirichlet = (dist0 <= span) | (dist_top <= span)

    bmid = mid_ids[edge_ids]
    dirichlet_nodes = np.unique(
        np.concatenate([directed[dirichlet].ravel(), bmid[dirichlet]])
    )
    if dirichlet_nodes.size == 0:
        raise MeshError("no Dirichlet edges tagged; mesh too coarse")

    return Mesh(
        geometry=geom,
        spacing=h,
        vertices=vertices,
        triangles=tris,
        nodes=nodes,
        tri_nodes=tri_nodes,
        boundary_edges=directed,
        boundary_mid=bmid,
        boundary_arc=np.column_stack([t0, t1]),
        boundary_dirichlet=dirichlet,
        dirichlet_nodes=dirichlet_nodes,
        element_areas=areas,
    )


def build_subdomains(mesh: Mesh, count: int = 50) -> SubdomainPartition:
    """Partition elements into ``count`` = 2*k^2 triangular subdomains.

    A k-by-k grid of squares over the bounding box, each square split along
    its bottom-left to top-right diagonal; elements are assigned to the
    subdomain containing their centroid.
    """
    k = int(round(np.sqrt(count / 2.0)))
    if 2 * k * k != count or k < 1:
        raise MeshError(f"subdomain count must be 2*k^2 for integer k, got {count}")

    a = mesh.geometry.half_width
    wd = 2.0 * a / k
    centroids = mesh.vertices[mesh.triangles].mean(axis=1)

    col = np.clip(np.floor((centroids[:, 0] + a) / wd).astype(int), 0, k - 1)
    row = np.clip(np.floor((centroids[:, 1] + a) / wd).astype(int), 0, k - 1)
    xi = (centroids[:, 0] + a) / wd - col
    eta = (centroids[:, 1] + a) / wd - row
    upper = eta > xi
    labels = 2 * (row * k + col) + upper.astype(int)

    areas = np.bincount(labels, weights=mesh.element_areas, minlength=count)
    if np.any(areas == 0):
        empty = np.flatnonzero(areas == 0)
        raise MeshError(f"mesh too coarse: subdomains {empty.tolist()} contain no element")

    rows, cols = np.divmod(np.arange(k * k), k)
    x0 = -a + cols * wd
    y0 = -a + rows * wd
    # Subdomain midpoint = midpoint of the triangle's hypotenuse (its
    # circumcenter), which is the center of the split cell; the two triangles
    # of a cell share it.  Centroids are kept separately.
    mids = np.empty((count, 2))
    mids[0::2, 0] = x0 + wd / 2.0
    mids[0::2, 1] = y0 + wd / 2.0
    mids[1::2] = mids[0::2]
    cents = np.empty((count, 2))
    cents[0::2, 0] = x0 + 2.0 * wd / 3.0  # lower-right triangle
    cents[0::2, 1] = y0 + wd / 3.0
    cents[1::2, 0] = x0 + wd / 3.0  # upper-left triangle
    cents[1::2, 1] = y0 + 2.0 * wd / 3.0

    return SubdomainPartition(
        geometry=mesh.geometry,
        count=count,
        grid=k,
        cell_width=wd,
        labels=labels,
        midpoints=mids,
        centroids=cents,
        areas=areas,
    )


def roi_mask(partition: SubdomainPartition) -> np.ndarray:
    """0/1 inclusion weights per subdomain; zero next to the clamped segments.

    Excludes both triangles of every partition cell on the top or bottom
    boundary row whose x-extent overlaps the open clamped span (|x| < 0.1).
    For the default 5x5 partition this zeros exactly four subdomains.
    """
    k = partition.grid
    wd = partition.cell_width
    a = partition.geometry.half_width
    mask = np.ones(partition.count, dtype=int)
    for cell in range(k * k):
        row, col = divmod(cell, k)
        if row not in (0, k - 1):
            continue
        x_lo = -a + col * wd
        x_hi = x_lo + wd
        if x_lo < DIRICHLET_HALF_SPAN and x_hi > -DIRICHLET_HALF_SPAN:
            mask[2 * cell] = 0
            mask[2 * cell + 1] = 0
    return mask


def write_mesh_file(mesh: Mesh, path, partition: SubdomainPartition | None = None) -> None:
    """Plain-text columnar export: vertex and element records.

    Format: comment header, then ``node <i> <x> <y>`` lines and
    ``element <i> <v0> <v1> <v2> <subdomain>`` lines (subdomain -1 when no
    partition is supplied).  Space-delimited, full float precision.
    """
    labels = partition.labels if partition is not None else np.full(mesh.n_elements, -1)
    with open(path, "w") as fh:
        fh.write("# triangulated domain export\n")
        fh.write(f"# nodes={mesh.n_vertices} elements={mesh.n_elements}\n")
        fh.write("# node <index> <x> <y>\n")
        fh.write("# element <index> <v0> <v1> <v2> <subdomain>\n")
        for i, (x, y) in enumerate(mesh.vertices):
            fh.write(f"node {i} {x:.17g} {y:.17g}\n")
        for i, (tri, lab) in enumerate(zip(mesh.triangles, labels)):
            fh.write(f"element {i} {tri[0]} {tri[1]} {tri[2]} {lab}\n")
