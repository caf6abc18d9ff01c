import numpy as np
import pytest
from numpy.testing import assert_allclose

from elastodesign.geometry import BoundaryGeometry, boundary_distance
from elastodesign.meshing import (
    MeshError,
    build_mesh,
    build_subdomains,
    roi_mask,
    write_mesh_file,
)

GEOM = BoundaryGeometry(radius=1e-3)


@pytest.fixture(scope="module")
def mesh():
    return build_mesh(GEOM, 1632)


@pytest.fixture(scope="module")
def partition(mesh):
    return build_subdomains(mesh, 50)


def test_element_count_near_target(mesh):
    assert 1200 <= mesh.n_elements <= 2000


def test_all_areas_positive(mesh):
    assert np.all(mesh.element_areas > 0)


def test_total_area_matches_analytic(mesh):
    r = GEOM.radius
    expected = (1 + 2 * r) ** 2 - (4 - np.pi) * r**2
    assert abs(mesh.area - expected) / expected <= 1e-4


def test_boundary_polyline_close_to_curve(mesh):
    p0 = mesh.vertices[mesh.boundary_edges[:, 0]]
    p1 = mesh.vertices[mesh.boundary_edges[:, 1]]
    worst = 0.0
    for s in np.linspace(0.0, 1.0, 11):
        worst = max(worst, float(boundary_distance(GEOM, p0 * (1 - s) + p1 * s).max()))
    assert worst <= 1e-6


def test_conforming_no_hanging_nodes(mesh):
    edges = np.concatenate(
        [mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]], mesh.triangles[:, [2, 0]]]
    )
    _, counts = np.unique(np.sort(edges, axis=1), axis=0, return_counts=True)
    assert counts.max() == 2  # interior edges shared by exactly two elements
    # every vertex is used by some triangle
    assert np.unique(mesh.triangles).size == mesh.n_vertices


def test_boundary_edges_form_closed_loop(mesh):
    be = mesh.boundary_edges
    starts = np.sort(be[:, 0])
    ends = np.sort(be[:, 1])
    assert np.array_equal(starts, ends)  # each boundary vertex once in, once out


def test_dirichlet_segments_length(mesh):
    p0 = mesh.vertices[mesh.boundary_edges[:, 0]]
    p1 = mesh.vertices[mesh.boundary_edges[:, 1]]
    lengths = np.linalg.norm(p1 - p0, axis=1)
    total = lengths[mesh.boundary_dirichlet].sum()
    assert abs(total - 0.4) <= mesh.max_edge_length


def test_dirichlet_edges_centered(mesh):
    a = GEOM.half_width
    mids = 0.5 * (
        mesh.vertices[mesh.boundary_edges[:, 0]] + mesh.vertices[mesh.boundary_edges[:, 1]]
    )
    tagged = mids[mesh.boundary_dirichlet]
    assert np.all(np.abs(np.abs(tagged[:, 1]) - a) < 1e-12)  # on top/bottom edges
    assert np.all(np.abs(tagged[:, 0]) <= 0.1 + mesh.max_edge_length)


def test_dirichlet_nodes_nonempty_and_within_span(mesh):
    assert mesh.dirichlet_nodes.size > 0
    pts = mesh.nodes[mesh.dirichlet_nodes]
    assert np.all(np.abs(pts[:, 0]) <= 0.1 + mesh.max_edge_length)


def test_boundary_arc_params_consistent(mesh):
    L = GEOM.circumference
    t0, t1 = mesh.boundary_arc[:, 0], mesh.boundary_arc[:, 1]
    assert np.all(t1 > t0)
    assert abs((t1 - t0).sum() - L) <= 1e-9  # boundary edges tile the circumference


def test_rejects_tiny_target():
    with pytest.raises(MeshError):
        build_mesh(GEOM, 10)


def test_coarse_target_covers_default_partition():
    coarse = build_mesh(GEOM, 50)
    part = build_subdomains(coarse, 50)
    assert np.all(part.areas > 0)


def test_subdomain_count_and_coverage(mesh, partition):
    assert partition.count == 50
    assert partition.labels.shape == (mesh.n_elements,)
    assert np.all(partition.areas > 0)


def test_subdomain_areas_uniform(mesh, partition):
    target = mesh.area / 50
    assert np.all(np.abs(partition.areas - target) <= 0.1 * target)


def test_subdomain_areas_sum_to_mesh_area(mesh, partition):
    assert abs(partition.areas.sum() - mesh.area) <= 1e-12 * mesh.area


def test_two_subdomain_partition(mesh):
    part = build_subdomains(mesh, 2)
    assert part.count == 2
    # the two triangles share the cell center and have point-symmetric centroids
    assert_allclose(part.midpoints[0], part.midpoints[1], atol=1e-15)
    assert_allclose(part.centroids[0], -part.centroids[1], atol=1e-15)


def test_invalid_subdomain_count(mesh):
    with pytest.raises(MeshError):
        build_subdomains(mesh, 49)


def test_too_coarse_partition_rejected():
    coarse = build_mesh(GEOM, 50)
    with pytest.raises(MeshError, match="too coarse"):
        build_subdomains(coarse, 2 * 20**2)


def test_roi_mask_counts(partition):
    mask = roi_mask(partition)
    assert mask.sum() == 46
    assert (1 - mask).sum() == 4


def test_roi_mask_idempotent(partition):
    mask = roi_mask(partition)
    assert np.array_equal(mask * mask, mask)


def test_roi_excluded_cells_touch_clamped_span(partition):
    # Excluded subdomains sit in the boundary-row cells whose x-extent meets
    # the clamped span; verified at the level of their ideal cells.
    a = GEOM.half_width
    wd = partition.cell_width
    k = partition.grid
    mask = roi_mask(partition)
    for sub in np.flatnonzero(mask == 0):
        cell = sub // 2
        row, col = divmod(cell, k)
        assert row in (0, k - 1)  # touches y = -(0.5+r) or y = +(0.5+r)
        x_lo = -a + col * wd
        assert x_lo < 0.1 and x_lo + wd > -0.1


def test_mesh_export_roundtrip(tmp_path, mesh, partition):
    path = tmp_path / "mesh.txt"
    write_mesh_file(mesh, path, partition)
    nodes, elements = [], []
    for ln, line in enumerate(path.read_text().splitlines(), 1):
        if line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "node":
            nodes.append([float(parts[2]), float(parts[3])])
        elif parts[0] == "element":
            elements.append([int(v) for v in parts[2:]])
        else:
            raise AssertionError(f"unexpected record at line {ln}")
    assert_allclose(np.asarray(nodes), mesh.vertices)
    elements = np.asarray(elements)
    assert np.array_equal(elements[:, :3], mesh.triangles)
    assert np.array_equal(elements[:, 3], partition.labels)
