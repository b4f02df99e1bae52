import numpy as np
import pytest

from vemtransport import geometry
from vemtransport.darcy import analytic_velocity
from vemtransport.geometry import (
    BoundaryPartition,
    MeshError,
    PolyMesh,
    audit_mesh,
    classify_boundary,
    generate_hexa,
    generate_quad,
    generate_voronoi,
)

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def euler_characteristic(mesh):
    return mesh.num_vertices - mesh.num_edges + mesh.num_cells


class TestQuadGenerator:
    def test_single_cell(self):
        m = generate_quad(1)
        assert m.num_cells == 1
        assert m.num_vertices == 4
        assert len(m.boundary_edges) == 4

    def test_two_by_two(self):
        m = generate_quad(2)
        assert m.num_cells == 4
        assert m.num_vertices == 9
        assert abs(m.mesh_size - np.sqrt(2.0) / 2.0) < 1e-15

    def test_areas_partition_unity(self):
        m = generate_quad(4)
        assert m.num_cells == 16
        assert abs(m.cell_areas.sum() - 1.0) < 1e-14

    def test_rejects_zero(self):
        with pytest.raises(MeshError):
            generate_quad(0)


class TestHexaGenerator:
    def test_covers_unit_square(self):
        m = generate_hexa(1)
        assert abs(m.cell_areas.sum() - 1.0) < 1e-12

    def test_h_decreases_with_level(self):
        h1 = generate_hexa(1).mesh_size
        h2 = generate_hexa(2).mesh_size
        assert h2 < h1

    @pytest.mark.parametrize("level", [1, 2])
    def test_audit_passes_default_thresholds(self, level):
        assert audit_mesh(generate_hexa(level)).passed

    def test_rejects_level_zero(self):
        with pytest.raises(MeshError):
            generate_hexa(0)

    def test_regular_variant_mirror_symmetric(self):
        m = generate_hexa(1, distortion=0.0)
        from scipy.spatial import cKDTree

        tree = cKDTree(m.vertices)
        mirrored = m.vertices * np.array([-1.0, 1.0]) + np.array([1.0, 0.0])
        d, _ = tree.query(mirrored)
        assert d.max() < 1e-9


class TestVoronoiGenerator:
    def test_two_seeds_single_bisector(self):
        m = generate_voronoi(2, rng_seed=3)
        assert m.num_cells == 2
        interior = [e for e in range(m.num_edges) if not m.is_boundary_edge(e)]
        assert len(interior) == 1

    def test_lloyd_energy_non_increasing(self):
        m = generate_voronoi(64, lloyd_iters=100, rng_seed=7)
        e = m.meta["lloyd_energy"]
        assert len(e) == 101
        assert all(e[i + 1] <= e[i] * (1.0 + 1e-12) for i in range(len(e) - 1))

    def test_deterministic_for_fixed_seed(self):
        a = generate_voronoi(32, lloyd_iters=5, rng_seed=11)
        b = generate_voronoi(32, lloyd_iters=5, rng_seed=11)
        assert np.array_equal(a.vertices, b.vertices)
        assert all(np.array_equal(x, y) for x, y in zip(a.cells, b.cells))

    def test_rejects_single_seed(self):
        with pytest.raises(MeshError):
            generate_voronoi(1)

    def test_area_partition(self):
        m = generate_voronoi(64, lloyd_iters=0, rng_seed=5)
        assert abs(m.cell_areas.sum() - 1.0) < 1e-12


@pytest.mark.parametrize(
    "mesh_factory",
    [
        lambda: generate_quad(4),
        lambda: generate_hexa(1),
        lambda: generate_voronoi(40, lloyd_iters=20, rng_seed=1),
        lambda: generate_voronoi(40, lloyd_iters=0, rng_seed=1),
    ],
    ids=["quad", "hexa", "voro", "rand"],
)
class TestMeshInvariants:
    def test_euler_formula(self, mesh_factory):
        assert euler_characteristic(mesh_factory()) == 1

    def test_area_partition(self, mesh_factory):
        assert abs(mesh_factory().cell_areas.sum() - 1.0) < 1e-12

    def test_edge_incidence(self, mesh_factory):
        mesh = mesh_factory()
        for e in range(mesh.num_edges):
            n_inc = int(mesh.edge_cells[e, 0] >= 0) + int(mesh.edge_cells[e, 1] >= 0)
            assert n_inc == (1 if mesh.is_boundary_edge(e) else 2)

    def test_boundary_normals_outward_unit(self, mesh_factory):
        mesh = mesh_factory()
        for e in mesh.boundary_edges:
            n = mesh.outward_normal(e)
            assert abs(np.hypot(*n) - 1.0) < 1e-12
            mid = 0.5 * (mesh.vertices[mesh.edges[e, 0]] + mesh.vertices[mesh.edges[e, 1]])
            c = mesh.cell_centroids[mesh.edge_cells[e, 0]]
            assert np.dot(n, mid - c) > 0.0

    def test_mesh_size_is_max_diameter(self, mesh_factory):
        mesh = mesh_factory()
        diams = []
        for ci in range(mesh.num_cells):
            verts = mesh.cell_polygon(ci)
            d2 = np.sum((verts[:, None] - verts[None, :]) ** 2, axis=-1)
            diams.append(np.sqrt(d2.max()))
        assert abs(mesh.mesh_size - max(diams)) < 1e-15


class TestClassifyBoundary:
    def test_exponential_field_splits_walls(self):
        mesh = generate_quad(4)
        vel = analytic_velocity(
            lambda p: np.column_stack([np.exp(p[:, 0]), np.exp(p[:, 1])]), mesh, 1
        )
        part = classify_boundary(mesh, vel)
        for e in mesh.boundary_edges:
            mid = 0.5 * (mesh.vertices[mesh.edges[e, 0]] + mesh.vertices[mesh.edges[e, 1]])
            if mid[0] < 1e-12 or mid[1] < 1e-12:
                assert int(e) in part.inflow
            else:
                assert int(e) in part.outflow

    def test_unit_x_field_ties_go_to_outflow(self):
        mesh = generate_quad(2)
        vel = analytic_velocity(
            lambda p: np.column_stack([np.ones(len(p)), np.zeros(len(p))]), mesh, 1
        )
        part = classify_boundary(mesh, vel)
        for e in mesh.boundary_edges:
            mid = 0.5 * (mesh.vertices[mesh.edges[e, 0]] + mesh.vertices[mesh.edges[e, 1]])
            if mid[0] < 1e-12:
                assert int(e) in part.inflow
            else:
                # x = 1 outflows; y = 0 and y = 1 have u.n = 0, tie to outflow
                assert int(e) in part.outflow

    def test_zero_field_all_outflow(self):
        mesh = generate_quad(2)
        vel = analytic_velocity(lambda p: np.zeros((len(p), 2)), mesh, 1)
        part = classify_boundary(mesh, vel)
        assert not part.inflow
        assert len(part.outflow) == len(mesh.boundary_edges)

    def test_invariant_under_positive_scaling(self):
        mesh = generate_voronoi(30, lloyd_iters=10, rng_seed=9)
        u = lambda p: np.column_stack([p[:, 0] - 0.3, np.sin(3 * p[:, 1]) - 0.4])
        for alpha in (1.0, 7.5, 0.01):
            vel = analytic_velocity(lambda p: alpha * u(p), mesh, 2)
            part = classify_boundary(mesh, vel)
            if alpha == 1.0:
                ref = part
            else:
                assert part.inflow == ref.inflow
                assert part.outflow == ref.outflow

    def test_partition_validation(self):
        mesh = generate_quad(2)
        boundary = frozenset(int(e) for e in mesh.boundary_edges)
        some = frozenset(list(boundary)[:2])
        with pytest.raises(MeshError):
            BoundaryPartition(some, frozenset(), boundary, frozenset()).validate(mesh)
        with pytest.raises(MeshError):
            BoundaryPartition(boundary, some, boundary, frozenset()).validate(mesh)


class TestAuditMesh:
    def test_unit_square(self):
        mesh = PolyMesh(SQUARE, [[0, 1, 2, 3]])
        rep = audit_mesh(mesh)
        assert abs(rep.cells[0].rho_ratio - 0.5 / np.sqrt(2.0)) < 1e-9
        assert rep.cells[0].edge_count == 4

    def test_regular_hexagon_passes_gamma_03(self):
        ang = np.linspace(0.0, 2.0 * np.pi, 7)[:-1]
        hexa = 0.5 * np.column_stack([np.cos(ang), np.sin(ang)])  # unit diameter
        mesh = PolyMesh(hexa, [list(range(6))])
        rep = audit_mesh(mesh, gamma0=0.3, n0=16)
        assert rep.passed
        assert rep.cells[0].edge_count == 6
        assert abs(rep.cells[0].rho_ratio - np.sqrt(3.0) / 4.0) < 1e-9

    def test_triangle_attains_edge_bound(self):
        tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.4, 0.8]])
        mesh = PolyMesh(tri, [[0, 1, 2]])
        rep = audit_mesh(mesh, gamma0=0.05, n0=3)
        assert rep.passed
        assert rep.cells[0].edge_count == 3

    def test_invariant_under_rigid_motion(self):
        mesh = generate_voronoi(25, lloyd_iters=20, rng_seed=4)
        rep = audit_mesh(mesh, gamma0=0.15, n0=10)
        theta = 0.73
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        moved = PolyMesh(mesh.vertices @ rot.T + np.array([3.0, -1.0]), mesh.cells)
        rep2 = audit_mesh(moved, gamma0=0.15, n0=10)
        assert [c.passed for c in rep.cells] == [c.passed for c in rep2.cells]

    def test_parameter_validation(self):
        mesh = generate_quad(1)
        with pytest.raises(MeshError):
            audit_mesh(mesh, gamma0=0.0)
        with pytest.raises(MeshError):
            audit_mesh(mesh, n0=2)


class TestPolyMeshValidation:
    def test_rejects_clockwise_cell(self):
        with pytest.raises(MeshError):
            PolyMesh(SQUARE, [[0, 3, 2, 1]])

    def test_rejects_self_intersecting_cell(self):
        with pytest.raises(MeshError):
            PolyMesh(SQUARE, [[0, 2, 1, 3]])

    def test_permuted_preserves_geometry(self):
        mesh = generate_quad(3)
        perm = list(reversed(range(mesh.num_cells)))
        other = mesh.permuted(perm)
        assert euler_characteristic(other) == 1
        assert abs(other.cell_areas.sum() - 1.0) < 1e-14
        assert set(map(tuple, other.edges.tolist())) == set(map(tuple, mesh.edges.tolist()))
