import numpy as np
import pytest

from vemtransport.darcy import (
    DarcyError,
    DarcyProblem,
    analytic_velocity,
    pressure_l2_error,
    solve_darcy_mixed,
    velocity_l2_error,
)
from vemtransport.element import MonomialBasis
from vemtransport.geometry import generate_hexa, generate_quad, generate_voronoi
from vemtransport.quadrature import edge_rule, polygon_rule


def all_dirichlet(mesh):
    return frozenset(int(e) for e in mesh.boundary_edges)


def exp_field(p):
    return np.column_stack([np.exp(p[:, 0]), np.exp(p[:, 1])])


def exp_pressure(p):
    return np.exp(p[:, 0]) + np.exp(p[:, 1])


def exp_divergence(p):
    return np.exp(p[:, 0]) + np.exp(p[:, 1])


MESHES = {
    "quad": lambda: generate_quad(4),
    "hexa": lambda: generate_hexa(1),
    "voro": lambda: generate_voronoi(16, lloyd_iters=40, rng_seed=5),
    "rand": lambda: generate_voronoi(16, lloyd_iters=0, rng_seed=11),
}


class TestPatchTest:
    @pytest.mark.parametrize("family", list(MESHES))
    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_affine_pressure_exact(self, family, k):
        mesh = MESHES[family]()
        prob = DarcyProblem(g_D=lambda p: p[:, 0], dirichlet_edges=all_dirichlet(mesh))
        vel, pres = solve_darcy_mixed(mesh, prob, k)
        uerr = velocity_l2_error(
            vel, lambda p: np.column_stack([np.ones(len(p)), np.zeros(len(p))])
        )
        assert uerr < 1e-10
        if k >= 1:
            assert pressure_l2_error(pres, lambda p: p[:, 0], mesh) < 1e-10

    def test_permeability_scaling(self):
        mesh = generate_quad(3)
        prob = DarcyProblem(
            K_perm=2.0, mu=0.5, g_D=lambda p: p[:, 1], dirichlet_edges=all_dirichlet(mesh)
        )
        vel, _ = solve_darcy_mixed(mesh, prob, 1)
        # u = (K/mu) grad p = 4 e_y
        uerr = velocity_l2_error(
            vel, lambda p: np.column_stack([np.zeros(len(p)), 4.0 * np.ones(len(p))])
        )
        assert uerr < 1e-9


class TestManufacturedRates:
    @pytest.mark.parametrize("k", [1, 2])
    def test_velocity_rate_is_k_plus_one(self, k):
        errs, hs = [], []
        for n in (4, 8, 16):
            mesh = generate_quad(n)
            prob = DarcyProblem(
                f=exp_divergence, g_D=exp_pressure, dirichlet_edges=all_dirichlet(mesh)
            )
            vel, _ = solve_darcy_mixed(mesh, prob, k)
            errs.append(velocity_l2_error(vel, exp_field))
            hs.append(mesh.mesh_size)
        rate = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert abs(rate - (k + 1)) < 0.2


class TestConservation:
    def test_elementwise_divergence_is_projected_source(self):
        mesh = generate_quad(8)
        prob = DarcyProblem(
            f=exp_divergence, g_D=exp_pressure, dirichlet_edges=all_dirichlet(mesh)
        )
        k = 1
        vel, _ = solve_darcy_mixed(mesh, prob, k)
        worst = 0.0
        for ci in range(mesh.num_cells):
            rule = polygon_rule(mesh.cell_polygon(ci), 2 * k + 2)
            basis = MonomialBasis(k, mesh.cell_centroids[ci], mesh.cell_diameters[ci])
            phi = basis.evaluate(rule.points)
            H = phi.T @ (rule.weights[:, None] * phi)
            proj = np.linalg.solve(H, phi.T @ (rule.weights * exp_divergence(rule.points)))
            dv = vel.divergence_values(ci, rule.points)
            worst = max(worst, np.max(np.abs(dv - phi @ proj)))
        assert worst < 1e-10

    def test_per_cell_flux_balance(self):
        # divergence theorem per cell ties the edge fluxes to the divergence
        mesh = generate_voronoi(25, lloyd_iters=20, rng_seed=3)
        prob = DarcyProblem(
            f=exp_divergence, g_D=exp_pressure, dirichlet_edges=all_dirichlet(mesh)
        )
        k = 1
        vel, _ = solve_darcy_mixed(mesh, prob, k)
        for ci in range(mesh.num_cells):
            outflux = 0.0
            for e, direction in mesh.cell_edges[ci]:
                p0, p1 = mesh.edge_points(e)
                er = edge_rule(p0, p1, 2 * k + 2)
                vals = vel.edge_flux_values(e, er.params)
                outflux += direction * float(er.weights @ vals)
            rule = polygon_rule(mesh.cell_polygon(ci), 4)
            div_int = float(rule.weights @ vel.divergence_values(ci, rule.points))
            assert abs(outflux - div_int) < 1e-10

    def test_interior_fluxes_single_valued(self):
        # by construction one flux polynomial per edge; sanity via storage shape
        mesh = generate_quad(3)
        prob = DarcyProblem(g_D=lambda p: p[:, 0], dirichlet_edges=all_dirichlet(mesh))
        vel, _ = solve_darcy_mixed(mesh, prob, 2)
        assert vel.edge_flux_coeffs.shape == (mesh.num_edges, 3)


class TestNeumannAndCompatibility:
    def test_pure_neumann_incompatible_data_reported(self):
        mesh = generate_quad(3)
        prob = DarcyProblem(
            f=lambda p: np.ones(len(p)),  # integral 1
            g_N=lambda p: np.zeros(len(p)),  # boundary integral 0
            dirichlet_edges=frozenset(),
        )
        with pytest.raises(DarcyError, match="compatibility"):
            solve_darcy_mixed(mesh, prob, 1)

    def test_pure_neumann_compatible_solves_with_gauge(self):
        mesh = generate_quad(4)
        # f with zero mean; g_N = 0
        prob = DarcyProblem(
            f=lambda p: np.cos(np.pi * p[:, 0]) * np.cos(np.pi * p[:, 1]),
            g_N=lambda p: np.zeros(len(p)),
            dirichlet_edges=frozenset(),
        )
        vel, pres = solve_darcy_mixed(mesh, prob, 1)
        # zero-mean pressure gauge
        total = 0.0
        for ci in range(mesh.num_cells):
            rule = polygon_rule(mesh.cell_polygon(ci), 3)
            total += float(rule.weights @ pres.values(ci, rule.points))
        assert abs(total) < 1e-9

    def test_mixed_boundary_types(self):
        # exact solution p = y: flux through y-walls, pressure on x-walls
        mesh = generate_quad(4)
        dirichlet, neumann = [], []
        for e in mesh.boundary_edges:
            mid = 0.5 * (mesh.vertices[mesh.edges[e, 0]] + mesh.vertices[mesh.edges[e, 1]])
            if mid[0] < 1e-12 or mid[0] > 1 - 1e-12:
                dirichlet.append(int(e))
            else:
                neumann.append(int(e))

        def g_N(p):
            # u = (0, 1): outward flux is -1 at y=0 and +1 at y=1
            return np.where(p[:, 1] > 0.5, 1.0, -1.0)

        prob = DarcyProblem(
            g_D=lambda p: p[:, 1], g_N=g_N, dirichlet_edges=frozenset(dirichlet)
        )
        vel, pres = solve_darcy_mixed(mesh, prob, 1)
        uerr = velocity_l2_error(
            vel, lambda p: np.column_stack([np.zeros(len(p)), np.ones(len(p))])
        )
        assert uerr < 1e-9
        assert pressure_l2_error(pres, lambda p: p[:, 1], mesh) < 1e-9


class TestAnalyticVelocity:
    def test_unit_field_edge_fluxes(self):
        mesh = generate_quad(2)
        vel = analytic_velocity(
            lambda p: np.column_stack([np.ones(len(p)), np.zeros(len(p))]), mesh, 1
        )
        for e in range(mesh.num_edges):
            p0, p1 = mesh.edge_points(e)
            vals = vel.edge_flux_values(e, np.array([0.3, 0.7]))
            if abs(p0[0] - p1[0]) < 1e-14:  # vertical edge
                assert np.allclose(np.abs(vals), 1.0, atol=1e-12)
            else:
                assert np.max(np.abs(vals)) < 1e-12

    def test_exponential_means(self):
        mesh = generate_quad(4)
        vel = analytic_velocity(exp_field, mesh, 1)
        for ci in range(mesh.num_cells):
            rule = polygon_rule(mesh.cell_polygon(ci), 4)
            mean_proj = rule.weights @ vel.velocity_values(ci, rule.points)[:, 0]
            mean_exact = rule.weights @ np.exp(rule.points[:, 0])
            assert abs(mean_proj - mean_exact) < 1e-8

    def test_zero_field(self):
        mesh = generate_quad(2)
        vel = analytic_velocity(lambda p: np.zeros((len(p), 2)), mesh, 2)
        assert np.max(np.abs(vel.edge_flux_coeffs)) == 0.0
        assert velocity_l2_error(vel, lambda p: np.zeros((len(p), 2))) == 0.0

    def test_divergence_callback(self):
        mesh = generate_quad(2)
        vel = analytic_velocity(exp_field, mesh, 2, div_callback=exp_divergence)
        # the stored polynomial is the L2 projection: cell means must agree
        rule = polygon_rule(mesh.cell_polygon(0), 6)
        got = rule.weights @ vel.divergence_values(0, rule.points)
        want = rule.weights @ exp_divergence(rule.points)
        assert abs(got - want) < 1e-10

    def test_divergence_unavailable_raises(self):
        mesh = generate_quad(2)
        vel = analytic_velocity(exp_field, mesh, 1)
        with pytest.raises(DarcyError):
            vel.divergence_values(0, np.array([[0.1, 0.1]]))


class TestProblemValidation:
    def test_positive_coefficients_required(self):
        with pytest.raises(DarcyError):
            DarcyProblem(K_perm=0.0)
        with pytest.raises(DarcyError):
            DarcyProblem(mu=-1.0)

    def test_dirichlet_edges_must_lie_on_boundary(self):
        mesh = generate_quad(3)
        interior = [e for e in range(mesh.num_edges) if not mesh.is_boundary_edge(e)]
        prob = DarcyProblem(dirichlet_edges=frozenset(interior[:1]))
        with pytest.raises(DarcyError):
            solve_darcy_mixed(mesh, prob, 1)
