"""Global semi-discrete transport operators on the VEM space.

Assembles the mass form, the dissipation-neutral advection operator
(diffusion + skew convection pairing + half boundary and reaction
terms), and the source/inflow right-hand sides. The boundary form
integrates |u . n| over every boundary edge; inflow data enters through
the negative part of the normal flux, so it is active exactly on the
inflow region.
"""

import numpy as np
import scipy.sparse as sp

from .element import VemSpace, edge_trace_matrix, edge_trace_vector
from .linalg import PatternMatrix


class TransportProblem:
    """Coefficients and data callbacks for the transport equation.

    Parameters
    ----------
    D : float
        Positive scalar diffusion coefficient.
    velocity : DiscreteVelocity
        Stationary flow field (analytic or mixed-VEM).
    f : callable (t, points) -> values
        Source/sink density shared with the flow problem.
    c_tilde : callable (t, points) -> values
        Injected concentration, active where f > 0.
    c_inflow : callable (t, points, normal) -> values
        Inflow concentration, active where u . n < 0.
    c0 : callable (points) -> values
        Initial condition.
    t_final : float
        End of the simulation window.
    f_time_dependent : bool
        When False the spatial operators are assembled once and reused.
    reduce_gradient_degree : bool
        Project the convected gradient at degree k-1 instead of k.
    """

    def __init__(
        self,
        D,
        velocity,
        f=None,
        c_tilde=None,
        c_inflow=None,
        c0=None,
        t_final=1.0,
        f_time_dependent=False,
        reduce_gradient_degree=False,
    ):
        if D <= 0.0:
            raise ValueError("diffusion coefficient must be positive")
        self.D = D
        self.velocity = velocity
        self.f = f or (lambda t, p: np.zeros(len(p)))
        self.c_tilde = c_tilde or (lambda t, p: np.zeros(len(p)))
        self.c_inflow = c_inflow or (lambda t, p, n: np.zeros(len(p)))
        self.c0 = c0 or (lambda p: np.zeros(len(p)))
        self.t_final = t_final
        self.f_time_dependent = f_time_dependent
        self.reduce_gradient_degree = reduce_gradient_degree


class TransportSystem:
    """Assembled global operators for one mesh/degree/problem triple."""

    def __init__(self, mesh, k, problem):
        self.mesh = mesh
        self.k = k
        self.problem = problem
        self.space = VemSpace(mesh, k)
        self._edge_cache = []
        for e in mesh.boundary_edges:
            e = int(e)
            p0, p1 = mesh.edge_points(e)
            self._edge_cache.append((e, p0, p1, self.space.edge_trace_dofs(e)))
        self._mass = None
        self._parts_cache = {}

    # -- assembly ------------------------------------------------------

    def _new_pattern(self):
        return PatternMatrix.from_dof_lists(
            self.space.n_dofs, self.space.n_dofs, self.space.cell_dofs
        )

    def mass(self):
        """Global mass matrix (assembled once)."""
        if self._mass is None:
            pm = self._new_pattern()
            for ci, elem in enumerate(self.space.elements):
                pm.scatter_add(self.space.cell_dofs[ci], elem.mass_matrix())
            self._mass = pm.matrix()
        return self._mass

    def operator_parts(self, t=0.0):
        """Diffusion, skew convection, boundary, and reaction matrices at time t.

        Returns (A, B_skew, Lam, R) with the advection operator equal to
        A + B_skew + (Lam + R) / 2. Cached when f is time-independent.
        """
        key = None if self.problem.f_time_dependent else "static"
        if key is not None and key in self._parts_cache:
            return self._parts_cache[key]
        space, problem = self.space, self.problem
        pm_a = self._new_pattern()
        pm_k = self._new_pattern()
        pm_r = self._new_pattern()
        for ci, elem in enumerate(space.elements):
            dofs = space.cell_dofs[ci]
            pm_a.scatter_add(dofs, elem.stiffness_matrix(problem.D))
            u_coef = problem.velocity.velocity_coefficients(ci)
            pm_k.scatter_add(
                dofs,
                elem.convection_matrix(
                    u_coef, reduce_gradient_degree=problem.reduce_gradient_degree
                ),
            )
            pm_r.scatter_add(dofs, elem.reaction_matrix(lambda p: problem.f(t, p)))
        lam = sp.lil_matrix((space.n_dofs, space.n_dofs))
        for e, p0, p1, dofs in self._edge_cache:
            weight = lambda params: np.abs(problem.velocity.edge_outward_flux_values(e, params))
            block = edge_trace_matrix(p0, p1, self.k, weight)
            lam[np.ix_(dofs, dofs)] += block
        K = pm_k.matrix()
        parts = (
            pm_a.matrix(),
            0.5 * (K - K.T).tocsr(),
            lam.tocsr(),
            pm_r.matrix(),
        )
        if key is not None:
            self._parts_cache[key] = parts
        return parts

    def advection_operator(self, t=0.0):
        """The full spatial operator A0(t)."""
        if not self.problem.f_time_dependent and "a0" in self._parts_cache:
            return self._parts_cache["a0"]
        A, B, Lam, R = self.operator_parts(t)
        a0 = (A + B + 0.5 * (Lam + R)).tocsr()
        if not self.problem.f_time_dependent:
            self._parts_cache["a0"] = a0
        return a0

    def rhs(self, t):
        """Source and inflow functionals (F_plus, G_inflow) at time t."""
        space, problem = self.space, self.problem
        F = np.zeros(space.n_dofs)
        for ci, elem in enumerate(space.elements):
            pts = elem.data_points
            fv = np.asarray(problem.f(t, pts), dtype=float)
            vals = np.maximum(fv, 0.0) * np.asarray(problem.c_tilde(t, pts), dtype=float)
            F[space.cell_dofs[ci]] += elem.load_vector(vals)
        G = np.zeros(space.n_dofs)
        for e, p0, p1, dofs in self._edge_cache:
            normal = self.mesh.outward_normal(e)

            def values(params):
                un = problem.velocity.edge_outward_flux_values(e, params)
                pts = p0[None, :] + params[:, None] * (p1 - p0)[None, :]
                ci_vals = np.asarray(problem.c_inflow(t, pts, normal), dtype=float)
                return -np.minimum(un, 0.0) * ci_vals

            G[dofs] += edge_trace_vector(p0, p1, self.k, values)
        return F, G

    def initial_condition(self):
        """Dof vector interpolating the initial concentration."""
        return self.space.interpolate(self.problem.c0)

    @property
    def stationary(self):
        """True when the spatial operators can be reused across time."""
        return not self.problem.f_time_dependent
