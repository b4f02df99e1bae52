"""Built-in data sets: the manufactured smooth problem driving the
convergence studies and the five-well injection example.

The manufactured concentration is sin(t) exp((x-1)^2 (y-1)^2) under the
flow (e^x, e^y); its diffusive flux vanishes identically on the outflow
walls x = 1 and y = 1. The inflow datum is chosen so the inflow boundary
condition holds exactly for every diffusion coefficient:
c_I = c - D (grad c . n) / (u . n).
"""

import numpy as np


class ManufacturedProblem:
    """Smooth transport problem with known solution on (0,1)^2."""

    def __init__(self, D=1.0):
        self.D = float(D)
        self.K_perm = 1.0
        self.mu = 1.0
        self.t_final = 1.0

    # flow -------------------------------------------------------------

    def velocity(self, p):
        return np.column_stack([np.exp(p[:, 0]), np.exp(p[:, 1])])

    def pressure(self, p):
        return np.exp(p[:, 0]) + np.exp(p[:, 1])

    def f(self, t, p):
        return np.exp(p[:, 0]) + np.exp(p[:, 1])

    def darcy_f(self, p):
        return np.exp(p[:, 0]) + np.exp(p[:, 1])

    def darcy_g_D(self, p):
        return self.pressure(p)

    # concentration ------------------------------------------------------

    @staticmethod
    def _shape(p):
        x, y = p[:, 0], p[:, 1]
        g = np.exp((x - 1.0) ** 2 * (y - 1.0) ** 2)
        gx = 2.0 * (x - 1.0) * (y - 1.0) ** 2 * g
        gy = 2.0 * (y - 1.0) * (x - 1.0) ** 2 * g
        gxx = (2.0 * (y - 1.0) ** 2 + 4.0 * (x - 1.0) ** 2 * (y - 1.0) ** 4) * g
        gyy = (2.0 * (x - 1.0) ** 2 + 4.0 * (y - 1.0) ** 2 * (x - 1.0) ** 4) * g
        return g, gx, gy, gxx, gyy

    def c(self, t, p):
        g, *_ = self._shape(p)
        return np.sin(t) * g

    def grad_c(self, t, p):
        _, gx, gy, _, _ = self._shape(p)
        return np.sin(t) * np.column_stack([gx, gy])

    def c0(self, p):
        return np.zeros(len(p))

    def c_tilde(self, t, p):
        """Injected concentration manufactured from the strong equation."""
        g, gx, gy, gxx, gyy = self._shape(p)
        u = self.velocity(p)
        f = self.f(t, p)
        ct = np.cos(t) * g
        conv = np.sin(t) * (u[:, 0] * gx + u[:, 1] * gy)
        lap = np.sin(t) * (gxx + gyy)
        return (ct + conv + f * np.sin(t) * g - self.D * lap) / f

    def c_inflow(self, t, p, normal):
        """Inflow datum consistent with the exact total-flux condition."""
        un = self.velocity(p) @ np.asarray(normal, dtype=float)
        gn = self.grad_c(t, p) @ np.asarray(normal, dtype=float)
        safe = np.where(un < -1e-12, un, -1.0)
        return np.where(un < -1e-12, self.c(t, p) - self.D * gn / safe, 0.0)


class WellsProblem:
    """Central injection well against four corner sinks on (0,1)^2.

    Gaussian bell sources/sinks of width parameter sigma = 100; variants
    differ in the corner sink strengths. The boundary is impermeable
    (g_N = 0 everywhere), so the flow problem is pure Neumann and the
    source must be corrected to zero mean for solvability; use
    `corrected_darcy_f` for the flow solve.
    """

    VARIANTS = {
        "homo": {"s00": 0.3, "s01": 0.3, "s10": 0.3, "s11": 0.3},
        "vert": {"s00": 0.3, "s10": 0.3, "s01": 0.6, "s11": 0.6},
        "diag": {"s00": 0.6, "s11": 0.6, "s01": 0.3, "s10": 0.3},
    }

    def __init__(self, variant="homo"):
        if variant not in self.VARIANTS:
            raise ValueError(f"unknown wells variant {variant!r}")
        self.variant = variant
        self.sigma = 100.0
        self.s_center = 0.3
        self.strengths = self.VARIANTS[variant]
        self.centers = {
            "c": np.array([0.5, 0.5]),
            "s00": np.array([0.15, 0.15]),
            "s10": np.array([0.15, 0.85]),
            "s01": np.array([0.85, 0.15]),
            "s11": np.array([0.85, 0.85]),
        }
        self.D = 0.001
        self.K_perm = 1.0
        self.mu = 1.0
        self.t_final = 10.0
        self.dt = 0.1

    def _bell(self, p, center):
        d2 = np.sum((p - center[None, :]) ** 2, axis=1)
        return np.exp(-self.sigma * d2)

    def f(self, t, p):
        out = self.s_center * self._bell(p, self.centers["c"])
        for key, s in self.strengths.items():
            out = out - s * self._bell(p, self.centers[key])
        return out

    def darcy_f(self, p):
        return self.f(0.0, p)

    def f_mean(self, mesh, quad_degree=8):
        """Domain integral of f divided by the domain area."""
        from .quadrature import polygon_rule

        total = 0.0
        for ci in range(mesh.num_cells):
            rule = polygon_rule(mesh.cell_polygon(ci), quad_degree)
            total += float(rule.weights @ self.darcy_f(rule.points))
        return total / float(mesh.cell_areas.sum())

    def corrected_darcy_f(self, mesh):
        """Zero-mean source for the pure-Neumann flow solve.

        Returns (callback, mean_removed); the correction is logged by the
        caller, never applied silently.
        """
        mean = self.f_mean(mesh)
        return (lambda p: self.darcy_f(p) - mean), mean

    def g_N(self, p):
        return np.zeros(len(p))

    def c_tilde(self, t, p):
        value = t if t <= 1.0 else 0.0
        return np.full(len(p), value)

    def c_inflow(self, t, p, normal):
        return np.zeros(len(p))

    def c0(self, p):
        return np.zeros(len(p))


def get_problem(name, **kwargs):
    """Instantiate a named built-in data set.

    Names: "manufactured" (kwargs: D) or "wells:<variant>" with variant
    homo, vert, or diag.
    """
    if name == "manufactured":
        return ManufacturedProblem(**kwargs)
    if name.startswith("wells:"):
        return WellsProblem(variant=name.split(":", 1)[1])
    raise KeyError(f"unknown problem {name!r}")
