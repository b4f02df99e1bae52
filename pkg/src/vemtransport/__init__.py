"""Polygonal virtual-element solver for Darcy-driven transport.

The package couples a mixed virtual-element Darcy solver with a
skew-symmetrized advection-diffusion-reaction discretization on general
polygonal meshes, integrated in time by a discontinuous Galerkin scheme
collocated at Gauss-Radau nodes.
"""

from .geometry import (
    PolyMesh,
    BoundaryPartition,
    generate_quad,
    generate_hexa,
    generate_voronoi,
    classify_boundary,
    audit_mesh,
)
from .quadrature import PolygonRule, RadauRule, polygon_rule, edge_rule, gauss_radau, map_radau
from .element import VemElement, VemSpace
from .darcy import DarcyProblem, DiscreteVelocity, solve_darcy_mixed, analytic_velocity
from .transport import TransportProblem, TransportSystem
from .timestepping import TimePartition, SlabSolution, advance
from .postproc import ErrorReport, error_norms, minmax_trace, rate_table

__version__ = "0.1.0"

__all__ = [
    "PolyMesh",
    "BoundaryPartition",
    "generate_quad",
    "generate_hexa",
    "generate_voronoi",
    "classify_boundary",
    "audit_mesh",
    "PolygonRule",
    "RadauRule",
    "polygon_rule",
    "edge_rule",
    "gauss_radau",
    "map_radau",
    "VemElement",
    "VemSpace",
    "DarcyProblem",
    "DiscreteVelocity",
    "solve_darcy_mixed",
    "analytic_velocity",
    "TransportProblem",
    "TransportSystem",
    "TimePartition",
    "SlabSolution",
    "advance",
    "ErrorReport",
    "error_norms",
    "minmax_trace",
    "rate_table",
    "__version__",
]
