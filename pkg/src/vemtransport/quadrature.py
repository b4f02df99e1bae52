"""Numerical integration on polygons, edges, and time slabs.

Polygon rules fan-triangulate the cell around a star point and apply a
collapsed Gauss-Jacobi x Gauss-Legendre product per triangle, so weights
stay positive and points interior. The temporal rule is the right
Gauss-Radau family on (0, 1] with the endpoint node pinned at 1.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import eval_jacobi, roots_jacobi, roots_legendre

from . import polygon


class QuadratureError(ValueError):
    """Raised for degenerate geometry or a rule failing its exactness check."""


@dataclass(frozen=True)
class PolygonRule:
    """Positive-weight rule integrating polynomials on one polygonal cell."""

    points: np.ndarray
    weights: np.ndarray
    exact_degree: int

    def integrate(self, f):
        return float(self.weights @ f(self.points))


@dataclass(frozen=True)
class EdgeRule:
    """Gauss-Legendre rule mapped to a straight edge.

    ``params`` are the quadrature abscissae in (0, 1) along p0 -> p1.
    """

    points: np.ndarray
    weights: np.ndarray
    params: np.ndarray
    length: float


@dataclass(frozen=True)
class RadauRule:
    """Right Gauss-Radau rule on (0, 1]: q+1 nodes, exact to degree 2q."""

    q: int
    nodes: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=64)
def _reference_triangle_rule(degree):
    """Collapsed product rule on the reference map (xi, eta) in [0,1]^2."""
    n = max(1, (degree + 2) // 2)
    xj, wj = roots_jacobi(n, 0.0, 1.0)
    xg, wg = roots_legendre(n)
    xi = (xj + 1.0) / 2.0
    wxi = wj / 4.0
    eta = (xg + 1.0) / 2.0
    weta = wg / 2.0
    XI, ETA = np.meshgrid(xi, eta, indexing="ij")
    W = np.outer(wxi, weta)
    return XI.ravel(), ETA.ravel(), W.ravel()


def _gauss_01(npts):
    x, w = roots_legendre(npts)
    return (x + 1.0) / 2.0, w / 2.0


def gauss_interval(a, b, npts):
    """Plain Gauss-Legendre nodes/weights on the interval (a, b)."""
    t, w = _gauss_01(npts)
    return a + (b - a) * t, (b - a) * w


def edge_rule(p0, p1, degree):
    """Gauss-Legendre rule on the segment p0 -> p1, exact to `degree`.

    Raises QuadratureError for a zero-length edge.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    length = float(np.hypot(*(p1 - p0)))
    if length <= 0.0:
        raise QuadratureError("zero-length edge")
    n = max(1, (degree + 2) // 2)
    t, w = _gauss_01(n)
    points = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    return EdgeRule(points=points, weights=w * length, params=t, length=length)


def polygon_rule(verts, degree):
    """Quadrature on a simple polygon, exact for total degree `degree`.

    The cell is fanned into triangles around a star point (centroid for
    convex cells, kernel Chebyshev center otherwise). Fails if no star
    point exists, i.e. the cell violates the mesh regularity assumption.
    """
    verts = np.asarray(verts, dtype=float)
    if degree < 0:
        raise QuadratureError("degree must be >= 0")
    apex = polygon.star_point(verts)
    if apex is None:
        raise QuadratureError("polygon is not star-shaped: no interior fan point")
    xi, eta, w_ref = _reference_triangle_rule(degree)
    pts = []
    wts = []
    nv = len(verts)
    for i in range(nv):
        a = apex
        b = verts[i]
        c = verts[(i + 1) % nv]
        area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if area2 <= 0.0:
            raise QuadratureError("fan triangle with non-positive area")
        p = (
            a[None, :]
            + np.outer(xi, b - a)
            + np.outer(xi * eta, c - b)
        )
        pts.append(p)
        wts.append(w_ref * area2)
    return PolygonRule(
        points=np.vstack(pts),
        weights=np.concatenate(wts),
        exact_degree=degree,
    )


def _radau_interior_nodes(q, tol=1e-14, maxit=60):
    """Interior right-Radau nodes on (0, 1): roots of the Jacobi(1,0) polynomial."""
    s, _ = roots_jacobi(q, 1.0, 0.0)
    for _ in range(maxit):
        f = eval_jacobi(q, 1.0, 0.0, s)
        df = 0.5 * (q + 2) * eval_jacobi(q - 1, 2.0, 1.0, s)
        step = f / df
        s = s - step
        if np.max(np.abs(step)) < tol:
            break
    return (s + 1.0) / 2.0


def gauss_radau(q):
    """Right Gauss-Radau rule with q+1 nodes on (0, 1].

    Nodes are Newton-polished roots of the degree-q Jacobi-type Radau
    polynomial plus the fixed endpoint 1; weights solve the moment
    equations. Construction fails if the rule misses exactness through
    degree 2q by more than 1e-12.
    """
    if not 0 <= q <= 10:
        raise QuadratureError("q must be in [0, 10]")
    if q == 0:
        return RadauRule(q=0, nodes=np.array([1.0]), weights=np.array([1.0]))
    nodes = np.append(_radau_interior_nodes(q), 1.0)
    vander = np.vander(nodes, increasing=True).T
    moments = 1.0 / (1.0 + np.arange(q + 1))
    weights = np.linalg.solve(vander, moments)
    for j in range(2 * q + 1):
        err = abs(weights @ nodes**j - 1.0 / (j + 1))
        if err > 1e-12:
            raise QuadratureError(f"Radau rule q={q} misses moment {j} by {err:.2e}")
    if np.any(weights <= 0.0):
        raise QuadratureError(f"Radau rule q={q} produced non-positive weights")
    return RadauRule(q=q, nodes=nodes, weights=weights)


def map_radau(rule, t_start, t_end):
    """Affine image of a Radau rule on the slab (t_start, t_end].

    The last node equals t_end exactly.
    """
    if not t_end > t_start:
        raise QuadratureError("slab must satisfy t_end > t_start")
    tau = t_end - t_start
    nodes = t_start + tau * rule.nodes
    nodes[-1] = t_end
    return nodes, tau * rule.weights
