"""Planar polygon primitives shared by the mesh and quadrature layers.

All polygons are (n, 2) float arrays of vertices in counter-clockwise
order unless stated otherwise.
"""

import numpy as np
from scipy.optimize import linprog


def signed_area(verts):
    """Shoelace signed area; positive for counter-clockwise loops."""
    x = verts[:, 0]
    y = verts[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def centroid(verts):
    """Area centroid of a simple polygon."""
    x = verts[:, 0]
    y = verts[:, 1]
    xn = np.roll(x, -1)
    yn = np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * np.sum(cross)
    cx = np.sum((x + xn) * cross) / (6.0 * a)
    cy = np.sum((y + yn) * cross) / (6.0 * a)
    return np.array([cx, cy])


def diameter(verts):
    """Maximum vertex-vertex distance."""
    d2 = np.sum((verts[:, None, :] - verts[None, :, :]) ** 2, axis=-1)
    return float(np.sqrt(d2.max()))


def second_moment_about(verts, point):
    """Closed-form integral of |x - point|^2 over a simple polygon."""
    x = verts[:, 0] - point[0]
    y = verts[:, 1] - point[1]
    xn = np.roll(x, -1)
    yn = np.roll(y, -1)
    cross = x * yn - xn * y
    ixx = np.sum((x * x + x * xn + xn * xn) * cross) / 12.0
    iyy = np.sum((y * y + y * yn + yn * yn) * cross) / 12.0
    return float(ixx + iyy)


def edge_vectors(verts):
    return np.roll(verts, -1, axis=0) - verts


def is_convex(verts, tol=1e-12):
    """True if every corner turns left (within tol relative to scale)."""
    e = edge_vectors(verts)
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    scale = np.max(np.abs(e)) ** 2
    return bool(np.all(cross >= -tol * scale))


def is_simple(verts, tol=1e-14):
    """Brute-force check that no two non-adjacent edges intersect."""
    n = len(verts)
    e = edge_vectors(verts)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            p, r = verts[i], e[i]
            q, s = verts[j], e[j]
            denom = r[0] * s[1] - r[1] * s[0]
            if abs(denom) < tol:
                continue
            t = ((q - p)[0] * s[1] - (q - p)[1] * s[0]) / denom
            u = ((q - p)[0] * r[1] - (q - p)[1] * r[0]) / denom
            if tol < t < 1 - tol and tol < u < 1 - tol:
                return False
    return True


def clip_halfplane(verts, normal, offset, tol=1e-14):
    """Sutherland-Hodgman clip keeping the side normal . x <= offset.

    Returns a new vertex loop (possibly empty). Consecutive duplicates
    produced by grazing cuts are removed.
    """
    n = len(verts)
    out = []
    dist = verts @ normal - offset
    for i in range(n):
        j = (i + 1) % n
        di, dj = dist[i], dist[j]
        if di <= tol:
            out.append(verts[i])
        if (di < -tol and dj > tol) or (di > tol and dj < -tol):
            t = di / (di - dj)
            out.append(verts[i] + t * (verts[j] - verts[i]))
    if not out:
        return np.zeros((0, 2))
    out = np.asarray(out)
    keep = [0]
    for i in range(1, len(out)):
        if np.max(np.abs(out[i] - out[keep[-1]])) > tol:
            keep.append(i)
    if len(keep) > 1 and np.max(np.abs(out[keep[-1]] - out[keep[0]])) <= tol:
        keep.pop()
    return out[keep]


def clip_to_box(verts, xmin=0.0, xmax=1.0, ymin=0.0, ymax=1.0):
    """Clip a polygon against an axis-aligned box."""
    walls = [
        (np.array([-1.0, 0.0]), -xmin),
        (np.array([1.0, 0.0]), xmax),
        (np.array([0.0, -1.0]), -ymin),
        (np.array([0.0, 1.0]), ymax),
    ]
    out = verts
    for normal, offset in walls:
        out = clip_halfplane(out, normal, offset)
        if len(out) == 0:
            return out
    return out


def kernel_polygon(verts):
    """Kernel of a simple polygon: points seeing every boundary point.

    Computed by clipping a bounding box against the half-plane left of
    each (counter-clockwise) edge. Empty result means the polygon is not
    star-shaped.
    """
    lo = verts.min(axis=0) - 1.0
    hi = verts.max(axis=0) + 1.0
    kernel = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    e = edge_vectors(verts)
    for i in range(len(verts)):
        # left of edge i: outward normal is the tangent rotated by -90 deg
        normal = np.array([e[i, 1], -e[i, 0]])
        norm = np.hypot(normal[0], normal[1])
        if norm == 0.0:
            continue
        normal /= norm
        kernel = clip_halfplane(kernel, normal, normal @ verts[i])
        if len(kernel) < 3:
            return np.zeros((0, 2))
    return kernel


def chebyshev_center(verts):
    """Center and radius of the largest disk inscribed in a convex polygon."""
    e = edge_vectors(verts)
    normals = np.column_stack([e[:, 1], -e[:, 0]])
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    offsets = np.sum(normals * verts, axis=1)
    # maximize r subject to n_i . x + r <= c_i
    a_ub = np.column_stack([normals, np.ones(len(verts))])
    res = linprog(
        c=[0.0, 0.0, -1.0],
        A_ub=a_ub,
        b_ub=offsets,
        bounds=[(None, None), (None, None), (0, None)],
        method="highs",
    )
    if not res.success:
        raise ValueError("Chebyshev center LP failed: " + res.message)
    return res.x[:2].copy(), float(res.x[2])


def star_point(verts):
    """A point the polygon is star-shaped around, or None.

    Prefers the centroid when it lies in the kernel, otherwise uses the
    kernel's Chebyshev center.
    """
    c = centroid(verts)
    if is_convex(verts):
        return c
    kernel = kernel_polygon(verts)
    if len(kernel) < 3 or abs(signed_area(kernel)) < 1e-14 * diameter(verts) ** 2:
        return None
    e = edge_vectors(kernel)
    normals = np.column_stack([e[:, 1], -e[:, 0]])
    dist = np.sum(normals * (c[None, :] - kernel), axis=1)
    if np.all(dist <= 0.0):
        return c
    point, _ = chebyshev_center(kernel)
    return point
