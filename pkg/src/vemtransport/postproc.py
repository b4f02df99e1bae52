"""Error norms, the combined error indicator, rate tables, and
vertex-value monitoring.

Discrete functions are only known through their projections, so the
spatial norms compare the exact fields against the L2 projection (for
values) and the gradient of the H1-type projection (for derivatives) at
polygon quadrature points. Time integrals over a slab use a Gauss rule
with q+2 points, which avoids sampling only the collocation nodes.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .quadrature import gauss_interval


@dataclass
class ErrorReport:
    """Error measures for one space-time refinement level."""

    level: int
    h: float
    dt: float
    l2_final: float
    l2h1: float
    indicator: float
    h1_final: float

    def row(self):
        return [self.level, self.h, self.dt, self.l2_final, self.l2h1, self.indicator, self.h1_final]


class ErrorEvaluator:
    """Caches per-cell quadrature data for repeated norm evaluations."""

    def __init__(self, system):
        self.system = system
        self.cells = []
        for ci, elem in enumerate(system.space.elements):
            pts = elem.rule_data.points
            gx, gy = elem.basis.gradients(pts)
            self.cells.append(
                {
                    "dofs": system.space.cell_dofs[ci],
                    "w": elem.rule_data.weights,
                    "pts": pts,
                    "phi": elem._phi_data,
                    "gx": gx,
                    "gy": gy,
                    "pi0": elem.pi0_coef,
                    "pin": elem.pin_coef,
                }
            )

    def spatial_errors(self, coeffs, t, c_exact, grad_exact):
        """Squared L2 and H1-seminorm distances at one time."""
        l2 = 0.0
        h1 = 0.0
        for cell in self.cells:
            loc = coeffs[cell["dofs"]]
            vals = cell["phi"] @ (cell["pi0"] @ loc)
            ex = np.asarray(c_exact(t, cell["pts"]), dtype=float)
            l2 += float(cell["w"] @ (ex - vals) ** 2)
            pin = cell["pin"] @ loc
            gex = np.asarray(grad_exact(t, cell["pts"]), dtype=float)
            dx = gex[:, 0] - cell["gx"] @ pin
            dy = gex[:, 1] - cell["gy"] @ pin
            h1 += float(cell["w"] @ (dx**2 + dy**2))
        return l2, h1


def error_norms(slabs, system, c_exact, grad_exact, level=0):
    """Combined error report for a slab sequence against exact fields.

    The indicator squares the final-time L2 error and adds the
    time-integrated squared H1 norm (L2 part plus seminorm part).
    """
    ev = ErrorEvaluator(system)
    q1 = len(slabs[0].node_times)
    l2h1_sq = 0.0
    for slab in slabs:
        tq, wq = gauss_interval(slab.t_start, slab.t_end, q1 + 1)
        for t, w in zip(tq, wq):
            coeffs = slab.evaluate(t)
            l2, h1 = ev.spatial_errors(coeffs, t, c_exact, grad_exact)
            l2h1_sq += w * (l2 + h1)
    t_final = slabs[-1].t_end
    l2f, h1f = ev.spatial_errors(slabs[-1].trace_out, t_final, c_exact, grad_exact)
    dt = max(s.t_end - s.t_start for s in slabs)
    return ErrorReport(
        level=level,
        h=system.mesh.mesh_size,
        dt=dt,
        l2_final=np.sqrt(l2f),
        l2h1=np.sqrt(l2h1_sq),
        indicator=np.sqrt(l2f + l2h1_sq),
        h1_final=np.sqrt(h1f),
    )


def minmax_trace(slabs, n_vertex_dofs):
    """Vertex-value extrema at every Radau node of every slab.

    Returns a list of (time, min, max) rows; vertex dofs are the leading
    block of the global dof vector.
    """
    rows = []
    for slab in slabs:
        for t, column in zip(slab.node_times, slab.values):
            v = column[:n_vertex_dofs]
            rows.append((float(t), float(v.min()), float(v.max())))
    return rows


_ERROR_COLUMNS = ["l2_final", "l2h1", "err", "h1_final"]


def rate_table(reports):
    """Observed-rate table for a refinement sequence.

    Returns (text, csv_string). Rates compare consecutive levels through
    log(e_i / e_{i+1}) / log(h_i / h_{i+1}); a single level yields a
    table without rate columns.
    """
    if not reports:
        raise ValueError("need at least one report")
    with_rates = len(reports) >= 2
    header = ["level", "h", "dt"] + _ERROR_COLUMNS
    if with_rates:
        header += [f"rate_{c}" for c in _ERROR_COLUMNS]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    text_rows = ["  ".join(f"{h:>12s}" for h in header)]
    prev = None
    for rep in reports:
        row = rep.row()
        cells = [f"{row[0]}", f"{row[1]:.12e}", f"{row[2]:.12e}"]
        cells += [f"{v:.12e}" for v in row[3:]]
        if with_rates:
            if prev is None:
                cells += [""] * len(_ERROR_COLUMNS)
            else:
                ratio = np.log(prev.h / rep.h)
                for a, b in zip(
                    (prev.l2_final, prev.l2h1, prev.indicator, prev.h1_final),
                    (rep.l2_final, rep.l2h1, rep.indicator, rep.h1_final),
                ):
                    if a > 0 and b > 0 and ratio != 0:
                        cells.append(f"{np.log(a / b) / ratio:.3f}")
                    else:
                        cells.append("")
        writer.writerow(cells)
        text_rows.append("  ".join(f"{c:>12s}" for c in cells))
        prev = rep
    return "\n".join(text_rows), out.getvalue()


def observed_rate(reports, column="indicator"):
    """Least-squares slope of log(error) against log(h)."""
    hs = np.array([r.h for r in reports])
    es = np.array([getattr(r, column) for r in reports])
    if np.any(es <= 0):
        raise ValueError("errors must be positive for a rate fit")
    slope, _ = np.polyfit(np.log(hs), np.log(es), 1)
    return float(slope)


def minmax_csv(rows):
    """CSV dump of (time, min, max) rows."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["time", "min_vertex", "max_vertex"])
    for t, lo, hi in rows:
        writer.writerow([f"{t:.12e}", f"{lo:.12e}", f"{hi:.12e}"])
    return out.getvalue()
