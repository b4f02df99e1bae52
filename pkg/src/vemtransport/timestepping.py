"""Discontinuous Galerkin time stepping collocated at Gauss-Radau nodes.

Each time slab carries a polynomial of degree q in time represented by
its values at the mapped Radau nodes (the last node is the slab's right
endpoint). The slab systems couple the spatial operators only on the
block diagonal, and the factorization is reused across slabs whenever
the operators and the step size are constant.
"""

import numpy as np
import scipy.sparse as sp

from .linalg import Factorization, LinalgError
from .quadrature import gauss_interval, gauss_radau, map_radau


class TimeSteppingError(RuntimeError):
    pass


class TimePartition:
    """Strictly increasing time nodes 0 = t_0 < ... < t_N = T."""

    def __init__(self, nodes):
        self.nodes = np.asarray(nodes, dtype=float)
        if self.nodes.ndim != 1 or len(self.nodes) < 2:
            raise TimeSteppingError("need at least two time nodes")
        if np.any(np.diff(self.nodes) <= 0.0):
            raise TimeSteppingError("time nodes must be strictly increasing")

    @classmethod
    def uniform(cls, t_final, n_steps):
        return cls(np.linspace(0.0, t_final, n_steps + 1))

    @property
    def n_slabs(self):
        return len(self.nodes) - 1

    def slab(self, n):
        return float(self.nodes[n]), float(self.nodes[n + 1])

    @property
    def tau_max(self):
        return float(np.max(np.diff(self.nodes)))


def lagrange_basis_at(nodes, t):
    """Values of the Lagrange basis on `nodes` at scalar or array t."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.ones((len(t), len(nodes)))
    for a in range(len(nodes)):
        for b in range(len(nodes)):
            if a != b:
                out[:, a] *= (t - nodes[b]) / (nodes[a] - nodes[b])
    return out


def lagrange_derivative_matrix(nodes):
    """D[i, j] = derivative of basis i at node j."""
    n = len(nodes)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                D[i, j] = sum(1.0 / (nodes[i] - nodes[b]) for b in range(n) if b != i)
            else:
                num = 1.0
                for b in range(n):
                    if b != i and b != j:
                        num *= (nodes[j] - nodes[b]) / (nodes[i] - nodes[b])
                D[i, j] = num / (nodes[i] - nodes[j])
    return D


class SlabSolution:
    """Space-time coefficients of one slab at the mapped Radau nodes."""

    def __init__(self, t_start, t_end, node_times, values, carry_in):
        self.t_start = t_start
        self.t_end = t_end
        self.node_times = node_times
        self.values = values  # (q+1, n_dofs)
        self.carry_in = carry_in
        self._ref_nodes = (node_times - t_start) / (t_end - t_start)

    @property
    def trace_out(self):
        """Left limit at the slab's right endpoint (the last node column)."""
        return self.values[-1]

    def evaluate(self, t):
        """Value of the slab polynomial at time t (vector of dofs)."""
        xi = (np.asarray(t, dtype=float) - self.t_start) / (self.t_end - self.t_start)
        basis = lagrange_basis_at(self._ref_nodes, xi)
        out = basis @ self.values
        return out[0] if np.ndim(t) == 0 else out


def slab_matrix(M, a0_blocks, radau, tau):
    """Block matrix of one slab in the nodal (collocation) basis.

    Block (j, i) couples trial node i to test node j: the mass matrix
    weighted by the quadrature and the Lagrange derivative plus the jump
    term, and the spatial operator on the diagonal only.
    """
    q1 = len(radau.nodes)
    Dref = lagrange_derivative_matrix(radau.nodes)
    ell0 = lagrange_basis_at(radau.nodes, 0.0)[0]
    w = radau.weights
    blocks = [[None] * q1 for _ in range(q1)]
    for j in range(q1):
        for i in range(q1):
            coeff = w[j] * Dref[i, j] + ell0[i] * ell0[j]
            block = coeff * M
            if i == j:
                block = block + tau * w[j] * a0_blocks[j]
            blocks[j][i] = block.tocsr()
    return sp.bmat(blocks, format="csr")


def slab_rhs(M, radau, tau, rhs_blocks, carry):
    """Right-hand side of one slab: weighted loads plus the carried trace."""
    ell0 = lagrange_basis_at(radau.nodes, 0.0)[0]
    w = radau.weights
    Mc = M @ carry
    return np.concatenate(
        [tau * w[j] * rhs_blocks[j] + ell0[j] * Mc for j in range(len(radau.nodes))]
    )


def build_slab_system(M, a0_blocks, radau, tau, rhs_blocks, carry):
    """Full block system (matrix, rhs) for one slab."""
    return slab_matrix(M, a0_blocks, radau, tau), slab_rhs(M, radau, tau, rhs_blocks, carry)


def advance(system, partition, q, c0=None, on_slab=None):
    """March the transport system over all slabs; returns the slab list.

    The block matrix and its factorization are reused across slabs when
    the operators are stationary and the step size does not change.
    Solver failures are reported with the offending slab index.
    """
    radau = gauss_radau(q)
    M = system.mass()
    carry = system.initial_condition() if c0 is None else np.asarray(c0, dtype=float)
    n_dofs = len(carry)
    slabs = []
    cached = None  # (tau, factorization, matrix)
    for n in range(partition.n_slabs):
        t0, t1 = partition.slab(n)
        tau = t1 - t0
        node_times, _ = map_radau(radau, t0, t1)
        try:
            rhs_blocks = []
            for t in node_times:
                F, G = system.rhs(t)
                rhs_blocks.append(F + G)
            rhs = slab_rhs(M, radau, tau, rhs_blocks, carry)
            reuse = (
                system.stationary
                and cached is not None
                and abs(cached[0] - tau) < 1e-14 * max(1.0, tau)
            )
            if reuse:
                _, fact, matrix = cached
            else:
                if system.stationary:
                    a0_blocks = [system.advection_operator(0.0)] * len(node_times)
                else:
                    a0_blocks = [system.advection_operator(t) for t in node_times]
                matrix = slab_matrix(M, a0_blocks, radau, tau)
                fact = Factorization(matrix)
                if system.stationary:
                    cached = (tau, fact, matrix)
            x = fact.solve(rhs)
            res = np.linalg.norm(matrix @ x - rhs)
            scale = np.linalg.norm(rhs)
            if res > 1e-8 * max(1.0, scale):
                raise LinalgError(f"slab residual {res:.2e} too large")
        except LinalgError as exc:
            raise TimeSteppingError(f"solver failure on slab {n + 1}: {exc}") from exc
        values = x.reshape(len(node_times), n_dofs)
        slab = SlabSolution(t0, t1, node_times, values, carry)
        slabs.append(slab)
        carry = slab.trace_out
        if on_slab is not None:
            on_slab(n, slab)
    return slabs


class WeightedInterpolant:
    """Lagrange interpolant of the node values scaled by 1/xi.

    Interpolates xi_i^{-1} v(t_i) at the mapped Radau nodes; used by the
    temporal stability analysis and its acceptance checks.
    """

    def __init__(self, node_values, radau, t_start=0.0, tau=1.0):
        self.radau = radau
        self.t_start = t_start
        self.tau = tau
        self.scaled = np.asarray(node_values, dtype=float) / radau.nodes

    def __call__(self, t):
        xi = (np.asarray(t, dtype=float) - self.t_start) / self.tau
        return lagrange_basis_at(self.radau.nodes, xi) @ self.scaled


def l_tau(node_values, radau, t_start=0.0, tau=1.0):
    """Interpolant of tau (t - t_start)^{-1} v at the Radau nodes."""
    return WeightedInterpolant(node_values, radau, t_start, tau)


class SlabwiseProjection:
    """Degree-q polynomial per slab: L2-orthogonal residual against
    degree q-1 and exact match at each slab's right endpoint."""

    def __init__(self, callback, partition, q, quad_points=None):
        self.partition = partition
        self.q = q
        npts = quad_points if quad_points is not None else max(2 * q + 4, 8)
        self.coeffs = []  # Legendre coefficients on [-1, 1] per slab
        for n in range(partition.n_slabs):
            t0, t1 = partition.slab(n)
            tau = t1 - t0
            tq, wq = gauss_interval(t0, t1, npts)
            vals = np.asarray(callback(tq), dtype=float)
            x = 2.0 * (tq - t0) / tau - 1.0
            coef = np.zeros(q + 1)
            for i in range(q):
                Li = np.polynomial.legendre.legval(x, np.eye(q + 1)[i])
                coef[i] = (2 * i + 1) / tau * (wq @ (vals * Li))
            # last coefficient from the right-endpoint match (L_i(1) = 1)
            coef[q] = float(callback(np.array([t1]))[0]) - coef[:q].sum()
            self.coeffs.append(coef)

    def evaluate(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        edges = self.partition.nodes
        for n in range(self.partition.n_slabs):
            t0, t1 = edges[n], edges[n + 1]
            mask = (t > t0) & (t <= t1) if n > 0 else (t >= t0) & (t <= t1)
            if not np.any(mask):
                continue
            x = 2.0 * (t[mask] - t0) / (t1 - t0) - 1.0
            out[mask] = np.polynomial.legendre.legval(x, self.coeffs[n])
        return out


def pi_tau(callback, partition, q):
    """Slabwise projection of a time callback (see SlabwiseProjection)."""
    return SlabwiseProjection(callback, partition, q)
