"""Graph-regularized HiPPO memory operator, continuous time.

The operator keeps, for every node, the coefficients of an online Legendre
expansion of that node's feature history, with neighboring nodes' histories
tied together by a graph-Laplacian smoothing term.  Concretely it integrates

    dU/dt = U A^T + (I + alpha * L(t))^{-1} X(t) B^T,        U(t0) = 0,

piecewise between edge mutations (L(t) is constant inside a segment), where
(A, B) are the HiPPO-LegS matrices.  `projection_oracle` provides the
independent brute-force check: project each node's history onto normalized
Legendre polynomials by quadrature, then apply the same smoothing at the
evaluation time.  At alpha = 0 (or on an edgeless graph) everything collapses
to independent per-node HiPPO, which is what several tests pin down.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigvalsh

from .tgraph import EventStream, LaplacianKind, Snapshot, adjacency_from_edges, edges_at, laplacian

# The unscaled flow is singular to start exactly at t=0 (the underlying
# measure normalizes by 1/t), so integration and the oracle both treat this
# as the earliest usable time origin.
TIME_ORIGIN = 1e-3


class HippoLegS(NamedTuple):
    order: int
    A: np.ndarray  # [N x N], lower triangular
    B: np.ndarray  # [N]


def hippo_legs_matrices(order: int) -> HippoLegS:
    """HiPPO-LegS transition matrices, 0-based indexing.

    A[n, k] = -sqrt((2n+1)(2k+1))  for n > k
              -(n+1)               for n == k
              0                    for n < k
    B[n]    = sqrt(2n+1)
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    n = np.arange(order)
    root = np.sqrt(2.0 * n + 1.0)
    a = -np.outer(root, root)
    a = np.tril(a, -1) + np.diag(-(n + 1.0))
    return HippoLegS(order, a, root.copy())


@dataclass(frozen=True)
class HippoConfig:
    """Approximation order, smoothing strength, and grid resolutions."""

    order: int
    alpha: float
    laplacian: LaplacianKind = LaplacianKind.SYMMETRIC
    ode_steps_per_unit: int = 200
    quadrature_points: int = 2001

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError("alpha must be finite and >= 0")
        if self.ode_steps_per_unit < 1 or self.quadrature_points < 2:
            raise ValueError("grid resolutions too small")


@dataclass
class CoefficientState:
    """Per-node expansion coefficients U [V x N] at a point in time."""

    u: np.ndarray
    time: float


def _smoother(stream: EventStream, t: float, alpha: float, kind: LaplacianKind):
    """Cholesky factor of (I + alpha*L) for the graph in force at time t."""
    adj = adjacency_from_edges(edges_at(stream, t), stream.num_nodes)
    mat = np.eye(stream.num_nodes) + alpha * laplacian(adj, kind)
    return cho_factor(mat)


def _feature_vector(feature_path, t: float, num_nodes: int) -> np.ndarray:
    x = np.asarray(feature_path(t), dtype=float).reshape(-1)
    if x.size != num_nodes:
        raise ValueError(f"feature_path({t}) has size {x.size}, expected {num_nodes}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"feature_path({t}) returned non-finite values")
    return x


def integrate_hippo(stream: EventStream, feature_path, cfg: HippoConfig, t_end: float,
                    u_start: np.ndarray | None = None,
                    t_start: float | None = None,
                    system=None) -> CoefficientState:
    """Integrate the smoothed-projection flow up to t_end with classical RK4.

    feature_path maps a time to the [V] vector of scalar node features
    (multi-channel callers loop over channels; the channels are independent).
    Integration is split exactly at every mutation time, so no RK4 step ever
    straddles a Laplacian discontinuity.  Within a segment the feature path
    is sampled with the right endpoint clamped just inside the segment, which
    keeps step-function feature paths (keyed by segment) from leaking their
    next value into the k4 stage.

    u_start/t_start default to a zero state at TIME_ORIGIN; passing both lets
    discretization tests resume the flow mid-interval.  `system` optionally
    replaces the default memory pair (the HiPPO-LegS matrices of cfg.order)
    with any (state matrix [N x N], drive vector [N]) sharing the same flow
    shape -- e.g. the diagonal pair the discretization oracle updates.
    """
    if t_start is None:
        t_start = TIME_ORIGIN
    if not (0.0 < t_start < t_end <= stream.horizon):
        raise ValueError("need 0 < t_start < t_end <= horizon")
    n = cfg.order
    if system is None:
        _, a_mat, b_vec = hippo_legs_matrices(n)
    else:
        a_mat = np.asarray(system[0], dtype=float)
        b_vec = np.asarray(system[1], dtype=float).reshape(-1)
        if a_mat.shape != (n, n) or b_vec.size != n:
            raise ValueError("system override must match cfg.order")
    a_t = a_mat.T
    u = np.zeros((stream.num_nodes, n)) if u_start is None else np.array(u_start, dtype=float)
    if u.shape != (stream.num_nodes, n):
        raise ValueError(f"u_start must have shape ({stream.num_nodes}, {n})")

    cuts = [t_start]
    cuts += [t for t in stream.mutation_times if t_start < t < t_end]
    cuts.append(t_end)

    for seg_a, seg_b in zip(cuts, cuts[1:]):
        chol = _smoother(stream, seg_a, cfg.alpha, cfg.laplacian)
        right_lim = np.nextafter(seg_b, seg_a)

        def rhs(t, state):
            x = _feature_vector(feature_path, min(t, right_lim), stream.num_nodes)
            return state @ a_t + np.outer(cho_solve(chol, x), b_vec)

        nst = max(1, math.ceil((seg_b - seg_a) * cfg.ode_steps_per_unit))
        h = (seg_b - seg_a) / nst
        t = seg_a
        for _ in range(nst):
            k1 = rhs(t, u)
            k2 = rhs(t + 0.5 * h, u + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, u + 0.5 * h * k2)
            k4 = rhs(t + h, u + h * k3)
            u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
    return CoefficientState(u, t_end)


def _normalized_legendre(x: np.ndarray, order: int) -> np.ndarray:
    """Rows P~_0..P~_{order-1} evaluated at x in [-1, 1].

    Three-term recurrence (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}, then
    scaled by sqrt(2n+1) so the family is orthonormal under the uniform
    probability measure on the interval.
    """
    p = np.empty((order, x.size))
    p[0] = 1.0
    if order > 1:
        p[1] = x
    for k in range(1, order - 1):
        p[k + 1] = ((2 * k + 1) * x * p[k] - k * p[k - 1]) / (k + 1)
    return p * np.sqrt(2.0 * np.arange(order) + 1.0)[:, None]


def projection_oracle(stream: EventStream, feature_path, cfg: HippoConfig,
                      t: float) -> CoefficientState:
    """Brute-force reference for the projection coefficients at time t.

    Computes Q[v, n] = (1/t) * integral_0^t x_v(s) P~_n(2s/t - 1) ds by
    composite-trapezoid quadrature on cfg.quadrature_points nodes, then
    returns (I + alpha*L(t))^{-1} Q.  Deliberately shares no code with the
    RK4 integrator beyond the Laplacian itself.
    """
    if t <= 0:
        raise ValueError("oracle evaluation time must be positive")
    npts = cfg.quadrature_points
    s = np.linspace(0.0, t, npts)
    x = np.empty((npts, stream.num_nodes))
    for i, si in enumerate(s):
        x[i] = _feature_vector(feature_path, si, stream.num_nodes)
    basis = _normalized_legendre(2.0 * s / t - 1.0, cfg.order)
    w = np.full(npts, t / (npts - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    q = (x * w[:, None]).T @ basis.T / t
    chol = _smoother(stream, t, cfg.alpha, cfg.laplacian)
    return CoefficientState(cho_solve(chol, q), t)


def consensus_profile(snap, kind: LaplacianKind):
    """Null-space profiles of the Laplacian, one unit vector per component.

    In the infinite-smoothing limit the regularizer forces node values onto
    the Laplacian's null space: proportional to sqrt(degree) within each
    connected component for the Symmetric kind, constant within each
    component for RandomWalk.  (An isolated node is its own component and
    keeps its own value either way.)  The predicted profiles are verified
    against the matrix -- each must be annihilated by L, and the null-space
    dimension must equal the component count -- before being returned.
    """
    adj = snap.adjacency if isinstance(snap, Snapshot) else np.asarray(snap)
    adj = adj.astype(bool)
    num_nodes = adj.shape[0]
    deg = adj.sum(axis=1).astype(float)

    seen = np.zeros(num_nodes, dtype=bool)
    components = []
    for start in range(num_nodes):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            v = stack.pop()
            comp.append(v)
            for u in np.nonzero(adj[v])[0]:
                if not seen[u]:
                    seen[u] = True
                    stack.append(int(u))
        components.append(sorted(comp))

    lap = laplacian(adj, kind)
    profiles = []
    for comp in components:
        z = np.zeros(num_nodes)
        if len(comp) == 1:
            z[comp[0]] = 1.0
        elif kind is LaplacianKind.SYMMETRIC:
            z[comp] = np.sqrt(deg[comp])
        else:
            z[comp] = 1.0
        z /= np.linalg.norm(z)
        if np.linalg.norm(lap @ z) > 1e-10 * max(1.0, np.linalg.norm(lap)):
            raise RuntimeError("predicted consensus profile is not in the null space")
        profiles.append(z)

    # Null dimension of the symmetric Laplacian equals the component count for
    # both kinds (the random-walk matrix is similar to the symmetric one on
    # the support of the degree vector).
    sym_eigs = eigvalsh(laplacian(adj, LaplacianKind.SYMMETRIC))
    if int(np.sum(np.abs(sym_eigs) < 1e-8)) != len(components):
        raise RuntimeError("null-space dimension does not match component count")
    return profiles
