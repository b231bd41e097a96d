"""Discretizations of the memory flow over one observation interval.

Two layers of fidelity:

* `zoh_oracle_step` -- the exact zero-order-hold update for a diagonal state
  matrix when the unobserved mutation times inside the interval are known.
  Each inter-mutation segment contributes its smoothed features through a
  convex weight (`segment_weights`), and the weights depend only on the
  mutation times, never on the features.
* `discrete_step` -- the practical per-snapshot update used by the layers:
  first-order approximation of the drive term (A^{-1}(e^{dA}-I) ~ d*I) with
  an adaptive per-node step size.

`mixed_estimate` assembles the practical drive from consecutive snapshots by
one of three mechanisms (plain diffusion, mixing features before diffusion,
or mixing diffused representations).
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .tgraph import (EventStream, LaplacianKind, adjacency_from_edges, edges_at,
                     laplacian)


@dataclass(frozen=True)
class MutationSchedule:
    """One observation interval (t_start, t_end] with known interior mutations.

    Segment i covers [s_i, s_{i+1}) where s_0 = t_start, s_{M+1} = t_end;
    `adjacencies[i]` and `features[i]` are the graph and the per-node scalar
    features in force on that segment (M+1 of each).
    """

    t_start: float
    t_end: float
    mutation_times: tuple
    adjacencies: tuple
    features: tuple

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("interval must have positive length")
        times = tuple(float(t) for t in self.mutation_times)
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("mutation times must be strictly increasing")
        if times and not (self.t_start < times[0] and times[-1] < self.t_end):
            raise ValueError("mutation times must lie strictly inside the interval")
        adjs = tuple(np.asarray(a, dtype=bool) for a in self.adjacencies)
        feats = tuple(np.asarray(x, dtype=float).reshape(-1) for x in self.features)
        if len(adjs) != len(times) + 1 or len(feats) != len(times) + 1:
            raise ValueError(f"{len(times)} mutations need {len(times) + 1} "
                             "segment graphs and feature vectors")
        v = adjs[0].shape[0]
        if any(a.shape != (v, v) for a in adjs) or any(x.size != v for x in feats):
            raise ValueError("segment graphs/features disagree on node count")
        object.__setattr__(self, "mutation_times", times)
        object.__setattr__(self, "adjacencies", adjs)
        object.__setattr__(self, "features", feats)

    @property
    def num_segments(self):
        return len(self.mutation_times) + 1

    @property
    def num_nodes(self):
        return self.adjacencies[0].shape[0]

    @property
    def boundaries(self):
        return (self.t_start, *self.mutation_times, self.t_end)

    @classmethod
    def from_stream(cls, stream: EventStream, t_start: float, t_end: float, features):
        """Collect the interval's interior mutations and segment graphs from a stream."""
        times = tuple(t for t in stream.mutation_times if t_start < t < t_end)
        adjs = tuple(adjacency_from_edges(edges_at(stream, s), stream.num_nodes)
                     for s in (t_start, *times))
        return cls(t_start, t_end, times, adjs, tuple(features))


def _check_diag(a_diag) -> np.ndarray:
    a = np.asarray(a_diag, dtype=float).reshape(-1)
    if not np.all(a < 0):
        raise ValueError("diagonal state entries must be strictly negative")
    return a


def segment_weights(sched: MutationSchedule, a_diag) -> np.ndarray:
    """Convex weights [num_segments x N] tying each segment's drive into the
    zero-order-hold update.

    Closed form per diagonal entry a < 0, with s the interval boundaries:

        w_i = e^{(t_end - s_{i+1}) a} * (e^{(s_{i+1} - s_i) a} - 1) / (e^{(t_end - t_start) a} - 1)

    which telescopes to sum 1 over the segments.  Computed with expm1 for
    stability; the (tiny) float residual of the sum is folded into the
    largest weight so the convexity contract holds exactly.  The weights
    depend only on the mutation times, never on features or graphs.
    """
    a = _check_diag(a_diag)
    bounds = np.asarray(sched.boundaries)
    den = np.expm1((sched.t_end - sched.t_start) * a)
    weights = np.empty((sched.num_segments, a.size))
    for i in range(sched.num_segments):
        weights[i] = (np.exp((sched.t_end - bounds[i + 1]) * a)
                      * np.expm1((bounds[i + 1] - bounds[i]) * a) / den)
    residual = 1.0 - weights.sum(axis=0)
    top = np.argmax(weights, axis=0)
    weights[top, np.arange(a.size)] += residual
    return weights


def zoh_oracle_step(u_prev: np.ndarray, sched: MutationSchedule, a_diag, b,
                    alpha: float, kind: LaplacianKind) -> np.ndarray:
    """Exact one-interval update given the interior mutation schedule.

        U_next = U_prev * e^{d a}  +  X_tilde * (e^{d a} - 1) / a,
        X_tilde = sum_i (I + alpha*L_i)^{-1} x_i  (outer)  (w_i * B)

    everything elementwise over the diagonal entries `a_diag`; d is the
    interval length and w_i are `segment_weights`.
    """
    a = _check_diag(a_diag)
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.size != a.size:
        raise ValueError("a_diag and b must have equal length")
    u_prev = np.asarray(u_prev, dtype=float)
    if u_prev.shape != (sched.num_nodes, a.size):
        raise ValueError(f"u_prev must have shape ({sched.num_nodes}, {a.size})")

    weights = segment_weights(sched, a)
    drive = np.zeros_like(u_prev)
    eye = np.eye(sched.num_nodes)
    for i in range(sched.num_segments):
        lap = laplacian(sched.adjacencies[i], kind)
        smoothed = cho_solve(cho_factor(eye + alpha * lap), sched.features[i])
        drive += np.outer(smoothed, weights[i] * b)
    length = sched.t_end - sched.t_start
    decay = np.exp(length * a)
    return u_prev * decay[None, :] + drive * (np.expm1(length * a) / a)[None, :]


def discrete_step(u_prev: np.ndarray, x_hat: np.ndarray, delta, a_diag, b, c):
    """Practical per-snapshot update and readout.

        u_next = u_prev * e^{delta a} + delta * (x_hat outer b)
        y      = contract(u_next, c)

    Shapes: scalar-channel x_hat [V] with state [V x N], or vectorized
    x_hat [V x D] with state [V x D x N] (the same a/b/c across channels).
    `delta` may be a scalar, per-node [V], or per-node-per-channel [V x D];
    it must be nonnegative.
    """
    a = _check_diag(a_diag)
    b = np.asarray(b, dtype=float).reshape(-1)
    c = np.asarray(c, dtype=float).reshape(-1)
    if not (a.size == b.size == c.size):
        raise ValueError("a_diag, b, c must share length")
    x_hat = np.asarray(x_hat, dtype=float)
    squeeze = x_hat.ndim == 1
    x = x_hat[:, None] if squeeze else x_hat
    v, d = x.shape

    u_prev = np.asarray(u_prev, dtype=float)
    expect = (v, a.size) if squeeze else (v, d, a.size)
    if u_prev.shape != expect:
        raise ValueError(f"u_prev must have shape {expect}")
    u = u_prev[:, None, :] if squeeze else u_prev

    delta = np.asarray(delta, dtype=float)
    if np.any(delta < 0):
        raise ValueError("delta must be nonnegative")
    if delta.ndim == 0:
        delta = np.full((v, d), float(delta))
    elif delta.shape == (v,):
        delta = np.broadcast_to(delta[:, None], (v, d))
    elif delta.shape != (v, d):
        raise ValueError("delta must be scalar, [V], or [V x D]")

    decay = np.exp(delta[:, :, None] * a[None, None, :])
    u_next = u * decay + (delta * x)[:, :, None] * b[None, None, :]
    y = u_next @ c
    if squeeze:
        return u_next[:, 0, :], y[:, 0]
    return u_next, y


class MixMechanism(Enum):
    ORDINARY = "ordinary"
    FEATURE_MIX = "feature_mix"
    REPR_MIX = "repr_mix"


def mixed_estimate(x_prev, x_cur, g_prev, g_cur, mechanism: MixMechanism, gnn, mix):
    """Drive estimate for one snapshot from (previous, current) observations.

    gnn(x, snapshot) diffuses features over a graph; mix(z_prev, z_cur)
    combines two same-shape arrays.  Mechanisms:

        ORDINARY     gnn(x_cur, g_cur)
        FEATURE_MIX  gnn(mix(x_prev, x_cur), g_cur)
        REPR_MIX     mix(gnn(x_prev, g_prev), gnn(x_cur, g_cur))

    At the start of a sequence there is no predecessor; passing x_prev=None
    (or g_prev=None) degrades any mechanism to ORDINARY.
    """
    mechanism = MixMechanism(mechanism)
    if x_prev is None or g_prev is None:
        mechanism = MixMechanism.ORDINARY
    if mechanism is MixMechanism.ORDINARY:
        return gnn(x_cur, g_cur)
    x_prev = np.asarray(x_prev, dtype=float)
    x_cur = np.asarray(x_cur, dtype=float)
    if x_prev.shape != x_cur.shape:
        raise ValueError("x_prev and x_cur must have equal shapes")
    if mechanism is MixMechanism.FEATURE_MIX:
        return gnn(mix(x_prev, x_cur), g_cur)
    return mix(gnn(x_prev, g_prev), gnn(x_cur, g_cur))
