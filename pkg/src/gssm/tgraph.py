"""Temporal-graph data model.

An undirected simple graph that evolves by timestamped edge insertions and
deletions (:class:`EventStream`), observed as a :class:`SnapshotSequence` of
(adjacency, features, timestamp) triples.  The module also builds normalized
graph Laplacians, computes temporal-continuity metrics over a sequence, and
serializes sequences to a line-oriented text format.

All types are immutable after construction and every operation is a pure
function, so shared read-only instances are safe to use from multiple threads.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Action(Enum):
    INSERT = "insert"
    DELETE = "delete"


class LaplacianKind(Enum):
    SYMMETRIC = "symmetric"
    RANDOM_WALK = "random_walk"


def _canonical_edge(u, v):
    if u == v:
        raise ValueError(f"self-loop ({u}, {v}) not allowed")
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class EventStream:
    """Edge-mutation process on a fixed node set over the horizon [0, T].

    Parameters
    ----------
    num_nodes : int
        Number of nodes; ids are 0..num_nodes-1.
    horizon : float
        End of the time axis T; every event time lies in [0, T].
    initial_edges : iterable of (u, v)
        Undirected edge set at time 0 (before any event).
    events : iterable of (u, v, t, Action)
        Mutations with strictly increasing times.  An INSERT requires the
        edge to be absent at that instant, a DELETE requires it present;
        construction replays the whole stream to enforce this.
    """

    num_nodes: int
    horizon: float
    initial_edges: frozenset
    events: tuple

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ValueError("num_nodes must be positive")
        if not np.isfinite(self.horizon) or self.horizon <= 0:
            raise ValueError("horizon must be a positive finite time")
        edges = frozenset(_canonical_edge(int(u), int(v)) for u, v in self.initial_edges)
        for u, v in edges:
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise ValueError(f"edge ({u}, {v}) references an unknown node id")
        events = []
        for u, v, t, action in self.events:
            events.append((*_canonical_edge(int(u), int(v)), float(t), Action(action)))
        object.__setattr__(self, "initial_edges", edges)
        object.__setattr__(self, "events", tuple(events))

        prev_t = -np.inf
        present = set(edges)
        for u, v, t, action in self.events:
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise ValueError(f"event ({u}, {v}) references an unknown node id")
            if not (0.0 <= t <= self.horizon):
                raise ValueError(f"event time {t} outside horizon [0, {self.horizon}]")
            if t <= prev_t:
                raise ValueError("event times must be strictly increasing")
            prev_t = t
            if action is Action.INSERT:
                if (u, v) in present:
                    raise ValueError(f"insert of edge ({u}, {v}) at t={t}: already present")
                present.add((u, v))
            else:
                if (u, v) not in present:
                    raise ValueError(f"delete of edge ({u}, {v}) at t={t}: not present")
                present.discard((u, v))

    @property
    def mutation_times(self):
        return tuple(t for _, _, t, _ in self.events)


def edges_at(stream: EventStream, t: float) -> frozenset:
    """Edge set after replaying every event with time <= t."""
    present = set(stream.initial_edges)
    for u, v, et, action in stream.events:
        if et > t:
            break
        if action is Action.INSERT:
            present.add((u, v))
        else:
            present.discard((u, v))
    return frozenset(present)


def adjacency_from_edges(edges, num_nodes: int) -> np.ndarray:
    adj = np.zeros((num_nodes, num_nodes), dtype=bool)
    for u, v in edges:
        adj[u, v] = adj[v, u] = True
    return adj


@dataclass(frozen=True)
class Snapshot:
    """One observation of the evolving graph: adjacency + node features."""

    adjacency: np.ndarray
    features: np.ndarray
    timestamp: float

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=bool)
        feats = np.array(self.features, dtype=float)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if adj.diagonal().any():
            raise ValueError("adjacency diagonal must be zero (no self-loops)")
        if feats.ndim != 2 or feats.shape[0] != adj.shape[0]:
            raise ValueError("features must be [num_nodes x d]")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features must be finite")
        adj.flags.writeable = False
        feats.flags.writeable = False
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "timestamp", float(self.timestamp))

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def edge_set(self) -> frozenset:
        iu, iv = np.nonzero(np.triu(self.adjacency, 1))
        return frozenset(zip(iu.tolist(), iv.tolist()))


@dataclass(frozen=True)
class SnapshotSequence:
    """L snapshots with strictly increasing timestamps and shared (V, d)."""

    snapshots: tuple

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        if not snaps:
            raise ValueError("sequence must contain at least one snapshot")
        v, d = snaps[0].num_nodes, snaps[0].num_features
        for s in snaps:
            if s.num_nodes != v or s.num_features != d:
                raise ValueError("all snapshots must share node count and feature width")
        ts = [s.timestamp for s in snaps]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("snapshot timestamps must be strictly increasing")
        object.__setattr__(self, "snapshots", snaps)

    def __len__(self):
        return len(self.snapshots)

    def __getitem__(self, i):
        return self.snapshots[i]

    def __iter__(self):
        return iter(self.snapshots)

    @property
    def num_nodes(self):
        return self.snapshots[0].num_nodes

    @property
    def num_features(self):
        return self.snapshots[0].num_features

    @property
    def timestamps(self):
        return np.array([s.timestamp for s in self.snapshots])

    @property
    def gaps(self):
        """Inter-observation gaps, length L-1."""
        return np.diff(self.timestamps)


def materialize_snapshots(stream: EventStream, observe_times, feature_fn) -> SnapshotSequence:
    """Observe `stream` at the given times.

    Snapshot l holds the edge set obtained by replaying every event with
    t <= observe_times[l] onto the initial edges, plus feature_fn(t) as the
    node-feature matrix.  The feature function must return a [V x d] array;
    the library never interpolates features between observations.
    """
    times = [float(t) for t in observe_times]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("observe_times must be strictly increasing")
    if times and not (0.0 <= times[0] and times[-1] <= stream.horizon):
        raise ValueError("observe_times must lie within [0, horizon]")

    snaps = []
    present = set(stream.initial_edges)
    ev_idx = 0
    d = None
    for t in times:
        while ev_idx < len(stream.events) and stream.events[ev_idx][2] <= t:
            u, v, _, action = stream.events[ev_idx]
            if action is Action.INSERT:
                present.add((u, v))
            else:
                present.discard((u, v))
            ev_idx += 1
        feats = np.asarray(feature_fn(t), dtype=float)
        if feats.ndim != 2 or feats.shape[0] != stream.num_nodes:
            raise ValueError(f"feature_fn({t}) returned shape {feats.shape}, "
                             f"expected [{stream.num_nodes} x d]")
        if d is None:
            d = feats.shape[1]
        elif feats.shape[1] != d:
            raise ValueError("feature_fn must return a consistent feature width")
        snaps.append(Snapshot(adjacency_from_edges(present, stream.num_nodes), feats, t))
    return SnapshotSequence(tuple(snaps))


def laplacian(snap, kind: LaplacianKind) -> np.ndarray:
    """Normalized graph Laplacian of a snapshot (or a raw adjacency matrix).

    Symmetric:   I - D^{-1/2} A D^{-1/2}
    RandomWalk:  I - D^{-1} A

    Rows and columns of isolated nodes are identically zero, so (I + a*L)
    acts as the identity on them -- no neighbors means no smoothing.
    """
    adj = snap.adjacency if isinstance(snap, Snapshot) else np.asarray(snap)
    adj = adj.astype(float)
    deg = adj.sum(axis=1)
    nz = deg > 0
    lap = np.zeros_like(adj)
    if kind is LaplacianKind.SYMMETRIC:
        dinv_sqrt = np.zeros_like(deg)
        dinv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
        lap = -dinv_sqrt[:, None] * adj * dinv_sqrt[None, :]
    elif kind is LaplacianKind.RANDOM_WALK:
        dinv = np.zeros_like(deg)
        dinv[nz] = 1.0 / deg[nz]
        lap = -dinv[:, None] * adj
    else:
        raise ValueError(f"unknown Laplacian kind: {kind!r}")
    lap[nz, nz] += 1.0
    return lap


def temporal_continuity(seq: SnapshotSequence):
    """(tc_structure, tc_feature) averaged over consecutive snapshot pairs.

    tc_structure: mean Jaccard similarity of consecutive edge sets; a pair of
    empty edge sets counts as 1 (identical emptiness).
    tc_feature: mean over pairs of the mean-over-nodes cosine similarity of
    feature rows; rows with zero norm contribute 0 to the node mean.
    """
    if len(seq) < 2:
        raise ValueError("temporal continuity needs at least two snapshots")
    jac = []
    cos = []
    for prev, cur in zip(seq.snapshots, seq.snapshots[1:]):
        e_prev, e_cur = prev.edge_set(), cur.edge_set()
        union = len(e_prev | e_cur)
        jac.append(1.0 if union == 0 else len(e_prev & e_cur) / union)
        dots = np.sum(prev.features * cur.features, axis=1)
        norms = np.linalg.norm(prev.features, axis=1) * np.linalg.norm(cur.features, axis=1)
        sims = np.where(norms > 0, dots / np.where(norms > 0, norms, 1.0), 0.0)
        cos.append(sims.mean())
    return float(np.mean(jac)), float(np.mean(cos))


# ---------------------------------------------------------------------------
# Serialization: line-oriented ASCII format.
#
#   GSSM v1 <N_V> <d> <L>
#   then, per snapshot:
#     T <timestamp>
#     E <num_edges>
#     <u> <v>          (num_edges lines, canonical u < v, sorted)
#     X
#     <d decimals>     (N_V lines)
# ---------------------------------------------------------------------------

_MAGIC = "GSSM v1"


def save_sequence(seq: SnapshotSequence, path) -> None:
    lines = [f"{_MAGIC} {seq.num_nodes} {seq.num_features} {len(seq)}"]
    for snap in seq:
        lines.append(f"T {snap.timestamp!r}")
        edges = sorted(snap.edge_set())
        lines.append(f"E {len(edges)}")
        lines.extend(f"{u} {v}" for u, v in edges)
        lines.append("X")
        lines.extend(" ".join(repr(x) for x in row) for row in snap.features.tolist())
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


class _LineReader:
    def __init__(self, path):
        with open(path, "r", encoding="ascii") as fh:
            self.lines = fh.read().splitlines()
        self.pos = 0
        self.path = path

    def next(self, what):
        if self.pos >= len(self.lines):
            raise ValueError(f"{self.path}: unexpected end of file while reading {what}")
        line = self.lines[self.pos]
        self.pos += 1
        return line


def load_sequence(path) -> SnapshotSequence:
    rd = _LineReader(path)
    header = rd.next("header").split()
    if len(header) != 5 or " ".join(header[:2]) != _MAGIC:
        raise ValueError(f"{path}: malformed header (expected '{_MAGIC} <V> <d> <L>')")
    try:
        num_nodes, d, length = (int(x) for x in header[2:])
    except ValueError:
        raise ValueError(f"{path}: non-integer sizes in header") from None
    if num_nodes < 1 or d < 0 or length < 1:
        raise ValueError(f"{path}: nonsensical sizes in header")

    snaps = []
    for snap_idx in range(length):
        t_line = rd.next("timestamp").split()
        if len(t_line) != 2 or t_line[0] != "T":
            raise ValueError(f"{path}: snapshot {snap_idx}: expected 'T <timestamp>'")
        timestamp = float(t_line[1])
        e_line = rd.next("edge count").split()
        if len(e_line) != 2 or e_line[0] != "E":
            raise ValueError(f"{path}: snapshot {snap_idx}: expected 'E <num_edges>'")
        edges = []
        for _ in range(int(e_line[1])):
            parts = rd.next("edge").split()
            if len(parts) != 2:
                raise ValueError(f"{path}: snapshot {snap_idx}: malformed edge line")
            edges.append((int(parts[0]), int(parts[1])))
        if rd.next("feature marker") != "X":
            raise ValueError(f"{path}: snapshot {snap_idx}: expected 'X' marker")
        rows = []
        for _ in range(num_nodes):
            row = rd.next("feature row").split()
            if len(row) != d:
                raise ValueError(f"{path}: snapshot {snap_idx}: feature row has "
                                 f"{len(row)} values, expected {d}")
            rows.append([float(x) for x in row])
        feats = np.array(rows, dtype=float).reshape(num_nodes, d)
        snaps.append(Snapshot(adjacency_from_edges(edges, num_nodes), feats, timestamp))
    try:
        return SnapshotSequence(tuple(snaps))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
