"""Graph state-space layers.

Building blocks, bottom up:

* `gnn_diffuse` -- one aggregate-then-combine round over a snapshot; the
  first-order approximation of the Laplacian smoother used by the layers.
* `mix_conv1d` / `mix_interp` -- combine two consecutive representations
  (width-2 convolution, or a learned gated interpolation).
* `s4_forward` / `s5_forward` / `s6_forward` -- layer forwards over a
  snapshot sequence with per-channel (SISO) or shared (MIMO) states and,
  for the selective variant, input-dependent state parameters.
* `block_forward` -- residual block composition around a layer; the mixing
  mechanism is by default confined to the first block.
* `init_a`, `delta_bias_init`, `align_memory`, checkpoint save/load.

All recurrences run through the scan module, selectable between the
sequential and parallel backends.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

from .discretize import MixMechanism, mixed_estimate
from .scan import RecurrenceInputs, scan_parallel, scan_sequential
from .tgraph import Snapshot, SnapshotSequence


def softplus(x):
    return np.logaddexp(0.0, x)


def relu(x):
    return np.maximum(x, 0.0)


# ---------------------------------------------------------------------------
# GNN diffusion
# ---------------------------------------------------------------------------

class GnnFlavor(Enum):
    GCN_LIKE = "gcn_like"
    SAGE_MEAN_LIKE = "sage_mean_like"


@dataclass(frozen=True)
class GnnParams:
    """Aggregate-then-combine parameters.

    self_mix is the balancing weight between a node's own features (1-self_mix)
    and its neighborhood aggregate (self_mix); the smoothing strength constant
    is considered absorbed into `weight`.
    """

    weight: np.ndarray
    bias: np.ndarray
    flavor: GnnFlavor = GnnFlavor.GCN_LIKE
    self_mix: float = 0.5

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=float)
        b = np.asarray(self.bias, dtype=float).reshape(-1)
        if w.ndim != 2 or b.size != w.shape[1]:
            raise ValueError("weight must be [D_in x D_out] with matching bias")
        if not (0.0 <= self.self_mix <= 1.0):
            raise ValueError("self_mix must lie in [0, 1]")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "flavor", GnnFlavor(self.flavor))


def gnn_diffuse(x: np.ndarray, snap: Snapshot, p: GnnParams) -> np.ndarray:
    """One diffusion round followed by an affine transform.

    GcnLike aggregates neighbors with symmetric 1/sqrt(d_u d_v) weights,
    SageMeanLike with the plain neighborhood mean.  Nodes without neighbors
    skip aggregation entirely (pure self term).
    """
    x = np.asarray(x, dtype=float)
    adj = snap.adjacency.astype(float)
    if x.ndim != 2 or x.shape != (adj.shape[0], p.weight.shape[0]):
        raise ValueError(f"x must be [{adj.shape[0]} x {p.weight.shape[0]}]")
    deg = adj.sum(axis=1)
    nz = deg > 0
    if p.flavor is GnnFlavor.GCN_LIKE:
        dis = np.zeros_like(deg)
        dis[nz] = 1.0 / np.sqrt(deg[nz])
        agg = dis[:, None] * (adj @ (dis[:, None] * x))
    else:
        agg = np.zeros_like(x)
        agg[nz] = (adj @ x)[nz] / deg[nz, None]
    h = np.where(nz[:, None], (1.0 - p.self_mix) * x + p.self_mix * agg, x)
    return h @ p.weight + p.bias


# ---------------------------------------------------------------------------
# Mixing of consecutive representations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvMixParams:
    """Width-2 temporal convolution kernel [2 x D], shared across nodes."""

    kernel: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kernel, dtype=float)
        if k.ndim != 2 or k.shape[0] != 2:
            raise ValueError("kernel must be [2 x D]")
        object.__setattr__(self, "kernel", k)


@dataclass(frozen=True)
class InterpMixParams:
    """Gated interpolation: a blend gate picks between the two inputs and a
    nonnegative scale modulates the result; both are affine in [z1 || z2]."""

    w_scale: np.ndarray
    b_scale: np.ndarray
    w_blend: np.ndarray
    b_blend: np.ndarray

    def __post_init__(self):
        ws = np.asarray(self.w_scale, dtype=float)
        wb = np.asarray(self.w_blend, dtype=float)
        bs = np.asarray(self.b_scale, dtype=float).reshape(-1)
        bb = np.asarray(self.b_blend, dtype=float).reshape(-1)
        d = ws.shape[1] if ws.ndim == 2 else 0
        if ws.shape != (2 * d, d) or wb.shape != (2 * d, d) or bs.size != d or bb.size != d:
            raise ValueError("interp params must be W [2D x D] with bias [D]")
        object.__setattr__(self, "w_scale", ws)
        object.__setattr__(self, "b_scale", bs)
        object.__setattr__(self, "w_blend", wb)
        object.__setattr__(self, "b_blend", bb)


def mix_conv1d(z_prev: np.ndarray, z_cur: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    kernel = np.asarray(kernel, dtype=float)
    if z_prev.shape != z_cur.shape or kernel.shape != (2, z_prev.shape[1]):
        raise ValueError("kernel/operand shape mismatch")
    return kernel[0] * z_prev + kernel[1] * z_cur


def mix_interp(z1: np.ndarray, z2: np.ndarray, p: InterpMixParams) -> np.ndarray:
    if z1.shape != z2.shape or z1.shape[1] != p.b_scale.size:
        raise ValueError("operand shape mismatch")
    cc = np.concatenate([z1, z2], axis=1)
    scale = softplus(cc @ p.w_scale + p.b_scale)
    blend = expit(cc @ p.w_blend + p.b_blend)
    return scale * (blend * z1 + (1.0 - blend) * z2)


def apply_mix(z1: np.ndarray, z2: np.ndarray, p) -> np.ndarray:
    if isinstance(p, ConvMixParams):
        return mix_conv1d(z1, z2, p.kernel)
    if isinstance(p, InterpMixParams):
        return mix_interp(z1, z2, p)
    raise TypeError(f"unknown mix parameter type {type(p).__name__}")


# ---------------------------------------------------------------------------
# SSM layers
# ---------------------------------------------------------------------------

class SsmVariant(Enum):
    S4 = "s4"
    S5 = "s5"
    S6 = "s6"


@dataclass(frozen=True)
class SsmLayerParams:
    """Per-layer parameters; shapes depend on the variant.

    S4:  a [D x N], b [D x N], c [D x N]; per-node scalar step size from an
         affine map (delta_weight [D], scalar delta_bias).
    S5:  a [N], b [D x N], c [N x D]; step size as in S4; one shared state
         per node.
    S6:  a [D x N]; b, c and the [V x D] step size are produced per snapshot
         by the selective GNNs (gnn_b, gnn_c -> N outputs; gnn_delta -> D
         outputs plus delta_bias [D]).
    """

    variant: SsmVariant
    a: np.ndarray
    gnn: GnnParams
    b: np.ndarray = None
    c: np.ndarray = None
    delta_weight: np.ndarray = None
    delta_bias: object = None
    mix: object = None
    mix_mechanism: MixMechanism = MixMechanism.ORDINARY
    gnn_delta: GnnParams = None
    gnn_b: GnnParams = None
    gnn_c: GnnParams = None

    def __post_init__(self):
        object.__setattr__(self, "variant", SsmVariant(self.variant))
        object.__setattr__(self, "mix_mechanism", MixMechanism(self.mix_mechanism))
        a = np.asarray(self.a, dtype=float)
        if not np.all(a < 0):
            raise ValueError("state matrix entries must be strictly negative")
        object.__setattr__(self, "a", a)
        d = self.gnn.weight.shape[1]
        if self.variant is SsmVariant.S5:
            if a.ndim != 1:
                raise ValueError("S5 uses a shared diagonal state vector [N]")
            n = a.size
            shapes = {"b": (d, n), "c": (n, d)}
        else:
            if a.ndim != 2 or a.shape[0] != d:
                raise ValueError("S4/S6 use per-channel diagonals [D x N]")
            n = a.shape[1]
            shapes = {"b": (d, n), "c": (d, n)} if self.variant is SsmVariant.S4 else {}
        for name, want in shapes.items():
            got = np.asarray(getattr(self, name), dtype=float)
            if got.shape != want:
                raise ValueError(f"{name} must have shape {want}, got {got.shape}")
            object.__setattr__(self, name, got)
        if self.variant is SsmVariant.S6:
            for name in ("gnn_delta", "gnn_b", "gnn_c"):
                g = getattr(self, name)
                if not isinstance(g, GnnParams):
                    raise ValueError(f"S6 requires {name}")
            if self.gnn_delta.weight.shape[1] != d:
                raise ValueError("gnn_delta must produce D outputs")
            if self.gnn_b.weight.shape[1] != n or self.gnn_c.weight.shape[1] != n:
                raise ValueError("gnn_b / gnn_c must produce N outputs")
            bias = np.asarray(self.delta_bias, dtype=float).reshape(-1)
            if bias.size != d:
                raise ValueError("S6 delta_bias must be [D]")
            object.__setattr__(self, "delta_bias", bias)
        else:
            w = np.asarray(self.delta_weight, dtype=float).reshape(-1)
            if w.size != d:
                raise ValueError("delta_weight must be [D]")
            object.__setattr__(self, "delta_weight", w)
            object.__setattr__(self, "delta_bias", float(self.delta_bias))

    @property
    def state_size(self):
        return self.a.shape[-1]


def _check_hidden(seq: SnapshotSequence, hidden_in: np.ndarray, p: SsmLayerParams):
    hidden_in = np.asarray(hidden_in, dtype=float)
    want = (seq.num_nodes, len(seq), p.gnn.weight.shape[0])
    if hidden_in.shape != want:
        raise ValueError(f"hidden_in must be [V x L x D] = {want}, got {hidden_in.shape}")
    return hidden_in


def _drive_estimates(seq, hidden_in, p, mechanism):
    """Mixed-and-diffused layer inputs H_l, one [V x D] array per step."""
    def gnn(x, g):
        return gnn_diffuse(x, g, p.gnn)

    def mix(z1, z2):
        return apply_mix(z1, z2, p.mix)

    out = []
    for l in range(len(seq)):
        x_prev = hidden_in[:, l - 1] if l > 0 else None
        g_prev = seq[l - 1] if l > 0 else None
        out.append(mixed_estimate(x_prev, hidden_in[:, l], g_prev, seq[l],
                                  mechanism, gnn, mix))
    return out


def _run_scan(decays, drives, u0, backend, chunk, threads):
    inp = RecurrenceInputs(np.stack(decays), np.stack(drives), u0)
    if backend == "sequential":
        return scan_sequential(inp)
    if backend == "parallel":
        return scan_parallel(inp, chunk=chunk, threads=threads)
    raise ValueError(f"unknown backend {backend!r}")


def s4_forward(seq: SnapshotSequence, hidden_in: np.ndarray, p: SsmLayerParams,
               mechanism: MixMechanism | None = None, backend: str = "parallel",
               chunk: int | None = None, threads: int = 1) -> np.ndarray:
    """SISO layer: one length-N state per (node, channel)."""
    if p.variant is not SsmVariant.S4:
        raise ValueError("s4_forward needs S4 params")
    hidden_in = _check_hidden(seq, hidden_in, p)
    v, _, d = hidden_in.shape
    drives_h = _drive_estimates(seq, hidden_in, p,
                                p.mix_mechanism if mechanism is None else mechanism)
    decays, drives = [], []
    for h in drives_h:
        delta = softplus(h @ p.delta_weight + p.delta_bias)           # [V]
        decays.append(np.exp(delta[:, None, None] * p.a[None]))       # [V,D,N]
        drives.append((delta[:, None, None] * p.b[None]) * h[:, :, None])
    states = _run_scan(decays, drives, np.zeros((v, d, p.state_size)),
                       backend, chunk, threads)
    return np.einsum("lvdn,dn->vld", states, p.c)


def s5_forward(seq: SnapshotSequence, hidden_in: np.ndarray, p: SsmLayerParams,
               mechanism: MixMechanism | None = None, backend: str = "parallel",
               chunk: int | None = None, threads: int = 1) -> np.ndarray:
    """MIMO layer: a single length-N state per node, shared across channels."""
    if p.variant is not SsmVariant.S5:
        raise ValueError("s5_forward needs S5 params")
    hidden_in = _check_hidden(seq, hidden_in, p)
    v = hidden_in.shape[0]
    drives_h = _drive_estimates(seq, hidden_in, p,
                                p.mix_mechanism if mechanism is None else mechanism)
    decays, drives = [], []
    for h in drives_h:
        delta = softplus(h @ p.delta_weight + p.delta_bias)           # [V]
        decays.append(np.exp(delta[:, None] * p.a[None]))             # [V,N]
        drives.append(delta[:, None] * (h @ p.b))                     # [V,N]
    states = _run_scan(decays, drives, np.zeros((v, p.state_size)),
                       backend, chunk, threads)
    return np.einsum("lvn,nd->vld", states, p.c)


def s6_forward(seq: SnapshotSequence, hidden_in: np.ndarray, p: SsmLayerParams,
               mechanism: MixMechanism | None = None, backend: str = "parallel",
               chunk: int | None = None, threads: int = 1) -> np.ndarray:
    """Selective SISO layer: step size, drive and readout all depend on the
    layer input at each snapshot through small GNNs."""
    if p.variant is not SsmVariant.S6:
        raise ValueError("s6_forward needs S6 params")
    hidden_in = _check_hidden(seq, hidden_in, p)
    v, _, d = hidden_in.shape
    drives_h = _drive_estimates(seq, hidden_in, p,
                                p.mix_mechanism if mechanism is None else mechanism)
    decays, drives, readouts = [], [], []
    for l, h in enumerate(drives_h):
        x_l = hidden_in[:, l]
        delta = softplus(gnn_diffuse(x_l, seq[l], p.gnn_delta) + p.delta_bias)  # [V,D]
        b_sel = gnn_diffuse(x_l, seq[l], p.gnn_b)                               # [V,N]
        readouts.append(gnn_diffuse(x_l, seq[l], p.gnn_c))                      # [V,N]
        decays.append(np.exp(delta[:, :, None] * p.a[None]))                    # [V,D,N]
        drives.append((delta[:, :, None] * b_sel[:, None, :]) * h[:, :, None])
    states = _run_scan(decays, drives, np.zeros((v, d, p.state_size)),
                       backend, chunk, threads)
    return np.einsum("lvdn,lvn->vld", states, np.stack(readouts))


_FORWARDS = {SsmVariant.S4: s4_forward, SsmVariant.S5: s5_forward,
             SsmVariant.S6: s6_forward}


def layer_norm(x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Non-learnable normalization over the last axis."""
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps)


@dataclass(frozen=True)
class BlockParams:
    """One residual block: activation(layer(H)) + residual(H).

    res_weight=None means an identity residual; otherwise an affine map.
    """

    layer: SsmLayerParams
    res_weight: np.ndarray = None
    res_bias: np.ndarray = None

    def __post_init__(self):
        if self.res_weight is not None:
            w = np.asarray(self.res_weight, dtype=float)
            d = self.layer.gnn.weight.shape[1]
            if w.shape != (d, d):
                raise ValueError(f"res_weight must be [{d} x {d}]")
            object.__setattr__(self, "res_weight", w)
        if self.res_bias is not None:
            object.__setattr__(self, "res_bias",
                               np.asarray(self.res_bias, dtype=float).reshape(-1))


def block_forward(hidden_in: np.ndarray, seq: SnapshotSequence, blocks,
                  activation=relu, backend: str = "parallel",
                  chunk: int | None = None, threads: int = 1,
                  first_block_mixing_only: bool = True) -> np.ndarray:
    """Residual composition of K blocks over the sequence.

    By default any FeatureMix/ReprMix mechanism is honored only in the first
    block; later blocks run the plain estimate.  The selective variant's
    block appends a layer normalization as its final operation.
    """
    if not blocks:
        raise ValueError("need at least one block")
    hidden = np.asarray(hidden_in, dtype=float)
    for k, blk in enumerate(blocks):
        p = blk.layer
        mech = p.mix_mechanism
        if first_block_mixing_only and k > 0:
            mech = MixMechanism.ORDINARY
        y = _FORWARDS[p.variant](seq, hidden, p, mechanism=mech, backend=backend,
                                 chunk=chunk, threads=threads)
        res = hidden if blk.res_weight is None else hidden @ blk.res_weight
        if blk.res_bias is not None:
            res = res + blk.res_bias
        hidden = (y if activation is None else activation(y)) + res
        if p.variant is SsmVariant.S6:
            hidden = layer_norm(hidden)
    return hidden


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------

class InitStrategy(Enum):
    S4D_REAL = "s4d_real"
    S4D_CONST = "s4d_const"
    RANDOM = "random"


def glorot(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform Glorot sample; vectors are treated as a single fan-in row."""
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    fan_in = shape[0] if len(shape) > 1 else 1
    fan_out = shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_a(strategy: InitStrategy, shape, rng: np.random.Generator | None = None) -> np.ndarray:
    """Diagonal state initialization; last axis indexes the N state entries.

    S4D_REAL: -(n+1) for n = 0..N-1 (the real parts of the diagonal part of
    the HiPPO transition); S4D_CONST: all -1/2; RANDOM: -e^chi with chi drawn
    Glorot-uniform from `rng`.
    """
    strategy = InitStrategy(strategy)
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    if strategy is InitStrategy.S4D_REAL:
        return np.broadcast_to(-(np.arange(shape[-1]) + 1.0), shape).copy()
    if strategy is InitStrategy.S4D_CONST:
        return np.full(shape, -0.5)
    if rng is None:
        raise ValueError("RANDOM initialization needs an rng")
    return -np.exp(glorot(rng, shape))


def delta_bias_init(length: int) -> float:
    """Bias making the zero-weight step size softplus(bias) equal 1/length."""
    if length < 1:
        raise ValueError("length must be positive")
    return float(np.log(np.expm1(1.0 / length)))


# ---------------------------------------------------------------------------
# Varying node sets
# ---------------------------------------------------------------------------

class StateInitRule(Enum):
    ZERO = "zero"
    NEIGHBOR_MEAN = "neighbor_mean"


def align_memory(u_prev: np.ndarray, v_prev, v_new, rule: StateInitRule = StateInitRule.ZERO,
                 adjacency: np.ndarray | None = None) -> np.ndarray:
    """Carry per-node state across a node-set change.

    Rows of u_prev follow sorted(v_prev); the result's rows follow
    sorted(v_new).  Nodes present in both keep their state rows unchanged
    (bit-exact); departed rows are dropped; new nodes start at zero or, with
    NEIGHBOR_MEAN, at the mean state of their surviving neighbors in the new
    graph (`adjacency`, indexed like sorted(v_new)) -- isolated or
    all-new-neighbor nodes fall back to zero.
    """
    rule = StateInitRule(rule)
    prev_ids = sorted(set(int(v) for v in v_prev))
    new_ids = sorted(set(int(v) for v in v_new))
    u_prev = np.asarray(u_prev, dtype=float)
    if u_prev.shape[0] != len(prev_ids):
        raise ValueError("u_prev must have one row per previous node")
    if rule is StateInitRule.NEIGHBOR_MEAN:
        if adjacency is None:
            raise ValueError("NEIGHBOR_MEAN needs the new snapshot's adjacency")
        adjacency = np.asarray(adjacency, dtype=bool)
        if adjacency.shape != (len(new_ids), len(new_ids)):
            raise ValueError("adjacency must be indexed like sorted(v_new)")

    prev_row = {v: i for i, v in enumerate(prev_ids)}
    out = np.zeros((len(new_ids),) + u_prev.shape[1:], dtype=u_prev.dtype)
    survivors = [i for i, v in enumerate(new_ids) if v in prev_row]
    for i, v in enumerate(new_ids):
        if v in prev_row:
            out[i] = u_prev[prev_row[v]]
    if rule is StateInitRule.NEIGHBOR_MEAN:
        surviving = np.zeros(len(new_ids), dtype=bool)
        surviving[survivors] = True
        for i, v in enumerate(new_ids):
            if v in prev_row:
                continue
            nbrs = np.nonzero(adjacency[i] & surviving)[0]
            if nbrs.size:
                out[i] = np.mean([u_prev[prev_row[new_ids[j]]] for j in nbrs], axis=0)
    return out


# ---------------------------------------------------------------------------
# Checkpoints: named tensors in a line-oriented text format.
#
#   GSSMP v1 <count>
#   then, per tensor:
#     <name> <ndim> <dim...>
#     <row-major values on one line>
# ---------------------------------------------------------------------------

_CKPT_MAGIC = "GSSMP v1"


def save_checkpoint(named: dict, path) -> None:
    lines = [f"{_CKPT_MAGIC} {len(named)}"]
    for name, tensor in named.items():
        if not name or any(ch.isspace() for ch in name):
            raise ValueError(f"tensor name {name!r} must be non-empty without whitespace")
        arr = np.asarray(tensor, dtype=float)
        lines.append(" ".join([name, str(arr.ndim)] + [str(s) for s in arr.shape]))
        lines.append(" ".join(repr(x) for x in arr.reshape(-1).tolist()) or "")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> dict:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty checkpoint")
    header = lines[0].split()
    if len(header) != 3 or " ".join(header[:2]) != _CKPT_MAGIC:
        raise ValueError(f"{path}: malformed header (expected '{_CKPT_MAGIC} <count>')")
    count = int(header[2])
    named = {}
    pos = 1
    for _ in range(count):
        if pos + 1 >= len(lines) + 1:
            raise ValueError(f"{path}: truncated checkpoint")
        meta = lines[pos].split()
        if len(meta) < 2:
            raise ValueError(f"{path}: malformed tensor record at line {pos + 1}")
        name, ndim = meta[0], int(meta[1])
        if len(meta) != 2 + ndim:
            raise ValueError(f"{path}: tensor {name!r} declares {ndim} dims, "
                             f"lists {len(meta) - 2}")
        shape = tuple(int(s) for s in meta[2:])
        if pos + 1 >= len(lines):
            raise ValueError(f"{path}: missing values for tensor {name!r}")
        values = [float(x) for x in lines[pos + 1].split()]
        if len(values) != int(np.prod(shape, dtype=int)):
            raise ValueError(f"{path}: tensor {name!r} has {len(values)} values, "
                             f"expected {int(np.prod(shape, dtype=int))}")
        named[name] = np.array(values).reshape(shape)
        pos += 2
    return named
