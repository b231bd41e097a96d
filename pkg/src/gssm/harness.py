"""Synthetic temporal-graph node classification harness.

A planted-partition graph whose communities decay and rewire over time,
with node features drawn around slowly rotating class centroids: neither a
single snapshot's structure nor its features are enough to recover the
labels reliably, but integrating both over the sequence is.

The model backbone (layers module blocks) stays frozen at random parameters;
only a linear readout is trained, by full-batch gradient descent with
analytic gradients.  Micro/Macro-F1 on a stratified test split is the
reported metric.
"""

import csv
import hashlib
import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .discretize import MixMechanism
from .layers import (BlockParams, GnnFlavor, GnnParams, InitStrategy,
                     InterpMixParams, SsmLayerParams, SsmVariant,
                     block_forward, delta_bias_init, glorot, gnn_diffuse,
                     init_a, softplus)
from .tgraph import Snapshot, SnapshotSequence


def named_rng(seed: int, name: str) -> np.random.Generator:
    """Independent, reproducible stream for (seed, name).

    All harness randomness flows through this so that e.g. the model sampler
    and the split sampler can't perturb each other when one changes.
    """
    tag = int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "big")
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))


# ---------------------------------------------------------------------------
# Task generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TaskConfig:
    num_nodes: int = 200
    seq_len: int = 16
    num_features: int = 8
    num_classes: int = 4
    p_in: float = 0.22          # initial intra-community edge probability
    p_out: float = 0.02         # inter-community edge probability
    p_decay: float = 0.10       # per-step decay of (p_in - p_out)
    drift_rate: float = 0.15    # per-step probability that a pair is resampled
    noise: float = 1.0          # feature noise scale
    radius: float = 1.0         # centroid circle radius
    omega: float = np.pi / 16   # centroid rotation per step (radians)

    def __post_init__(self):
        if self.num_classes < 2 or self.num_nodes < 4 * self.num_classes:
            raise ValueError("infeasible config: need num_nodes >= 4 * num_classes "
                             "with at least two classes")
        if self.seq_len < 1 or self.num_features < 2:
            raise ValueError("infeasible config: need seq_len >= 1 and >= 2 features")
        for name in ("p_in", "p_out", "p_decay", "drift_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"infeasible config: {name} must lie in [0, 1]")
        if self.noise < 0 or self.radius < 0:
            raise ValueError("infeasible config: noise and radius must be >= 0")


class Split(NamedTuple):
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


@dataclass(frozen=True)
class SyntheticTask:
    sequence: SnapshotSequence
    labels: np.ndarray
    num_classes: int
    split: Split

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        v = self.sequence.num_nodes
        if labels.shape != (v,):
            raise ValueError("labels must assign one class per node")
        if labels.min() < 0 or labels.max() >= self.num_classes:
            raise ValueError("labels out of class range")
        object.__setattr__(self, "labels", labels)
        parts = [np.asarray(s, dtype=int) for s in self.split]
        object.__setattr__(self, "split", Split(*parts))
        joined = np.concatenate(parts)
        if len(set(joined.tolist())) != joined.size or joined.size != v:
            raise ValueError("splits must be disjoint and cover all nodes")
        if set(labels[parts[0]].tolist()) != set(range(self.num_classes)):
            raise ValueError("every class must appear in the train split")

    @property
    def num_nodes(self):
        return self.sequence.num_nodes


def split_nodes(labels: np.ndarray, rng: np.random.Generator,
                fractions=(0.6, 0.2, 0.2)) -> Split:
    """Stratified train/val/test split: per-class proportions within one node
    of exact stratification."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) <= 0:
        raise ValueError("fractions must be three positive values summing to 1")
    labels = np.asarray(labels, dtype=int)
    train, val, test = [], [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        n = idx.size
        a = int(round(fractions[0] * n))
        b = int(round((fractions[0] + fractions[1]) * n))
        train.extend(idx[:a].tolist())
        val.extend(idx[a:b].tolist())
        test.extend(idx[b:].tolist())
    return Split(np.sort(train), np.sort(val), np.sort(test))


def gen_synthetic(seed: int, cfg: TaskConfig = TaskConfig()) -> SyntheticTask:
    """Deterministic planted-partition temporal task.

    Communities: the intra-community edge probability starts at p_in and
    decays geometrically toward p_out; every step, each node pair is
    resampled with probability drift_rate at the current step's rate.
    Features: class centroids sit on a circle in the first two feature
    dimensions and rotate by omega per step; each node observes its centroid
    plus isotropic noise.  Snapshots are stamped 1..L.
    """
    v, length = cfg.num_nodes, cfg.seq_len
    c, d = cfg.num_classes, cfg.num_features
    rng = named_rng(seed, "task")

    labels = np.repeat(np.arange(c), v // c)
    labels = np.concatenate([labels, rng.integers(0, c, v - labels.size)])
    rng.shuffle(labels)

    same = labels[:, None] == labels[None, :]
    iu = np.triu_indices(v, 1)
    same_u = same[iu]

    snaps = []
    state = None
    for l in range(length):
        pin_l = cfg.p_out + (cfg.p_in - cfg.p_out) * (1.0 - cfg.p_decay) ** l
        pair_p = np.where(same_u, pin_l, cfg.p_out)
        if state is None:
            state = rng.random(pair_p.size) < pair_p
        else:
            redraw = rng.random(pair_p.size) < cfg.drift_rate
            state = np.where(redraw, rng.random(pair_p.size) < pair_p, state)
        adj = np.zeros((v, v), dtype=bool)
        adj[iu] = state
        adj |= adj.T

        ang = 2.0 * np.pi * labels / c + cfg.omega * l
        cent = np.zeros((v, d))
        cent[:, 0] = cfg.radius * np.cos(ang)
        cent[:, 1] = cfg.radius * np.sin(ang)
        feats = cent + cfg.noise * rng.normal(size=(v, d))
        snaps.append(Snapshot(adjacency=adj, features=feats, timestamp=float(l + 1)))

    seq = SnapshotSequence(tuple(snaps))
    split = split_nodes(labels, named_rng(seed, "split"))
    return SyntheticTask(sequence=seq, labels=labels, num_classes=c, split=split)


# ---------------------------------------------------------------------------
# Model sampling and feature extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelConfig:
    """Random frozen-backbone sampler settings.

    The two scale knobs keep the residual path from drowning the layer
    output at small widths; they are plumbing of this harness, not of the
    layers module.
    """

    num_blocks: int = 2
    state_size: int = 6
    variant: SsmVariant = SsmVariant.S4
    init: InitStrategy = InitStrategy.S4D_REAL
    mix_mechanism: MixMechanism = MixMechanism.REPR_MIX
    self_mix: float = 0.5
    c_scale: float = 2.0
    res_scale: float = 0.05
    delta_scale: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "variant", SsmVariant(self.variant))
        object.__setattr__(self, "init", InitStrategy(self.init))
        object.__setattr__(self, "mix_mechanism", MixMechanism(self.mix_mechanism))
        if self.num_blocks < 1 or self.state_size < 1:
            raise ValueError("need at least one block and one state entry")


def sample_model(rng: np.random.Generator, cfg: ModelConfig,
                 num_features: int, seq_len: int) -> list:
    """Draw a random stack of blocks; only the first block carries the
    configured mixing mechanism."""
    d, n = num_features, cfg.state_size
    blocks = []
    for k in range(cfg.num_blocks):
        extra = {}
        if cfg.variant is SsmVariant.S5:
            a = init_a(cfg.init, (n,), rng)
            extra["b"] = np.ones((d, n))
            extra["c"] = glorot(rng, (n, d)) * cfg.c_scale
        else:
            a = init_a(cfg.init, (d, n), rng)
            if cfg.variant is SsmVariant.S4:
                extra["b"] = np.ones((d, n))
                extra["c"] = glorot(rng, (d, n)) * cfg.c_scale
            else:
                extra["gnn_delta"] = GnnParams(glorot(rng, (d, d)), np.zeros(d),
                                               self_mix=cfg.self_mix)
                extra["gnn_b"] = GnnParams(glorot(rng, (d, n)), np.zeros(n),
                                           self_mix=cfg.self_mix)
                extra["gnn_c"] = GnnParams(glorot(rng, (d, n)), np.zeros(n),
                                           self_mix=cfg.self_mix)
        gnn = GnnParams(glorot(rng, (d, d)), np.zeros(d),
                        flavor=GnnFlavor.GCN_LIKE, self_mix=cfg.self_mix)
        mix = InterpMixParams(glorot(rng, (2 * d, d)), np.zeros(d),
                              glorot(rng, (2 * d, d)), np.zeros(d))
        if cfg.variant is SsmVariant.S6:
            delta = {"delta_bias": np.full(d, delta_bias_init(seq_len))}
        else:
            delta = {"delta_weight": glorot(rng, (d,)) * cfg.delta_scale,
                     "delta_bias": delta_bias_init(seq_len)}
        layer = SsmLayerParams(
            variant=cfg.variant, a=a, gnn=gnn, mix=mix,
            mix_mechanism=cfg.mix_mechanism if k == 0 else MixMechanism.ORDINARY,
            **extra, **delta)
        blocks.append(BlockParams(layer=layer,
                                  res_weight=glorot(rng, (d, d)) * cfg.res_scale,
                                  res_bias=np.zeros(d)))
    return blocks


def extract_features(task: SyntheticTask, blocks, backend: str = "parallel",
                     chunk: int | None = None, threads: int = 1) -> np.ndarray:
    """Last-step representations of the frozen block stack, [V x D]."""
    seq = task.sequence
    hidden = np.stack([s.features for s in seq], axis=1)
    out = block_forward(hidden, seq, blocks, backend=backend, chunk=chunk,
                        threads=threads)
    return out[:, -1, :]


def static_features(task: SyntheticTask, p: GnnParams) -> np.ndarray:
    """Baseline: the same GNN applied to the last snapshot only."""
    last = task.sequence[-1]
    return gnn_diffuse(last.features, last, p)


# ---------------------------------------------------------------------------
# Readout training and metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReadoutParams:
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=float)
        b = np.asarray(self.bias, dtype=float).reshape(-1)
        if w.ndim != 2 or b.size != w.shape[1]:
            raise ValueError("weight must be [D x C] with matching bias")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("readout parameters must be finite")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.argmax(features @ self.weight + self.bias, axis=1)


def standardize(features: np.ndarray, train_idx: np.ndarray):
    """Shift/scale all rows by the train split's statistics."""
    mu = features[train_idx].mean(axis=0)
    sd = features[train_idx].std(axis=0) + 1e-8
    return (features - mu) / sd


def readout_loss(params_flat: np.ndarray, features: np.ndarray,
                 labels: np.ndarray, num_classes: int, l2: float = 0.0):
    """Mean cross-entropy of the softmax readout plus an l2 penalty on the
    weights, with its analytic gradient.  params_flat stacks W row-major
    followed by the bias."""
    d = features.shape[1]
    w = params_flat[: d * num_classes].reshape(d, num_classes)
    b = params_flat[d * num_classes:]
    logits = features @ w + b
    logits = logits - logits.max(axis=1, keepdims=True)
    expl = np.exp(logits)
    prob = expl / expl.sum(axis=1, keepdims=True)
    n = features.shape[0]
    onehot = np.eye(num_classes)[np.asarray(labels, dtype=int)]
    loss = -np.mean(np.sum(onehot * np.log(prob + 1e-300), axis=1))
    loss += 0.5 * l2 * np.sum(w * w)
    g = (prob - onehot) / n
    grad = np.concatenate([(features.T @ g + l2 * w).reshape(-1), g.sum(axis=0)])
    return loss, grad


def train_readout(features: np.ndarray, labels: np.ndarray, split: Split,
                  lr: float = 0.5, epochs: int = 400, l2: float = 1e-3,
                  num_classes: int | None = None) -> ReadoutParams:
    """Full-batch gradient descent; keeps the parameters with the best
    validation Micro-F1 (checked every 10 epochs)."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    tr, va = np.asarray(split.train), np.asarray(split.val)
    if tr.size == 0:
        raise ValueError("empty train split")
    labels = np.asarray(labels, dtype=int)
    c = int(labels.max()) + 1 if num_classes is None else int(num_classes)
    d = features.shape[1]
    params = np.zeros(d * c + c)
    best, best_va = params.copy(), -1.0
    for epoch in range(epochs):
        _, grad = readout_loss(params, features[tr], labels[tr], c, l2)
        params = params - lr * grad
        if epoch % 10 == 0 or epoch == epochs - 1:
            p = ReadoutParams(params[: d * c].reshape(d, c), params[d * c:])
            micro, _ = f1_scores(p.predict(features[va]), labels[va], c)
            if micro > best_va:
                best_va, best = micro, params.copy()
    return ReadoutParams(best[: d * c].reshape(d, c), best[d * c:])


def f1_scores(preds, labels, num_classes: int | None = None):
    """Multi-class (micro, macro) F1.  Classes absent from both predictions
    and labels contribute 0 to the macro average."""
    preds = np.asarray(preds, dtype=int)
    labels = np.asarray(labels, dtype=int)
    if preds.shape != labels.shape:
        raise ValueError("preds and labels must have the same length")
    c = int(max(preds.max(), labels.max())) + 1 if num_classes is None else int(num_classes)
    tp = np.zeros(c)
    fp = np.zeros(c)
    fn = np.zeros(c)
    for k in range(c):
        tp[k] = np.sum((preds == k) & (labels == k))
        fp[k] = np.sum((preds == k) & (labels != k))
        fn[k] = np.sum((preds != k) & (labels == k))
    micro_den = 2 * tp.sum() + fp.sum() + fn.sum()
    micro = 2 * tp.sum() / micro_den if micro_den else 0.0
    prec = np.divide(tp, tp + fp, out=np.zeros(c), where=(tp + fp) > 0)
    rec = np.divide(tp, tp + fn, out=np.zeros(c), where=(tp + fn) > 0)
    f1 = np.divide(2 * prec * rec, prec + rec, out=np.zeros(c), where=(prec + rec) > 0)
    return float(micro), float(f1.mean())


def finite_diff_check(scalar_fn, params: np.ndarray, eps: float = 1e-5) -> float:
    """Max relative deviation between the analytic gradient returned by
    scalar_fn(params) -> (value, grad) and central finite differences."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    params = np.asarray(params, dtype=float)
    value, grad = scalar_fn(params)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise ValueError("scalar_fn produced a non-finite value or gradient")
    numeric = np.empty_like(params)
    for i in range(params.size):
        bump = np.zeros_like(params)
        bump[i] = eps
        hi, _ = scalar_fn(params + bump)
        lo, _ = scalar_fn(params - bump)
        numeric[i] = (hi - lo) / (2.0 * eps)
    denom = np.maximum(np.abs(numeric), 1e-6)
    return float(np.max(np.abs(np.asarray(grad) - numeric) / denom))


# ---------------------------------------------------------------------------
# Experiment driver
# ---------------------------------------------------------------------------

def run_experiment(seeds, task_cfg: TaskConfig = TaskConfig(),
                   model_cfg: ModelConfig = ModelConfig(),
                   inits=(InitStrategy.S4D_REAL, InitStrategy.S4D_CONST,
                          InitStrategy.RANDOM),
                   include_static: bool = True, lr: float = 0.5,
                   epochs: int = 400, l2: float = 1e-3,
                   backend: str = "parallel", threads: int = 1) -> list:
    """Per (seed, init) and optional static-baseline test-split scores.

    Rows are dicts with keys seed, variant, init, micro_f1, macro_f1 --
    the results CSV schema.
    """
    rows = []
    for seed in seeds:
        task = gen_synthetic(seed, task_cfg)
        te = task.split.test

        def score(features):
            z = standardize(features, task.split.train)
            readout = train_readout(z, task.labels, task.split, lr=lr,
                                    epochs=epochs, l2=l2,
                                    num_classes=task.num_classes)
            return f1_scores(readout.predict(z[te]), task.labels[te],
                             task.num_classes)

        for init in inits:
            cfg_i = ModelConfig(num_blocks=model_cfg.num_blocks,
                                state_size=model_cfg.state_size,
                                variant=model_cfg.variant, init=init,
                                mix_mechanism=model_cfg.mix_mechanism,
                                self_mix=model_cfg.self_mix,
                                c_scale=model_cfg.c_scale,
                                res_scale=model_cfg.res_scale,
                                delta_scale=model_cfg.delta_scale)
            blocks = sample_model(named_rng(seed, "model"), cfg_i,
                                  task_cfg.num_features, task_cfg.seq_len)
            micro, macro = score(extract_features(task, blocks, backend=backend,
                                                  threads=threads))
            rows.append({"seed": int(seed), "variant": cfg_i.variant.value,
                         "init": InitStrategy(init).value,
                         "micro_f1": micro, "macro_f1": macro})
        if include_static:
            blocks = sample_model(named_rng(seed, "model"), model_cfg,
                                  task_cfg.num_features, task_cfg.seq_len)
            micro, macro = score(static_features(task, blocks[0].layer.gnn))
            rows.append({"seed": int(seed), "variant": "static", "init": "none",
                         "micro_f1": micro, "macro_f1": macro})
    return rows


_RESULT_FIELDS = ["seed", "variant", "init", "micro_f1", "macro_f1"]


def results_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=_RESULT_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        out = dict(row)
        out["micro_f1"] = repr(float(row["micro_f1"]))
        out["macro_f1"] = repr(float(row["macro_f1"]))
        writer.writerow(out)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Labels sidecar format:
#   GSSML v1 <V> <C>
#   then V lines of integer class ids, one per node in id order.
# ---------------------------------------------------------------------------

_LABELS_MAGIC = "GSSML v1"


def save_labels(labels: np.ndarray, num_classes: int, path) -> None:
    labels = np.asarray(labels, dtype=int)
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValueError("labels out of class range")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{_LABELS_MAGIC} {labels.size} {int(num_classes)}\n")
        for x in labels.tolist():
            fh.write(f"{x}\n")


def load_labels(path):
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty labels file")
    head = lines[0].split()
    if len(head) != 4 or " ".join(head[:2]) != _LABELS_MAGIC:
        raise ValueError(f"{path}: malformed header (expected '{_LABELS_MAGIC} <V> <C>')")
    v, c = int(head[2]), int(head[3])
    if len(lines) < 1 + v:
        raise ValueError(f"{path}: expected {v} label lines")
    labels = np.array([int(x) for x in lines[1:1 + v]], dtype=int)
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"{path}: label outside [0, {c})")
    return labels, c
