"""Command-line entry point.

Subcommands: gen (write a synthetic task), verify (oracle-agreement suites),
metrics (temporal-continuity of a sequence file), run (frozen-backbone
experiment -> results CSV), bench (scan throughput -> CSV).

Exit codes: 0 success, 1 verification failure, 2 usage or input error.
Failures print one `error: ...` line to stderr.

Flags may also come from a flat key=value config file (`--config`); an
explicit flag always wins over the file, which wins over built-in defaults.
Keys in the file use the flag name with underscores; unknown keys are
ignored so one file can serve several subcommands.
"""

import argparse
import sys
import time

import numpy as np

from .discretize import MixMechanism, MutationSchedule, segment_weights, zoh_oracle_step
from .harness import (ModelConfig, TaskConfig, gen_synthetic, named_rng,
                      results_to_csv, run_experiment, save_labels)
from .hippo import TIME_ORIGIN, HippoConfig, integrate_hippo, projection_oracle
from .layers import InitStrategy, SsmVariant
from .scan import bench_recurrence
from .tgraph import (Action, EventStream, LaplacianKind, load_sequence,
                     save_sequence, temporal_continuity)

_KINDS = (LaplacianKind.SYMMETRIC, LaplacianKind.RANDOM_WALK)


# ---------------------------------------------------------------------------
# Config-file handling
# ---------------------------------------------------------------------------

def _load_config(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(value: str, like):
    if isinstance(like, bool):
        low = value.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {value!r}")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def _settings(args, defaults: dict) -> dict:
    """Effective settings: explicit flag > config file > default."""
    file_cfg = _load_config(args.config) if getattr(args, "config", None) else {}
    out = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in file_cfg:
            out[key] = _coerce(file_cfg[key], default if default is not None else "")
        else:
            out[key] = default
    return out


def _parse_seeds(text: str):
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:  # inclusive range; a leading '-' is a sign
            cut = part.index("-", 1)
            seeds.extend(range(int(part[:cut]), int(part[cut + 1:]) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError(f"no seeds in {text!r}")
    return seeds


# ---------------------------------------------------------------------------
# Verification suites (gen/verify share the random-instance builders)
# ---------------------------------------------------------------------------

def _random_stream(rng, num_nodes: int, horizon: float, num_events: int,
                   t_lo: float, t_hi: float) -> EventStream:
    pairs = [(i, j) for i in range(num_nodes) for j in range(i + 1, num_nodes)]
    initial = frozenset(p for p in pairs if rng.random() < 0.4)
    times = np.sort(rng.uniform(t_lo, t_hi, size=num_events))
    while len(set(times.tolist())) != num_events:
        times = np.sort(rng.uniform(t_lo, t_hi, size=num_events))
    current = set(initial)
    events = []
    for t in times:
        present = sorted(current)
        absent = sorted(set(pairs) - current)
        insert = not present or (absent and rng.random() < 0.5)
        pool = absent if insert else present
        u, v = pool[int(rng.integers(len(pool)))]
        events.append((u, v, float(t), Action.INSERT if insert else Action.DELETE))
        (current.add if insert else current.discard)((u, v))
    return EventStream(num_nodes, horizon, initial, tuple(events))


def suite_projection(seed: int, instances: int, alphas, ode_steps: int,
                     quad_points: int):
    """ODE integration vs the quadrature projection oracle at the horizon.

    Constant-in-time features over a horizon long enough for the start-up
    transient to decay; mutations confined to the first half.
    """
    rng = named_rng(seed, "verify-projection")
    worst = 0.0
    for i in range(instances):
        v = int(rng.integers(2, 9))
        n = int(rng.integers(2, 9))
        m = int(rng.integers(0, 6))
        stream = _random_stream(rng, v, 16.0, m, 0.25, 6.0)
        x = rng.normal(size=v)
        cfg = HippoConfig(order=n, alpha=float(alphas[i % len(alphas)]),
                          laplacian=_KINDS[i % 2], ode_steps_per_unit=ode_steps,
                          quadrature_points=quad_points)
        u = integrate_hippo(stream, lambda t: x, cfg, 16.0).u
        q = projection_oracle(stream, lambda t: x, cfg, 16.0).u
        worst = max(worst, np.linalg.norm(u - q) / np.linalg.norm(q))
    return worst


def suite_zoh(seed: int, instances: int, alphas, ode_steps: int):
    """One-interval exact discretization vs RK4 on the same diagonal system
    with the same interior mutation schedule and piecewise-constant features."""
    rng = named_rng(seed, "verify-zoh")
    worst = 0.0
    for i in range(instances):
        v = int(rng.integers(2, 9))
        n = int(rng.integers(1, 9))
        m = int(rng.integers(0, 6))
        t_start = float(rng.uniform(0.2, 0.8))
        length = float(rng.uniform(1.0, 4.0))
        t_end = t_start + length
        stream = _random_stream(rng, v, t_end + 0.5, m,
                                t_start + 0.05 * length, t_end - 0.05 * length)
        feats = tuple(rng.normal(size=v) for _ in range(m + 1))
        sched = MutationSchedule.from_stream(stream, t_start, t_end, feats)
        a = -np.exp(rng.uniform(-1.5, 1.0, size=n))
        b = rng.normal(size=n)
        kind = _KINDS[i % 2]
        alpha = float(alphas[i % len(alphas)])
        u0 = rng.normal(size=(v, n))
        u_zoh = zoh_oracle_step(u0, sched, a, b, alpha, kind)

        bounds = np.asarray(sched.boundaries)

        def path(t, bounds=bounds, feats=feats):
            j = int(np.searchsorted(bounds, t, side="right")) - 1
            return feats[min(max(j, 0), len(feats) - 1)]

        cfg = HippoConfig(order=n, alpha=alpha, laplacian=kind,
                          ode_steps_per_unit=ode_steps)
        u_ode = integrate_hippo(stream, path, cfg, t_end, u_start=u0,
                                t_start=t_start, system=(np.diag(a), b)).u
        rel = np.linalg.norm(u_zoh - u_ode) / max(np.linalg.norm(u_ode), 1e-12)
        worst = max(worst, rel)
    return worst


def suite_weights(seed: int, schedules: int):
    """Convexity of the segment weights: entries in [0,1], columns sum to 1."""
    rng = named_rng(seed, "verify-weights")
    worst_sum = 0.0
    worst_range = 0.0
    for _ in range(schedules):
        n = int(rng.integers(1, 9))
        m = int(rng.integers(0, 7))
        t0 = float(rng.uniform(-5.0, 5.0))
        length = float(rng.uniform(1e-3, 50.0))
        fracs = np.sort(rng.uniform(0.02, 0.98, size=m))
        while len(set(fracs.tolist())) != m:
            fracs = np.sort(rng.uniform(0.02, 0.98, size=m))
        times = tuple(t0 + length * f for f in fracs)
        blank = np.zeros((2, 2), dtype=bool)
        sched = MutationSchedule(t0, t0 + length, times,
                                 (blank,) * (m + 1), (np.zeros(2),) * (m + 1))
        a = -np.exp(rng.uniform(-7.0, 3.5, size=n))
        w = segment_weights(sched, a)
        worst_sum = max(worst_sum, float(np.abs(w.sum(axis=0) - 1.0).max()))
        worst_range = max(worst_range, float(max(-w.min(), w.max() - 1.0)))
    return max(worst_sum, worst_range)


def suite_reduction(seed: int, instances: int, ode_steps: int):
    """Graph smoothing off (alpha=0, or an edgeless graph) must reduce the
    joint integration to independent per-node memory flows.

    The per-node side is integrated segment-by-segment over the joint run's
    mutation cuts so both sides take identical RK4 steps.
    """
    rng = named_rng(seed, "verify-reduction")
    worst = 0.0
    for i in range(instances):
        v = int(rng.integers(2, 7))
        n = int(rng.integers(2, 7))
        edgeless = i % 2 == 1
        if edgeless:
            stream = EventStream(v, 4.0, frozenset(), ())
            alpha = 2.0
        else:
            stream = _random_stream(rng, v, 4.0, int(rng.integers(1, 4)), 0.25, 3.75)
            alpha = 0.0
        coef = rng.normal(size=v)
        freq = rng.uniform(0.5, 2.0, size=v)

        def path(t, coef=coef, freq=freq):
            return coef * np.sin(freq * t) + 1.0

        cfg = HippoConfig(order=n, alpha=alpha, laplacian=_KINDS[i % 2],
                          ode_steps_per_unit=ode_steps)
        joint = integrate_hippo(stream, path, cfg, 4.0).u
        solo_stream = EventStream(1, 4.0, frozenset(), ())
        cuts = [TIME_ORIGIN] + [t for t in stream.mutation_times
                                if TIME_ORIGIN < t < 4.0] + [4.0]
        for node in range(v):
            def solo_path(t, node=node, path=path):
                return np.array([path(t)[node]])

            u = None
            for lo, hi in zip(cuts, cuts[1:]):
                u = integrate_hippo(solo_stream, solo_path, cfg, hi,
                                    u_start=u, t_start=lo).u
            worst = max(worst, float(np.abs(joint[node] - u[0]).max()))
    return worst


_VERIFY_DEFAULTS = {"seed": 0, "instances": 20, "schedules": 1000,
                    "alpha": None, "ode_steps": 200, "quad_points": 2001}


def cmd_verify(args) -> int:
    cfg = _settings(args, _VERIFY_DEFAULTS)
    # alpha default None means the criterion set {0, 0.5, 2}
    if cfg["alpha"] is None:
        alphas = (0.0, 0.5, 2.0)
    else:
        alphas = (float(cfg["alpha"]),)
    checks = [
        ("projection-vs-ode", 1e-3,
         lambda: suite_projection(cfg["seed"], cfg["instances"], alphas,
                                  cfg["ode_steps"], cfg["quad_points"])),
        ("zoh-vs-ode", 1e-4,
         lambda: suite_zoh(cfg["seed"], cfg["instances"], alphas,
                           cfg["ode_steps"])),
        ("weights-convexity", 1e-12,
         lambda: suite_weights(cfg["seed"], cfg["schedules"])),
    ]
    if 0.0 in alphas:
        checks.append(("hippo-reduction", 1e-10,
                       lambda: suite_reduction(cfg["seed"], 6, cfg["ode_steps"])))
    failed = False
    for name, tol, fn in checks:
        t0 = time.perf_counter()
        err = fn()
        took = time.perf_counter() - t0
        ok = err <= tol
        failed = failed or not ok
        print(f"{'PASS' if ok else 'FAIL'} {name} max_err={err:.3e} "
              f"tol={tol:.0e} time={took:.1f}s")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# gen / metrics / run / bench
# ---------------------------------------------------------------------------

_TASK_DEFAULTS = {"v": 200, "l": 16, "d": 8, "c": 4, "p_in": 0.22,
                  "p_out": 0.02, "p_decay": 0.10, "drift_rate": 0.15,
                  "noise": 1.0, "radius": 1.0, "omega": float(np.pi / 16)}


def _task_config(cfg: dict) -> TaskConfig:
    return TaskConfig(num_nodes=cfg["v"], seq_len=cfg["l"], num_features=cfg["d"],
                      num_classes=cfg["c"], p_in=cfg["p_in"], p_out=cfg["p_out"],
                      p_decay=cfg["p_decay"], drift_rate=cfg["drift_rate"],
                      noise=cfg["noise"], radius=cfg["radius"], omega=cfg["omega"])


def cmd_gen(args) -> int:
    cfg = _settings(args, dict(_TASK_DEFAULTS, seed=0))
    task = gen_synthetic(cfg["seed"], _task_config(cfg))
    save_sequence(task.sequence, args.out)
    save_labels(task.labels, task.num_classes, args.out + ".labels")
    print(f"wrote {args.out} ({task.num_nodes} nodes, {len(task.sequence)} snapshots) "
          f"and {args.out}.labels")
    return 0


def cmd_metrics(args) -> int:
    seq = load_sequence(args.path)
    tc_structure, tc_feature = temporal_continuity(seq)
    print(f"TC_structure={tc_structure!r}")
    print(f"TC_feature={tc_feature!r}")
    return 0


_RUN_DEFAULTS = {"seeds": "0-9", "variant": "s4", "init": "all",
                 "blocks": 2, "state_size": 6, "mechanism": "repr_mix",
                 "skip_static": False, "lr": 0.5, "epochs": 400, "l2": 1e-3,
                 "backend": "parallel", "threads": 1}


def cmd_run(args) -> int:
    cfg = _settings(args, dict(_TASK_DEFAULTS, **_RUN_DEFAULTS))
    seeds = _parse_seeds(cfg["seeds"]) if isinstance(cfg["seeds"], str) else cfg["seeds"]
    inits = ([InitStrategy(cfg["init"])] if cfg["init"] != "all"
             else [InitStrategy.S4D_REAL, InitStrategy.S4D_CONST, InitStrategy.RANDOM])
    model_cfg = ModelConfig(num_blocks=cfg["blocks"], state_size=cfg["state_size"],
                            variant=SsmVariant(cfg["variant"]),
                            mix_mechanism=MixMechanism(cfg["mechanism"]))
    rows = run_experiment(seeds, _task_config(cfg), model_cfg, inits=inits,
                          include_static=not cfg["skip_static"], lr=cfg["lr"],
                          epochs=cfg["epochs"], l2=cfg["l2"],
                          backend=cfg["backend"], threads=cfg["threads"])
    csv_text = results_to_csv(rows)
    with open(args.out, "w", encoding="ascii") as fh:
        fh.write(csv_text)

    groups = {}
    for row in rows:
        groups.setdefault((row["variant"], row["init"]), []).append(row)
    print(f"{'variant':10s} {'init':10s} {'mean_micro':>10s} {'mean_macro':>10s} {'n':>3s}")
    for (variant, init), grp in sorted(groups.items()):
        micro = np.mean([r["micro_f1"] for r in grp])
        macro = np.mean([r["macro_f1"] for r in grp])
        print(f"{variant:10s} {init:10s} {micro:10.4f} {macro:10.4f} {len(grp):3d}")
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


_BENCH_DEFAULTS = {"l_values": "1024,2048,4096,8192,16384,32768,65536",
                   "lanes": 128, "repeats": 3, "chunk": 0, "threads": 1,
                   "backends": "sequential,parallel", "seed": 0}


def cmd_bench(args) -> int:
    cfg = _settings(args, dict(_BENCH_DEFAULTS))
    l_values = [int(x) for x in str(cfg["l_values"]).split(",") if x.strip()]
    backends = tuple(b.strip() for b in cfg["backends"].split(",") if b.strip())
    rows = bench_recurrence(l_values, lanes=cfg["lanes"], backends=backends,
                            repeats=cfg["repeats"],
                            chunk=cfg["chunk"] or None, threads=cfg["threads"],
                            seed=cfg["seed"])
    lines = ["L,lanes,backend,ns_per_element"]
    lines += [f"{r['L']},{r['lanes']},{r['backend']},{r['ns_per_element']!r}"
              for r in rows]
    text = "\n".join(lines) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(text)
        print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_task_flags(sub):
    sub.add_argument("--v", type=int, help="number of nodes")
    sub.add_argument("--l", type=int, help="number of snapshots")
    sub.add_argument("--d", type=int, help="feature dimensions")
    sub.add_argument("--c", type=int, help="number of classes")
    sub.add_argument("--p-in", type=float, help="initial intra-community edge probability")
    sub.add_argument("--p-out", type=float, help="inter-community edge probability")
    sub.add_argument("--p-decay", type=float, help="per-step decay of p_in toward p_out")
    sub.add_argument("--drift-rate", type=float, help="per-step pair resample probability")
    sub.add_argument("--noise", type=float, help="feature noise scale")
    sub.add_argument("--radius", type=float, help="centroid circle radius")
    sub.add_argument("--omega", type=float, help="centroid rotation per step (radians)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gssm",
        description="Temporal-graph state-space models: synthetic tasks, "
                    "oracle verification, metrics, experiments, benchmarks.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value config file; flags override it")
    sub = parser.add_subparsers(dest="command", metavar="{gen,verify,metrics,run,bench}")

    p = sub.add_parser("gen", parents=[common],
                       help="generate a synthetic task (sequence + labels sidecar)")
    p.add_argument("--seed", type=int, required=True, help="generator seed")
    p.add_argument("--out", required=True, help="output sequence path "
                                                "(labels go to <out>.labels)")
    _add_task_flags(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("verify", parents=[common],
                       help="run the oracle-agreement suites (exit 1 on breach)")
    p.add_argument("--seed", type=int, help="instance seed (default 0)")
    p.add_argument("--instances", type=int, help="instances per agreement suite (default 20)")
    p.add_argument("--schedules", type=int, help="schedules for the weight check (default 1000)")
    p.add_argument("--alpha", type=float,
                   help="restrict smoothing strength (default: 0, 0.5 and 2)")
    p.add_argument("--ode-steps", type=int, help="RK4 steps per time unit (default 200)")
    p.add_argument("--quad-points", type=int, help="quadrature nodes (default 2001)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("metrics", parents=[common],
                       help="print temporal-continuity metrics for a sequence file")
    p.add_argument("path", help="sequence file")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("run", parents=[common],
                       help="frozen-backbone experiment; writes the results CSV")
    p.add_argument("--out", required=True, help="results CSV path")
    p.add_argument("--seeds", help="comma list and/or inclusive ranges, e.g. 0-9")
    p.add_argument("--variant", choices=[v.value for v in SsmVariant],
                   help="layer variant (default s4)")
    p.add_argument("--init", choices=[s.value for s in InitStrategy] + ["all"],
                   help="state initialization (default: all three)")
    p.add_argument("--blocks", type=int, help="number of blocks (default 2)")
    p.add_argument("--state-size", type=int, help="state entries per channel (default 4)")
    p.add_argument("--mechanism", choices=[m.value for m in MixMechanism],
                   help="mixing mechanism of the first block (default repr_mix)")
    p.add_argument("--skip-static", action="store_const", const=True, default=None,
                   help="skip the static last-snapshot baseline")
    p.add_argument("--lr", type=float, help="readout learning rate (default 0.5)")
    p.add_argument("--epochs", type=int, help="readout epochs (default 400)")
    p.add_argument("--l2", type=float, help="readout weight penalty (default 1e-3)")
    p.add_argument("--backend", choices=["sequential", "parallel"],
                   help="scan backend (default parallel)")
    p.add_argument("--threads", type=int, help="scan threads, 0 = auto (default 1)")
    _add_task_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", parents=[common],
                       help="scan throughput benchmark; writes CSV")
    p.add_argument("--out", default="-", help="CSV path, - for stdout (default -)")
    p.add_argument("--l-values", help="comma list of sequence lengths")
    p.add_argument("--lanes", type=int, help="independent lanes (default 128)")
    p.add_argument("--repeats", type=int, help="best-of repeats (default 3)")
    p.add_argument("--chunk", type=int, help="parallel chunk length (default sqrt(L))")
    p.add_argument("--threads", type=int, help="scan threads, 0 = auto (default 1)")
    p.add_argument("--backends", help="comma list from sequential,parallel")
    p.add_argument("--seed", type=int, help="workload seed (default 0)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    if getattr(args, "command", None) is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except Exception as exc:  # one-line machine-parsable failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
