"""The node-classification harness end to end, at toy scale so it runs in
seconds: generate a drifting-community task, extract temporal features with a
frozen random backbone, train the softmax readout, and compare against the
static last-snapshot baseline.

The full-size experiment (200 nodes, 10 seeds, all three state inits) is the
CLI's job:  gssm run --config configs/acceptance.cfg --out results.csv
"""

import numpy as np

from gssm import (InitStrategy, MixMechanism, ModelConfig, SsmVariant,
                  TaskConfig, f1_scores, gen_synthetic, run_experiment,
                  temporal_continuity)

task_cfg = TaskConfig(num_nodes=80, seq_len=12, num_features=6, num_classes=3)
model_cfg = ModelConfig(num_blocks=2, state_size=4, variant=SsmVariant.S4,
                        mix_mechanism=MixMechanism.REPR_MIX)

# What one task instance looks like.
task = gen_synthetic(0, task_cfg)
tc_structure, tc_feature = temporal_continuity(task.sequence)
print(f"task: {task.num_nodes} nodes, {len(task.sequence)} snapshots, "
      f"{task.num_classes} classes")
print(f"class sizes: {np.bincount(task.labels)}  "
      f"TC_structure={tc_structure:.2f} TC_feature={tc_feature:.2f}")
print(f"split: {task.split.train.size} train / {task.split.val.size} val / "
      f"{task.split.test.size} test")

# Three seeds, temporal model vs static baseline.
rows = run_experiment([0, 1, 2], task_cfg, model_cfg,
                      inits=[InitStrategy.S4D_REAL], epochs=200)
print(f"\n{'seed':>4s} {'variant':>8s} {'init':>9s} {'micro':>6s} {'macro':>6s}")
for r in rows:
    print(f"{r['seed']:4d} {r['variant']:>8s} {r['init']:>9s} "
          f"{r['micro_f1']:6.3f} {r['macro_f1']:6.3f}")

micro = {name: np.mean([r["micro_f1"] for r in rows if r["variant"] == name])
         for name in ("s4", "static")}
print(f"\nmean micro-F1: temporal {micro['s4']:.3f} vs static {micro['static']:.3f} "
      f"(lift {100 * (micro['s4'] - micro['static']):+.1f} points)")

# f1_scores itself is tiny and reusable:
micro_f1, macro_f1 = f1_scores(np.array([0, 0, 1, 2]), np.array([0, 1, 1, 2]), 3)
print(f"\nf1_scores sanity check on 4 hand predictions: "
      f"micro={micro_f1:.2f} macro={macro_f1:.2f}")
