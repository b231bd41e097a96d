"""Temporal-graph state-space models at desk scale.

Continuous-time graph-regularized memory (hippo), its exact and practical
discretizations (discretize), graph SSM layers with S4/S5/S6 wirings and a
parallel scan (layers, scan), temporal-graph containers and formats (tgraph),
and a synthetic node-classification harness (harness).  `gssm.cli.main` is
the command-line entry point.
"""

from .discretize import (MixMechanism, MutationSchedule, discrete_step,
                         mixed_estimate, segment_weights, zoh_oracle_step)
from .harness import (ModelConfig, ReadoutParams, Split, SyntheticTask,
                      TaskConfig, extract_features, f1_scores,
                      finite_diff_check, gen_synthetic, load_labels,
                      named_rng, readout_loss, results_to_csv, run_experiment,
                      sample_model, save_labels, split_nodes, standardize,
                      static_features, train_readout)
from .hippo import (TIME_ORIGIN, CoefficientState, HippoConfig, HippoLegS,
                    consensus_profile, hippo_legs_matrices, integrate_hippo,
                    projection_oracle)
from .layers import (BlockParams, ConvMixParams, GnnFlavor, GnnParams,
                     InitStrategy, InterpMixParams, SsmLayerParams,
                     SsmVariant, StateInitRule, align_memory, apply_mix,
                     block_forward, delta_bias_init, glorot, gnn_diffuse,
                     init_a, layer_norm, load_checkpoint, mix_conv1d,
                     mix_interp, relu, s4_forward, s5_forward, s6_forward,
                     save_checkpoint, softplus)
from .scan import (RecurrenceInputs, bench_recurrence, combine,
                   scan_parallel, scan_sequential)
from .tgraph import (Action, EventStream, LaplacianKind, Snapshot,
                     SnapshotSequence, adjacency_from_edges, edges_at,
                     laplacian, load_sequence, materialize_snapshots,
                     save_sequence, temporal_continuity)

__version__ = "0.1.0"
