"""Graph-based maximum inner product search with metric-amphibious indexing.

The index stitches two edge families — Euclidean-pruned neighbors for
global connectivity and inner-product dominator edges for fast norm
climbing — and loads them at query time under an out-degree budget R and
an IP-edge ratio alpha. Search runs a bounded-pool greedy traversal that
can start under Euclidean distance and switch to inner product after m
expansions.
"""

from .bench import (BenchRecord, ScaleRecord, SyntheticSpec, VerifyLimits,
                    VerifyReport, bench_one, find_ls_for_recall,
                    generate_synthetic, recall_at_k, run_benchmark,
                    run_queries, run_scaling_study, verify_suite)
from .construction import (EdgeList, KnnGraph, build_exact_knn,
                           build_exact_ndg, build_nndescent_knn,
                           count_strong_components, knn_recall, mrng_prune,
                           ndg_select)
from .errors import FormatError, UsageError
from .index import (MagIndex, build_mag, build_stage1, build_stage2,
                    load_index, materialize, save_index)
from .io import (GroundTruth, brute_force_topk, compute_ground_truth,
                 load_ground_truth, read_fvecs, read_ivecs,
                 save_ground_truth, write_fvecs, write_ivecs)
from .metrics import (Dataset, MetricKind, euclidean_sq, inner_product,
                      is_better, norm, score, score_batch)
from .search import (CandidatePool, DualityReport, EntryPolicy, SearchGraph,
                     SearchParams, SearchResult, anms_search,
                     euclidean_medoid, greedy_search, verify_scaling_duality)
from .stats import (Clustering, StatsReport, coefficient_of_variation,
                    compute_stats, davies_bouldin, dominator_probability,
                    dominator_probability_mc, estimate_nn_angle,
                    expected_self_dominators, kmeans, self_dominator_set,
                    tuning_hint)

__version__ = "0.1.0"
