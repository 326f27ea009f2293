"""Consensus land-cover mapping from multiple probabilistic classifications.

Fuses per-investigator class-probability rasters into a single map by
Dirichlet-conjugate updating, with optional investigator confidence
weighting and entropy-based grouping of like-minded investigators, plus
the assessment tooling (stratified Monte Carlo accuracy, paired t-tests,
interspersion index) needed to judge the result.
"""

from .accuracy import (AccuracyReport, ConfusionMatrix, MonteCarloResult,
                       accuracy_report, agreement_ratio, confusion,
                       monte_carlo_assess, paired_t_test, pearson_correlation,
                       stratified_sample)
from .clustering import (ClusterModel, EntropyFeatureMatrix, adjusted_rand_index,
                         cluster_subsets, entropy_features, entropy_map,
                         kmeans_cluster, kmedoids_cluster)
from .fusion import (FusionConfig, PosteriorField, fuse, fused_label_map,
                     regularize)
from .grids import (MAX_CLASSES, NODATA, EntropyRaster, GridShape, LabelRaster,
                    ProbabilityRaster, hard_classify)
from .landscape import EdgeTable, edge_table, iji
from .pipeline import PipelineConfig, plurality_baseline, run_pipeline
from .synth import (InvestigatorSpec, SceneSpec, generate_investigator,
                    generate_scene, style_kernel, two_style_scenario,
                    uniform_kernel)
from .weights import WeightEstimate, dirichlet_log_density, estimate_weights

__version__ = "0.1.0"
