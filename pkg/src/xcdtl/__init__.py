"""Cross-domain topology transfer: graph ensembles, structural descriptors,
inverted-importance anchor selection, subspace alignment, and isolation-forest
anomaly detection under a data-scarcity / noise stress grid."""

from .alignment import AlignmentProjection, fit_alignment, project
from .anomaly import (
    AnomalyLabels,
    DetectionMetrics,
    IsolationForestModel,
    detect,
    detection_metrics,
    label_anomalies,
    score,
    transfer_gain,
)
from .classifiers import (
    CLASSIFIER_KINDS,
    TrainedClassifier,
    evaluate_classifier,
    importance_ranks,
    train_classifier,
)
from .features import (
    FEATURE_NAMES,
    FeatureMatrix,
    compute_features,
    features_for_ensemble,
    standardize,
)
from .graphs import (
    DOMAINS,
    DomainEnsemble,
    Graph,
    generate_ensemble,
    generate_graph,
    load_edge_list,
    load_ensemble,
    save_ensemble,
)
from .grid import GridConfig, corrupt, run_cell, run_grid
from .ranking import (
    BordaScore,
    GlobalConsensus,
    IITTable,
    borda_scores,
    global_consensus,
    iit_score,
    iit_table,
    mean_shift,
    rho_consistency,
    select_anchors,
)
from .report import emit_report
from .stats import dunn_posthoc, kruskal_wallis, paired_t_test, regression

__version__ = "0.1.0"

__all__ = [
    "AlignmentProjection",
    "AnomalyLabels",
    "BordaScore",
    "CLASSIFIER_KINDS",
    "DOMAINS",
    "DetectionMetrics",
    "DomainEnsemble",
    "FEATURE_NAMES",
    "FeatureMatrix",
    "GlobalConsensus",
    "GridConfig",
    "Graph",
    "IITTable",
    "IsolationForestModel",
    "TrainedClassifier",
    "borda_scores",
    "compute_features",
    "corrupt",
    "detect",
    "detection_metrics",
    "dunn_posthoc",
    "emit_report",
    "evaluate_classifier",
    "features_for_ensemble",
    "fit_alignment",
    "generate_ensemble",
    "generate_graph",
    "global_consensus",
    "iit_score",
    "iit_table",
    "importance_ranks",
    "kruskal_wallis",
    "label_anomalies",
    "load_edge_list",
    "load_ensemble",
    "mean_shift",
    "paired_t_test",
    "project",
    "regression",
    "rho_consistency",
    "run_cell",
    "run_grid",
    "save_ensemble",
    "score",
    "select_anchors",
    "standardize",
    "train_classifier",
    "transfer_gain",
]
