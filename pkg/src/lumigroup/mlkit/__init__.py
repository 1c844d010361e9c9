"""From-scratch classifiers, clustering and evaluation used across lumigroup."""
from .cluster import (
    ClusterEstimate,
    CountMethod,
    GaussianMixture,
    agglomerative,
    cluster_count_estimate,
    elbow,
    fit_gmm,
    kmeans,
    silhouette,
    xmeans,
)
from .evaluation import (
    EvalReport,
    binary_auc,
    confusion_matrix,
    evaluate_predictions,
    kfold_cv,
    metrics_from_confusion,
    stratified_folds,
)
from .models import (
    AdaBoost,
    Dataset,
    DecisionTree,
    ExtraTrees,
    GradientBoosting,
    Kind,
    LinearSVM,
    NaiveBayes,
    RandomForest,
    load_model,
    make_model,
    save_model,
    train,
)
