from .linalg import jacobi_eigh, matrix_sqrt_trace, psd_sqrt, clamp_eigenvalues
from .stats import FeatureStats, feature_stats, fid
from .inception import inception_score, score_from_probs
from .backbone import Backbone, ToyClassifier, RandomFeatureBackbone, FeatureNet, build_backbone, class_index
from .evaluate import (
    MetricReport, evaluate_run, prepare_backbone, noise_baseline, uniform_noise_images, score_images, train_images,
)

__all__ = [
    "jacobi_eigh", "matrix_sqrt_trace", "psd_sqrt", "clamp_eigenvalues",
    "FeatureStats", "feature_stats", "fid",
    "inception_score", "score_from_probs",
    "Backbone", "ToyClassifier", "RandomFeatureBackbone", "FeatureNet", "build_backbone", "class_index",
    "MetricReport", "evaluate_run", "prepare_backbone", "noise_baseline", "uniform_noise_images", "score_images",
    "train_images",
]
