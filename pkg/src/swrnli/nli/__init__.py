from .estimator import (ESTIMATORS, DecomposableAttentionClassifier, ESIMClassifier,
                        evaluate_accuracy, train_nli)
from .fusion import FusionMode, compute_attention, sample_noise_swr
from .models import (DAConfig, DecomposableAttention, ESIM, ESIMConfig, ClassifierHead,
                     classify_head, count_parameters)

__all__ = ["ClassifierHead", "DAConfig", "DecomposableAttention", "DecomposableAttentionClassifier",
           "ESIM", "ESIMClassifier", "ESIMConfig", "ESTIMATORS", "FusionMode", "classify_head",
           "compute_attention", "count_parameters", "evaluate_accuracy", "sample_noise_swr",
           "train_nli"]
