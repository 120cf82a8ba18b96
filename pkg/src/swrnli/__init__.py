"""Syntactic word representations from a biaffine parser, fused into NLI models."""
from .nli import DecomposableAttentionClassifier, ESIMClassifier, FusionMode
from .parser import BiaffineParser

__version__ = "0.1.0"

__all__ = ["BiaffineParser", "DecomposableAttentionClassifier", "ESIMClassifier", "FusionMode"]
