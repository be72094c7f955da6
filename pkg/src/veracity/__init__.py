"""Multi-channel message veracity classification.

Text (time-distributed convolution + stacked LSTM), lexicon sentiment and
precomputed image features are fused and classified as fake or real.
"""

__version__ = "0.1.0"

from .estimator import VeracityClassifier
from .features import MessageFeatures, MessageFeaturizer
from .metrics import MetricsReport, compute_metrics
from .model import ModelConfig, VeracityNet
from .pipeline import Message, load_corpus, split_by_event, write_corpus

__all__ = [
    "Message",
    "MessageFeatures",
    "MessageFeaturizer",
    "MetricsReport",
    "ModelConfig",
    "VeracityClassifier",
    "VeracityNet",
    "compute_metrics",
    "load_corpus",
    "split_by_event",
    "write_corpus",
]
