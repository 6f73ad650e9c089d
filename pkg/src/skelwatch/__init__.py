"""skelwatch: anomaly detection for 2D pose-keypoint streams.

Pipeline: keypoint JSON -> binary 28x28 skeleton images -> stride-1 windows
-> sequence autoencoder trained on normal motion -> reconstruction-error
scores -> ROC/AUROC evaluation.
"""

from skelwatch.autodiff import Parameter, Tape, Tensor

__version__ = "0.1.0"

__all__ = ["Tensor", "Parameter", "Tape", "__version__"]
