"""Self-supervised monocular depth estimation from video triplets.

The package trains a two-encoder depth network and a pose network from
photometric supervision alone, on top of a from-scratch reverse-mode
autodiff core, and validates everything against a synthetic ray-cast
ground-truth oracle.
"""

__version__ = "0.1.0"

from .estimator import DepthEstimator
from .losses import LossWeights

__all__ = ["DepthEstimator", "LossWeights", "__version__"]
