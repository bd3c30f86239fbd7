"""evalharness: transfer-learning and neural-predictivity experiments on
synthforge-style manifest datasets."""

from .data import ArrayDataset, SplitDataset, load_manifest_dataset, make_toy_target, split_dataset
from .predictivity import PredictivityResult, neural_predictivity, synthetic_responses
from .rsa import RsaResult, rsa
from .training import FinetuneResult, TrainRun, finetune, load_checkpoint, pretrain

__version__ = "0.1.0"

__all__ = [
    "ArrayDataset",
    "FinetuneResult",
    "PredictivityResult",
    "RsaResult",
    "SplitDataset",
    "TrainRun",
    "finetune",
    "load_checkpoint",
    "load_manifest_dataset",
    "make_toy_target",
    "neural_predictivity",
    "pretrain",
    "rsa",
    "split_dataset",
    "synthetic_responses",
    "__version__",
]
