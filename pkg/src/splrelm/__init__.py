"""Online sparse-update classifier with least-squares baselines, a Q8.8
fixed-point engine, LFSR-regenerated input weights, and a hardware
cycle/throughput model.
"""

from .cyclemodel import (HwConfig, complexity_report, fps, infer_cycles,
                         train_cycles_worst)
from .datasets import (Dataset, add_gaussian_noise, load_idx, long_tail_counts,
                       make_long_tailed, subsample, synthetic_blobs)
from .models import (ElmClassifier, OsElmClassifier, SplrClassifier, evaluate,
                     load_checkpoint, save_checkpoint, train_epoch,
                     train_epochs, wta_grad, wta_loss)
from .opcount import OpCounter, count_ops
from .prng import SeedPlan

__version__ = "0.1.0"

__all__ = [
    "Dataset", "ElmClassifier", "HwConfig", "OpCounter", "OsElmClassifier",
    "SeedPlan", "SplrClassifier", "add_gaussian_noise", "complexity_report",
    "count_ops", "evaluate", "fps", "infer_cycles", "load_checkpoint",
    "load_idx", "long_tail_counts", "make_long_tailed", "save_checkpoint",
    "subsample", "synthetic_blobs", "train_cycles_worst", "train_epoch",
    "train_epochs", "wta_grad", "wta_loss",
]
