"""Temporal causal discovery with a causality-aware transformer and relevance decomposition."""

import os as _os

# BLAS thread count must be fixed before numpy is first imported.
if _os.environ.get("TEMPCAUSAL_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["TEMPCAUSAL_THREADS"])

from .datasets import GeneratorSpec, generate, load_csv, load_ground_truth  # noqa: E402
from .detector import DetectorConfig, discover  # noqa: E402
from .evaluation import EvalResult, pod, prf1  # noqa: E402
from .graph import CausalGraph, Edge  # noqa: E402
from .model import ModelConfig, forward, init_params, load_checkpoint, save_checkpoint  # noqa: E402
from .trainer import TrainConfig, train  # noqa: E402

__all__ = [
    "CausalGraph", "DetectorConfig", "Edge", "EvalResult", "GeneratorSpec", "ModelConfig", "TrainConfig",
    "discover", "forward", "generate", "init_params", "load_checkpoint", "load_csv", "load_ground_truth",
    "pod", "prf1", "save_checkpoint", "train",
]
__version__ = "0.1.0"
