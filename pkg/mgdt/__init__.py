"""
# Mgdt

Multi-game decision transformers, trained offline on a suite of small arcade
games and played with expert-biased return sampling.

```py
>>> import mgdt
>>> data = mgdt.generate_dataset("catch", n_checkpoints=10)
>>> result = mgdt.train(data, mgdt.preset("DT-tiny"), mgdt.LambHyper())
>>> mgdt.evaluate(result.model, ["catch"]).iqm
```
"""
from .dataset import (
    Manifest,
    filter_expert,
    load_dataset,
    read_episodes,
    subsample_steps,
    write_episodes,
)
from .evaluation import EvalReport, evaluate, run_finetune_protocol
from .games import generate_dataset, reset, step
from .inference import InferenceContext, SamplerConfig, choose_action
from .lamb import LambHyper
from .model import Model, ModelConfig, preset
from .sequence import Layout, Trajectory, build_mask, build_window
from .tokens import Codec
from .training import TrainSettings, train
from . import errors
from ._consts import VERSION


# Set up the version string
__version__ = ".".join(str(n) for n in VERSION)
del VERSION


__all__ = [
    "Manifest",
    "filter_expert",
    "load_dataset",
    "read_episodes",
    "subsample_steps",
    "write_episodes",
    "EvalReport",
    "evaluate",
    "run_finetune_protocol",
    "generate_dataset",
    "reset",
    "step",
    "InferenceContext",
    "SamplerConfig",
    "choose_action",
    "LambHyper",
    "Model",
    "ModelConfig",
    "preset",
    "Layout",
    "Trajectory",
    "build_mask",
    "build_window",
    "Codec",
    "TrainSettings",
    "train",
    "errors",
]
