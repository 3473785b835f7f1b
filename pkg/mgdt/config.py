"""
# Mgdt > Config

Run configuration, as a tree of dataclasses validated by OmegaConf.

A configuration file is YAML holding any subset of the sections below. Every
command writes the configuration it actually used, with all defaults filled
in, to `resolved_config.yaml` in its output directory, and that file can be
passed back with `--config` to repeat the run.
"""
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional
from omegaconf import OmegaConf
from omegaconf.errors import OmegaConfBaseException
from . import games
from .errors import MgdtConfigError
from .evaluation import FinetuneSettings
from .inference import Regeneration, SamplerConfig, SamplerMode
from .lamb import FINETUNE, PRETRAIN, LambHyper
from .model import ModelConfig, preset
from .sequence import Layout
from .training import TrainSettings


log = logging.getLogger(__name__)


RESOLVED_NAME = "resolved_config.yaml"

FINETUNE_STEP_RATIO = 0.01
"""
Fine-tuning runs for this fraction of the pretraining steps
"""

FINETUNE_BATCH_RATIO = 1 / 8
"""
Fine-tuning batches are this fraction of the pretraining batch size
"""


@dataclass
class ModelSection:
    preset: str = "DT-tiny"
    n_layers: Optional[int] = None
    d_model: Optional[int] = None
    n_heads: Optional[int] = None
    """
    Overrides of the preset's shape
    """
    dtype: str = "float32"
    window: int = 4
    """
    Number of timesteps the model sees at once
    """


@dataclass
class GamesSection:
    train: list[str] = field(
        default_factory=lambda: list(games.TRAINING_GAMES))
    held_out: list[str] = field(
        default_factory=lambda: list(games.HELD_OUT_GAMES))


@dataclass
class DataSection:
    runs: int = 2
    """
    Number of independent generation runs per game
    """
    n_checkpoints: int = 50
    episodes_per_checkpoint: int = 4
    expert_fraction: float = 0.1


@dataclass
class OptimSection:
    peak_lr: float = PRETRAIN.peak_lr
    warmup_steps: int = 200
    beta1: float = PRETRAIN.beta1
    beta2: float = PRETRAIN.beta2
    eps: float = PRETRAIN.eps
    weight_decay: float = PRETRAIN.weight_decay
    clip_norm: float = PRETRAIN.clip_norm


@dataclass
class FinetuneSection:
    peak_lr: float = FINETUNE.peak_lr
    warmup_steps: int = 5
    weight_decay: float = FINETUNE.weight_decay
    data_fraction: float = 0.01
    steps: Optional[int] = None
    """
    Defaults to `FINETUNE_STEP_RATIO` of the training steps
    """
    batch_size: Optional[int] = None
    """
    Defaults to `FINETUNE_BATCH_RATIO` of the training batch size
    """
    chunk_len: int = 16


@dataclass
class SamplerSection:
    mode: str = SamplerMode.EXPERT_BIAS.value
    kappa: float = 10.0
    temperature: float = 1.0
    percentile: float = 85.0
    n_samples: int = 128
    regeneration: str = Regeneration.LATEST.value
    return_temperature: Optional[float] = None
    return_percentile: Optional[float] = None
    action_percentile: Optional[float] = None


@dataclass
class TrainSection:
    steps: int = 5000
    batch_size: int = 32
    log_every: int = 50
    checkpoint_every: int = 500
    inclusive_returns: bool = False


@dataclass
class EvalSection:
    trials: int = 16
    scaling_presets: list[str] = field(
        default_factory=lambda: ["DT-tiny", "DT-small", "DT-medium"])
    """
    Model sizes compared by the scaling experiment
    """


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    games: GamesSection = field(default_factory=GamesSection)
    data: DataSection = field(default_factory=DataSection)
    optim: OptimSection = field(default_factory=OptimSection)
    finetune: FinetuneSection = field(default_factory=FinetuneSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)
    seed: int = 0
    deterministic: bool = False
    augment: bool = True
    budget_scale: float = 1.0
    """
    Factor applied to every step count and batch size
    """

    def scaled(self, n: int) -> int:
        return max(1, round(n * self.budget_scale))

    def model_config(self, preset_name: Optional[str] = None) -> ModelConfig:
        overrides: dict[str, Any] = {
            name: value for name, value in (
                ("n_layers", self.model.n_layers),
                ("d_model", self.model.d_model),
                ("n_heads", self.model.n_heads),
            ) if value is not None and preset_name is None
        }
        # BC windows are shorter than DT ones, so fit too
        max_len = self.model.window * Layout.DT.step_length(
            ModelConfig().num_patches)
        return preset(
            preset_name or self.model.preset,
            dtype=self.model.dtype,
            max_len=max_len,
            **overrides,
        )

    def lamb_hyper(self) -> LambHyper:
        o = self.optim
        return LambHyper(
            peak_lr=o.peak_lr,
            warmup_steps=self.scaled(o.warmup_steps),
            beta1=o.beta1,
            beta2=o.beta2,
            eps=o.eps,
            weight_decay=o.weight_decay,
            clip_norm=o.clip_norm,
        )

    def finetune_hyper(self) -> LambHyper:
        f = self.finetune
        return LambHyper(
            peak_lr=f.peak_lr,
            warmup_steps=self.scaled(f.warmup_steps),
            beta1=self.optim.beta1,
            beta2=self.optim.beta2,
            eps=self.optim.eps,
            weight_decay=f.weight_decay,
            clip_norm=self.optim.clip_norm,
        )

    def sampler_config(self, mode: Optional[str] = None) -> SamplerConfig:
        s = self.sampler
        return SamplerConfig(
            kappa=s.kappa,
            temperature=s.temperature,
            percentile=s.percentile,
            mode=SamplerMode(mode or s.mode),
            n_samples=s.n_samples,
            regeneration=Regeneration(s.regeneration),
            return_temperature=s.return_temperature,
            return_percentile=s.return_percentile,
            action_percentile=s.action_percentile,
        )

    def train_settings(self, layout: Layout = Layout.DT) -> TrainSettings:
        t = self.train
        return TrainSettings(
            steps=self.scaled(t.steps),
            batch_size=self.scaled(t.batch_size),
            window=self.model.window,
            augment=self.augment,
            layout=layout,
            inclusive_returns=t.inclusive_returns,
            seed=self.seed,
            log_every=t.log_every,
            checkpoint_every=self.scaled(t.checkpoint_every),
        )

    def finetune_settings(self) -> FinetuneSettings:
        f = self.finetune
        steps = f.steps
        if steps is None:
            steps = max(1, round(self.train.steps * FINETUNE_STEP_RATIO))
        batch_size = f.batch_size
        if batch_size is None:
            batch_size = max(
                1, round(self.train.batch_size * FINETUNE_BATCH_RATIO))
        return FinetuneSettings(
            data_fraction=f.data_fraction,
            steps=self.scaled(steps),
            batch_size=self.scaled(batch_size),
            window=self.model.window,
            seed=self.seed,
            chunk_len=f.chunk_len,
        )

    def validate(self) -> None:
        """
        Check the values that OmegaConf can't check by type alone

        ## Raises

        * `MgdtConfigError`: the configuration is invalid
        """
        for game_id in [*self.games.train, *self.games.held_out]:
            games.get_spec(game_id)
        overlap = set(self.games.train) & set(self.games.held_out)
        if overlap:
            raise MgdtConfigError(
                f"Games can't be both trained on and held out: "
                f"{sorted(overlap)}"
            )
        if self.budget_scale <= 0:
            raise MgdtConfigError(
                f"budget_scale must be positive, got {self.budget_scale}")
        self.model_config()
        for name in self.eval.scaling_presets:
            self.model_config(name)
        self.lamb_hyper()
        self.finetune_hyper()
        self.train_settings()
        self.finetune_settings()
        try:
            self.sampler_config()
        except MgdtConfigError:
            raise
        except ValueError as e:
            # Bad sampler mode or value
            raise MgdtConfigError(str(e)) from None


def load_config(
    path: Optional['Path | str'] = None,
    overrides: Optional[dict[str, Any]] = None,
) -> RunConfig:
    """
    Load a configuration file on top of the defaults

    ## Raises

    * `MgdtConfigError`: the file has unknown keys, values of the wrong type,
      or invalid values
    """
    schema = OmegaConf.structured(RunConfig)
    try:
        layers = [schema]
        if path is not None:
            layers.append(OmegaConf.load(Path(path)))
        if overrides:
            layers.append(OmegaConf.create(overrides))
        merged = OmegaConf.merge(*layers)
        config = OmegaConf.to_object(merged)
    except OmegaConfBaseException as e:
        raise MgdtConfigError(f"Invalid configuration: {e}") from None
    except FileNotFoundError:
        raise MgdtConfigError(f"Configuration file '{path}' not found") \
            from None
    assert isinstance(config, RunConfig)
    config.validate()
    return config


def to_yaml(config: RunConfig) -> str:
    return OmegaConf.to_yaml(OmegaConf.structured(config))


def fingerprint(config: RunConfig) -> str:
    """
    Short hash identifying a resolved configuration
    """
    return hashlib.sha256(to_yaml(config).encode()).hexdigest()[:16]


def save_resolved(config: RunConfig, out_dir: 'Path | str') -> Path:
    path = Path(out_dir) / RESOLVED_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_yaml(config))
    log.info(f"Wrote resolved configuration to '{path}'")
    return path
