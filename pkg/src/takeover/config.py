"""Experiment configuration: one JSON document that drives every CLI command."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .dataset import SynthConfig
from .dataset.splits import DEFAULT_RATIOS
from .decision import DEFAULT_EPSILON_S, MOST_PROBABLE, canonical_policy
from .features import ABLATION_LABELS, FeatureMask
from .model import ModelConfig, TrainConfig

REPORT_DIR_ENV = "TAKEOVER_REPORT_DIR"


@dataclass
class Paths:
    events: str = "data/events.jsonl.gz"
    checkpoints: str = "checkpoints"
    reports: str = "reports"


@dataclass
class SplitSpec:
    ratios: tuple = DEFAULT_RATIOS
    seed: int = 0

    def __post_init__(self):
        self.ratios = tuple(float(r) for r in self.ratios)
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios) or abs(sum(self.ratios) - 1) > 1e-9:
            raise ValueError(f"split ratios must be three non-negative numbers summing to 1, got {self.ratios}")


@dataclass
class DecisionDefaults:
    epsilon_s: float = DEFAULT_EPSILON_S
    policy: str = MOST_PROBABLE
    stride: int = 1

    def __post_init__(self):
        self.policy = canonical_policy(self.policy)
        if self.epsilon_s < 0 or self.stride < 1:
            raise ValueError("epsilon_s must be >= 0 and stride >= 1")


@dataclass
class ExperimentConfig:
    paths: Paths = field(default_factory=Paths)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    mask: str = "FGHSO"
    split: SplitSpec = field(default_factory=SplitSpec)
    synth: SynthConfig = field(default_factory=SynthConfig)
    decision: DecisionDefaults = field(default_factory=DecisionDefaults)
    ablation_masks: tuple = ABLATION_LABELS
    sweep_fractions: tuple = (0.75, 0.9, 1.0)
    seeds: tuple = (0,)
    seed: int = 0

    def __post_init__(self):
        self.mask = FeatureMask.from_label(self.mask).label
        self.ablation_masks = tuple(FeatureMask.from_label(m).label for m in self.ablation_masks)
        self.sweep_fractions = tuple(float(f) for f in self.sweep_fractions)
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("seeds must not be empty")

    @property
    def feature_mask(self) -> FeatureMask:
        return FeatureMask.from_label(self.mask)

    def report_dir(self) -> Path:
        """Report directory, overridden by the ``TAKEOVER_REPORT_DIR`` environment variable."""
        return Path(os.environ.get(REPORT_DIR_ENV) or self.paths.reports)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("ablation_masks", "sweep_fractions", "seeds"):
            d[k] = list(d[k])
        d["split"]["ratios"] = list(d["split"]["ratios"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub = {
            "paths": Paths,
            "model": ModelConfig,
            "train": TrainConfig,
            "split": SplitSpec,
            "synth": SynthConfig,
            "decision": DecisionDefaults,
        }
        kw = {}
        for k, v in d.items():
            if k in sub:
                try:
                    kw[k] = sub[k](**v)
                except TypeError as exc:
                    raise ValueError(f"bad '{k}' section: {exc}") from None
            else:
                kw[k] = v
        return cls(**kw)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None
        return cls.from_dict(d)
