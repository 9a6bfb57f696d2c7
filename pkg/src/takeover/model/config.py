from __future__ import annotations

from dataclasses import asdict, dataclass

BASELINE = "baseline"
INDEPENDENT = "independent"
BASELINE_MM = "baseline_mm"
INDEPENDENT_MM = "independent_mm"
VARIANTS = (BASELINE, INDEPENDENT, BASELINE_MM, INDEPENDENT_MM)

_ALIASES = {
    "baselinelstm": BASELINE,
    "lstm": BASELINE,
    "independentlstms": INDEPENDENT,
    "idlstms": INDEPENDENT,
    "baselinelstm_mm": BASELINE_MM,
    "lstm_mm": BASELINE_MM,
    "independentlstms_mm": INDEPENDENT_MM,
    "idlstms_mm": INDEPENDENT_MM,
}


def canonical_variant(name: str) -> str:
    key = name.strip().lower().replace("-", "_").replace("+", "_").replace(" ", "")
    key = _ALIASES.get(key, key)
    if key not in VARIANTS:
        raise ValueError(f"unknown model variant {name!r}; choose from {', '.join(VARIANTS)}")
    return key


@dataclass(frozen=True)
class ModelConfig:
    variant: str = INDEPENDENT
    input_dim: int = 41
    hidden_dim: int = 64
    num_modes: int = 3
    window_frames: int = 60
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", canonical_variant(self.variant))
        if self.hidden_dim < 1 or self.input_dim < 1:
            raise ValueError("hidden_dim and input_dim must be >= 1")
        if self.multimodal and self.num_modes < 2:
            raise ValueError("multimodal variants need num_modes >= 2")
        if self.window_frames < 1:
            raise ValueError("window_frames must be >= 1")

    @property
    def multimodal(self) -> bool:
        return self.variant in (BASELINE_MM, INDEPENDENT_MM)

    @property
    def n_cells(self) -> int:
        return 3 if self.variant in (INDEPENDENT, INDEPENDENT_MM) else 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 10
    batch_size: int = 64
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    # arithmetic used inside the training loop; parameters are stored as float64
    precision: str = "float32"

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.lr <= 0:
            raise ValueError("epochs >= 0, batch_size >= 1 and lr > 0 required")
        if self.precision not in ("float32", "float64"):
            raise ValueError(f"precision must be float32 or float64, got {self.precision!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)
