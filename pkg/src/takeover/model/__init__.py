from .adam import Adam
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import BASELINE, BASELINE_MM, INDEPENDENT, INDEPENDENT_MM, VARIANTS, ModelConfig, TrainConfig
from .losses import VariantMismatchError, loss_l1, loss_min_of_k
from .lstm import NumericError, lstm_cell_step
from .network import ORI, TOT, Model, Prediction, forward, init_model, loss_and_grad, loss_value, predict_ori
from .train import History, pretrain_ori, train, transfer

__all__ = [
    "Adam",
    "BASELINE",
    "BASELINE_MM",
    "CheckpointError",
    "History",
    "INDEPENDENT",
    "INDEPENDENT_MM",
    "Model",
    "ModelConfig",
    "NumericError",
    "ORI",
    "Prediction",
    "TOT",
    "TrainConfig",
    "VARIANTS",
    "VariantMismatchError",
    "forward",
    "init_model",
    "load_checkpoint",
    "loss_and_grad",
    "loss_l1",
    "loss_min_of_k",
    "loss_value",
    "lstm_cell_step",
    "predict_ori",
    "pretrain_ori",
    "save_checkpoint",
    "train",
    "transfer",
]
