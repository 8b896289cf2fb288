"""From-scratch dense networks: layers, Adam, training, gradient checking."""

from .artifact import ModelArtifact
from .gradcheck import GradCheckReport, default_check_archs, grad_check
from .layers import BatchNorm, Dense, ResidualBlock, SiLU, mse, mse_grad, silu
from .network import ArchSpec, Network
from .optim import AdamState, adam_step
from .training import TrainConfig, evaluate_mse, forward, predict_sequence, train

__all__ = [
    "AdamState", "ArchSpec", "BatchNorm", "Dense", "GradCheckReport", "ModelArtifact",
    "Network", "ResidualBlock", "SiLU", "TrainConfig", "adam_step", "default_check_archs",
    "evaluate_mse", "forward", "grad_check", "mse", "mse_grad", "predict_sequence", "silu", "train",
]
