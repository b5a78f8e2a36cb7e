from .autodiff import GradientTape, backward, record
from .data import Dataset, load_idx, load_mnist_dir, write_idx
from .engine import BatchTape, backward_batch, forward_batch, realize_batch
from .grads import ParamGradients
from .train import EpochRecord, History, TrainConfig, evaluate, init_affine_snn, loss_and_grad, train

__all__ = [
    "BatchTape",
    "Dataset",
    "EpochRecord",
    "GradientTape",
    "History",
    "ParamGradients",
    "TrainConfig",
    "backward",
    "backward_batch",
    "evaluate",
    "forward_batch",
    "init_affine_snn",
    "load_idx",
    "load_mnist_dir",
    "loss_and_grad",
    "realize_batch",
    "record",
    "train",
    "write_idx",
]
