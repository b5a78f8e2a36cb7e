import numpy as np


def mse(pred: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample squared error summed over output coordinates, and its gradient."""
    diff = pred - np.asarray(target, dtype=np.float64).reshape(pred.shape)
    return np.sum(diff**2, axis=1), 2.0 * diff


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy(logits: np.ndarray, labels) -> tuple[np.ndarray, np.ndarray]:
    """Softmax cross-entropy on raw decoder outputs; ``labels`` are class ids."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    lsm = log_softmax(logits)
    idx = np.arange(len(labels))
    grad = np.exp(lsm)
    grad[idx, labels] -= 1.0
    return -lsm[idx, labels], grad


LOSSES = {"mse": mse, "cross_entropy": cross_entropy}
