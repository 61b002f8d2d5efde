"""Small float64 neural-network kit: dense + LSTM layers, explicit backprop.

Only the fixed architectures the simulator needs are supported; there is no
autodiff graph. Forward passes return a cache that the matching backward
pass consumes.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .layers import DenseLayer, LstmLayer, LstmNetwork, Mlp
from .losses import huber, softmax_cross_entropy
from .optim import Adam, Sgd

__all__ = [
    "Adam",
    "DenseLayer",
    "LstmLayer",
    "LstmNetwork",
    "Mlp",
    "Sgd",
    "huber",
    "load_checkpoint",
    "save_checkpoint",
    "softmax_cross_entropy",
]
