"""Single-image super-resolution with dilated-convolution inception modules."""
from .model import MSSRNet, NetConfig, build_network, forward, backward, predict_hr, parameter_count, receptive_field
from .optim import Adam, learning_rate_for_epoch
from .weights import load_weights, save_weights

__all__ = [
    "MSSRNet",
    "NetConfig",
    "build_network",
    "forward",
    "backward",
    "predict_hr",
    "parameter_count",
    "receptive_field",
    "Adam",
    "learning_rate_for_epoch",
    "load_weights",
    "save_weights",
]
