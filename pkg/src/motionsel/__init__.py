"""Single-clip video frame prediction with a selector-modulated encoder-decoder."""

from .model import VARIANTS, DualNet
from .selector import SelectorConfig, SelectorNet, active_channels
from .trainer import TrainConfig, Trainer
from .transformer import TransformerConfig, TransformerNet

__version__ = "0.1.0"

__all__ = ["DualNet", "SelectorConfig", "SelectorNet", "TrainConfig", "Trainer",
           "TransformerConfig", "TransformerNet", "VARIANTS", "active_channels"]
