"""Three-party honest-majority MPC for private single-frame video classification."""

from .model import ModelSpec, full_model, toy_model
from .oracle import oracle_classify
from .pipeline import classify_local
from .ring import FixedPointCodec, decode, encode
from .sharing import ReplicatedShare, ShareTensor, deal, reconstruct

__all__ = [
    "FixedPointCodec",
    "ModelSpec",
    "ReplicatedShare",
    "ShareTensor",
    "classify_local",
    "deal",
    "decode",
    "encode",
    "oracle_classify",
    "full_model",
    "reconstruct",
    "toy_model",
]

__version__ = "0.1.0"
