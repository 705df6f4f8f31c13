"""Small plaintext instances used by the CLI, the benches and the tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ApproxSoftmax, Dense, Flatten, ModelSpec, random_weights, toy_model


@dataclass
class Instance:
    video: np.ndarray  # real-valued, N x h x w x c
    indices: list[int]  # 1-based
    model: ModelSpec
    weights: dict[str, np.ndarray]  # real-valued, per parameter name


def selection_demo() -> Instance:
    """Four 2x2 grey frames; frames 2 and 4 are bright in the top-left pixel.

    A single dense layer maps that pixel to class 5 and the bottom-right
    pixel to class 2, so picking frames 2 and 4 yields label 5 while picking
    1 and 3 yields label 2.
    """
    video = np.zeros((4, 2, 2, 1))
    video[[1, 3], 0, 0, 0] = [0.9, 0.8]
    video[[1, 3], 1, 1, 0] = [0.1, 0.2]
    video[[0, 2], 1, 1, 0] = [0.7, 0.6]
    video[[0, 2], 0, 0, 0] = [0.1, 0.05]
    model = ModelSpec(
        (2, 2, 1),
        7,
        (Flatten(), Dense(7, "fc.w", "fc.b"), ApproxSoftmax()),
    ).validate()
    w = np.zeros((4, 7))
    w[0, 5] = 2.0
    w[3, 2] = 2.0
    return Instance(video, [2, 4], model, {"fc.w": w, "fc.b": np.zeros(7)})


def random_instance(seed: int, *, frames: int = 8, selected: int = 4, model: ModelSpec | None = None) -> Instance:
    """Seeded random video and weights for ``model`` (the toy model by default)."""
    rng = np.random.default_rng(seed)
    model = model or toy_model()
    video = rng.uniform(0.0, 1.0, (frames, *model.input_shape))
    indices = sorted(int(i) + 1 for i in rng.choice(frames, size=selected, replace=False))
    return Instance(video, indices, model, random_weights(model, rng))
