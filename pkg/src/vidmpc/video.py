"""Oblivious frame selection and single-frame video classification."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import IntegrityError, ShapeError
from .model import ModelSpec
from .nn import pi_finfer
from .protocols import SessionContext, pi_argmax, pi_dmm
from .sharing import ShareTensor, reconstruct_all


def build_selection(b: Sequence[int], n_frames: int) -> np.ndarray:
    """One-hot selection matrix (len(b) x N) for 1-based frame numbers ``b``.

    Entries are raw ring 0/1, not fixed-point, so selection is exact.
    Duplicates are allowed and select the same frame twice.
    """
    if n_frames < 1:
        raise ValueError("video must have at least one frame")
    b = [int(i) for i in b]
    if not b:
        raise ValueError("select at least one frame")
    bad = [i for i in b if not 1 <= i <= n_frames]
    if bad:
        raise ValueError(f"frame indices {bad} outside 1..{n_frames}")
    sel = np.zeros((len(b), n_frames), dtype=np.uint64)
    sel[np.arange(len(b)), np.array(b) - 1] = 1
    return sel


def sampling_indices(n_frames: int, step: int, count: int | None = None) -> list[int]:
    """1, 1+d, 1+2d, ... (1-based) within the video, optionally capped."""
    idx = list(range(1, n_frames + 1, step))
    return idx if count is None else idx[:count]


def pi_fselect(ctx: SessionContext, video: ShareTensor, selection: ShareTensor) -> ShareTensor:
    """Gather the selected frames: reshape, one matrix product, reshape."""
    if video.first.ndim != 4:
        raise ShapeError(f"video must be N x h x w x c, got {video.shape}")
    n_frames, h, w, c = video.shape
    if selection.first.ndim != 2 or selection.shape[1] != n_frames:
        raise ShapeError(f"selection {selection.shape} does not match {n_frames} frames")
    flat = video.reshape(n_frames, h * w * c)
    picked = pi_dmm(ctx, selection, flat)
    return picked.reshape(selection.shape[0], h, w, c)


def sum_scores(per_frame: Sequence[ShareTensor]) -> ShareTensor:
    prob_sum = per_frame[0]
    for sm in per_frame[1:]:
        prob_sum = prob_sum + sm
    return prob_sum


def aggregate_label(ctx: SessionContext, per_frame: Sequence[ShareTensor]) -> ShareTensor:
    """Argmax of the index-wise sum of per-frame probability vectors."""
    return pi_argmax(ctx, sum_scores(per_frame))


def pi_labelvideo(
    ctx: SessionContext,
    video: ShareTensor,
    selection: ShareTensor,
    model: ModelSpec,
    params: dict[str, ShareTensor],
    *,
    return_scores: bool = False,
):
    """Shared class label of the video; optionally also the shared score sums."""
    frames = pi_fselect(ctx, video, selection)
    per_frame = [pi_finfer(ctx, model, params, frames[j]) for j in range(frames.shape[0])]
    prob_sum = sum_scores(per_frame)
    label = pi_argmax(ctx, prob_sum)
    return (label, prob_sum) if return_scores else label


def reveal_label(shares: Sequence[ShareTensor]) -> int:
    """Alice's side: combine the servers' label shares, checking every overlap."""
    value = reconstruct_all(shares).reshape(-1)
    if value.size != 1:
        raise IntegrityError(f"label share holds {value.size} values")
    return int(value[0])
