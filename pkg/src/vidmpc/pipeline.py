"""Dealing plaintext inputs and running a whole classification in-process."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .containers import load_tensor
from .errors import ShapeError
from .model import ModelSpec
from .nn import split_params
from .plan import DEFAULT_PLAN, NumericPlan
from .preproc import budget_for
from .prf import Keystream
from .ring import as_ring_array
from .session import LocalRun, run_local
from .sharing import deal_tensor, reconstruct_all
from .transport import Transcript
from .video import build_selection, pi_labelvideo


def to_ring(values: np.ndarray, plan: NumericPlan = DEFAULT_PLAN) -> np.ndarray:
    """Ring tensors pass through; real tensors are fixed-point encoded."""
    values = np.asarray(values)
    if values.dtype == np.uint64:
        return values
    if values.dtype.kind == "f":
        return plan.codec.encode_array(values)
    return as_ring_array(values)


def load_video(path, plan: NumericPlan = DEFAULT_PLAN) -> np.ndarray:
    video = to_ring(load_tensor(path), plan)
    if video.ndim != 4:
        raise ShapeError(f"{path}: video must be N x h x w x c, got dims {video.shape}")
    return video


def load_weights(path, model: ModelSpec, plan: NumericPlan = DEFAULT_PLAN) -> np.ndarray:
    flat = to_ring(load_tensor(path), plan).reshape(-1)
    if flat.size != model.n_params:
        raise ShapeError(f"{path}: {flat.size} weights, manifest needs {model.n_params}")
    return flat


def keystream_for(seed) -> Keystream:
    return Keystream.fresh() if seed is None else Keystream.from_seed(("deal", seed))


@dataclass
class LocalResult:
    label: int
    scores: np.ndarray  # ring words of the aggregated probability sums
    run: LocalRun

    @property
    def transcript(self) -> Transcript:
        return self.run.transcript


def classify_local(
    video: np.ndarray,
    indices,
    model: ModelSpec,
    weights: np.ndarray,
    *,
    seed=0,
    plan: NumericPlan = DEFAULT_PLAN,
    timeout: float = 120.0,
) -> LocalResult:
    """Deal ring-encoded inputs, run three loopback parties, reveal the label."""
    video = to_ring(video, plan)
    weights = to_ring(weights, plan).reshape(-1)
    if tuple(video.shape[1:]) != model.input_shape:
        raise ShapeError(f"video frames {video.shape[1:]} do not match model input {model.input_shape}")
    ks = keystream_for(seed)
    v_sh = deal_tensor(video, ks, "video")
    s_sh = deal_tensor(build_selection(indices, video.shape[0]), ks, "selection")
    w_sh = deal_tensor(weights, ks, "weights")
    budget = budget_for(model, video.shape, len(list(indices)), plan=plan)

    def party(ctx):
        i = ctx.party - 1
        return pi_labelvideo(ctx, v_sh[i], s_sh[i], model, split_params(model, w_sh[i]), return_scores=True)

    run = run_local(party, seed=seed, budget=budget, plan=plan, timeout=timeout)
    label = int(reconstruct_all([r[0] for r in run.results]).reshape(-1)[0])
    scores = reconstruct_all([r[1] for r in run.results])
    return LocalResult(label, scores, run)


def transcript_to_json(t: Transcript) -> list[list[int]]:
    return [[e.sender, e.receiver, e.round, e.byte_length] for e in t.entries]


def write_transcript(path, t: Transcript) -> None:
    Path(path).write_text(json.dumps(transcript_to_json(t)) + "\n")

