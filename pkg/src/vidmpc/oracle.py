"""Plaintext reference for the whole pipeline.

``oracle_classify`` runs the same fixed-point plan as the secure path
(same truncation points, same division steps) on int64 words, using an
exact floor shift wherever the secure path truncates. The secure
truncation may land one unit above the floor, so the two agree to within
a few ULPs rather than bit-for-bit.

``oracle_float_classify`` is a float64 shadow used to measure quantisation
error.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ShapeError
from .model import ApproxSoftmax, AvgPool, Conv2D, Dense, Flatten, ModelSpec, ReLU
from .nn import im2col
from .plan import DEFAULT_PLAN, NumericPlan
from .ring import as_ring_array, signed_view
from .video import build_selection


def _i64(x) -> np.ndarray:
    return signed_view(as_ring_array(np.asarray(x)))


def trunc(x: np.ndarray, shift: int) -> np.ndarray:
    return x >> np.int64(shift)


def conv2d(frame, kernel, bias, stride=1, pad=0, plan: NumericPlan = DEFAULT_PLAN) -> np.ndarray:
    kh, kw, cin, cout = kernel.shape
    h, w, _ = frame.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    acc = im2col(frame, kh, kw, stride, pad) @ kernel.reshape(kh * kw * cin, cout)
    return (trunc(acc, plan.frac_bits) + bias).reshape(oh, ow, cout)


def avgpool(fmap, ph, pw, plan: NumericPlan = DEFAULT_PLAN) -> np.ndarray:
    h, w, c = fmap.shape
    summed = fmap.reshape(h // ph, ph, w // pw, pw, c).sum(axis=(1, 3))
    return trunc(summed * np.int64(plan.codec.encode(1.0 / (ph * pw))), plan.frac_bits)


def dense(x, weights, bias, plan: NumericPlan = DEFAULT_PLAN) -> np.ndarray:
    return trunc(x.reshape(1, -1) @ weights, plan.frac_bits).reshape(-1) + bias


def relu(x) -> np.ndarray:
    return np.where(x > 0, x, np.int64(0))


def fpmul(x, y, plan: NumericPlan = DEFAULT_PLAN) -> np.ndarray:
    return trunc(x * y, plan.frac_bits)


def div(num, den, plan: NumericPlan = DEFAULT_PLAN) -> np.ndarray:
    """Mirror of the secure division plan on plaintext words."""
    num = np.asarray(num, dtype=np.int64)
    den = np.asarray(den, dtype=np.int64)
    k, j = plan.div_norm_bits, plan.div_thresholds
    exps = np.arange(1, j + 1, dtype=np.int64)
    at_least = (den[..., None] >= (np.int64(1) << exps)).astype(np.int64)
    factor = (np.int64(1) << np.int64(k - 1)) - (at_least * (np.int64(1) << (k - 1 - exps))).sum(axis=-1)
    d_norm = trunc(den * factor, plan.div_norm_shift)
    w = np.int64(plan.codec.encode(plan.div_initial_offset)) - 2 * d_norm
    two = np.int64(plan.codec.encode(2.0))
    for _ in range(plan.div_iterations):
        e = fpmul(d_norm, w, plan)
        w = fpmul(w, two - e, plan)
    scaled = trunc(num * factor, plan.div_norm_shift)
    return fpmul(scaled, w, plan)


def approx_softmax(logits, plan: NumericPlan = DEFAULT_PLAN) -> np.ndarray:
    """Fixed-point mirror of the secure approximate softmax over the last axis."""
    logits = np.asarray(logits, dtype=np.int64)
    rows = logits.reshape(-1, logits.shape[-1])
    x = relu(rows)
    s = x.sum(axis=1)
    cn = (s > 0).astype(np.int64)
    denom = cn * s + (1 - cn) * np.int64(plan.codec.encode(rows.shape[1]))
    inv = div(np.full(len(rows), plan.codec.one, dtype=np.int64), denom, plan)
    numer = cn[:, None] * x + (1 - cn[:, None]) * np.int64(plan.codec.one)
    return fpmul(numer, inv[:, None], plan).reshape(logits.shape)


def finfer(model: ModelSpec, params: dict[str, np.ndarray], frame, plan: NumericPlan = DEFAULT_PLAN) -> np.ndarray:
    x = _i64(frame)
    p = {k: _i64(v) for k, v in params.items()}
    with np.errstate(over="ignore"):
        for layer in model.layers:
            if isinstance(layer, Conv2D):
                x = conv2d(x, p[layer.weights], p[layer.bias], layer.stride, layer.pad, plan)
            elif isinstance(layer, ReLU):
                x = relu(x)
            elif isinstance(layer, AvgPool):
                x = avgpool(x, layer.ph, layer.pw, plan)
            elif isinstance(layer, Flatten):
                x = x.reshape(-1)
            elif isinstance(layer, Dense):
                x = dense(x, p[layer.weights], p[layer.bias], plan)
            elif isinstance(layer, ApproxSoftmax):
                x = approx_softmax(x, plan)
    return x.reshape(-1)


def select_frames(video, b: Sequence[int]) -> np.ndarray:
    video = _i64(video)
    sel = build_selection(b, video.shape[0]).view(np.int64)
    n, h, w, c = video.shape
    return (sel @ video.reshape(n, h * w * c)).reshape(len(b), h, w, c)


def _check_shapes(video_shape, model: ModelSpec, params) -> None:
    if len(video_shape) != 4 or tuple(video_shape[1:]) != model.input_shape:
        raise ShapeError(f"video {tuple(video_shape)} does not match model input {model.input_shape}")
    for name, shape in model.param_specs():
        if name not in params or np.shape(params[name]) != shape:
            raise ShapeError(f"parameter {name!r} missing or not of shape {shape}")


def oracle_classify(video, b: Sequence[int], model: ModelSpec, params: dict[str, np.ndarray], plan: NumericPlan = DEFAULT_PLAN):
    """(label, prob_sums) for ring-encoded video/params; ``b`` is 1-based."""
    _check_shapes(np.shape(video), model, params)
    frames = select_frames(video, b)
    with np.errstate(over="ignore"):
        sums = sum(finfer(model, params, f, plan) for f in frames)
    return int(np.argmax(sums)), np.asarray(sums, dtype=np.int64)


# ---------------------------------------------------------------------------
# float shadow


def float_finfer(model: ModelSpec, params, x: np.ndarray) -> np.ndarray:
    """Per-frame forward pass in float64 on real-valued parameters."""
    x = np.asarray(x, dtype=np.float64)
    for layer in model.layers:
        if isinstance(layer, Conv2D):
            kh, kw, cin, cout = params[layer.weights].shape
            h, w, _ = x.shape
            oh = (h + 2 * layer.pad - kh) // layer.stride + 1
            ow = (w + 2 * layer.pad - kw) // layer.stride + 1
            x = (im2col(x, kh, kw, layer.stride, layer.pad) @ params[layer.weights].reshape(-1, cout)).reshape(oh, ow, cout)
            x = x + params[layer.bias]
        elif isinstance(layer, ReLU):
            x = np.maximum(x, 0.0)
        elif isinstance(layer, AvgPool):
            h, w, c = x.shape
            x = x.reshape(h // layer.ph, layer.ph, w // layer.pw, layer.pw, c).mean(axis=(1, 3))
        elif isinstance(layer, Flatten):
            x = x.reshape(-1)
        elif isinstance(layer, Dense):
            x = x.reshape(-1) @ params[layer.weights] + params[layer.bias]
        elif isinstance(layer, ApproxSoftmax):
            x = approx_softmax_float(x)
    return x.reshape(-1)


def approx_softmax_float(logits) -> np.ndarray:
    r = np.maximum(np.asarray(logits, dtype=np.float64), 0.0)
    s = r.sum(axis=-1, keepdims=True)
    uniform = np.full_like(r, 1.0 / r.shape[-1])
    return np.where(s > 0, r / np.where(s > 0, s, 1.0), uniform)


def oracle_float_classify(video, b: Sequence[int], model: ModelSpec, params: dict[str, np.ndarray]):
    """Same pipeline in float64 on real-valued video/params."""
    video = np.asarray(video, dtype=np.float64)
    _check_shapes(video.shape, model, params)
    build_selection(b, video.shape[0])
    sums = sum(float_finfer(model, params, video[i - 1]) for i in b)
    return int(np.argmax(sums)), np.asarray(sums)
