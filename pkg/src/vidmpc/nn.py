"""Secure evaluation of an MPC-friendly ConvNet on one secret-shared frame.

Products ride on batched matrix multiplication (convolution is lowered with
im2col); each output element is truncated once, after accumulation. Bias
addition is local.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .model import ApproxSoftmax, AvgPool, Conv2D, Dense, Flatten, ModelSpec, ReLU
from .protocols import (
    SessionContext,
    mul_bit,
    one_minus,
    pi_div,
    pi_dmm,
    pi_fpmul,
    pi_lt,
    pi_relu,
    pi_trunc,
)
from .sharing import ShareTensor


def im2col(x: np.ndarray, kh: int, kw: int, stride: int = 1, pad: int = 0) -> np.ndarray:
    """(h, w, c) -> (oh*ow, kh*kw*c) patch matrix, patch order (kh, kw, c)."""
    if pad:
        x = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(0, 1))[::stride, ::stride]
    oh, ow, c = win.shape[:3]
    return win.transpose(0, 1, 3, 4, 2).reshape(oh * ow, kh * kw * c)


def conv_output_hw(h: int, w: int, kh: int, kw: int, stride: int, pad: int) -> tuple[int, int]:
    return (h + 2 * pad - kh) // stride + 1, (w + 2 * pad - kw) // stride + 1


def secure_conv2d(
    ctx: SessionContext,
    frame: ShareTensor,
    kernel: ShareTensor,
    bias: ShareTensor,
    stride: int = 1,
    pad: int = 0,
) -> ShareTensor:
    if frame.first.ndim != 3 or kernel.first.ndim != 4 or kernel.shape[2] != frame.shape[2]:
        raise ShapeError(f"conv2d: frame {frame.shape} incompatible with kernel {kernel.shape}")
    kh, kw, cin, cout = kernel.shape
    if bias.shape != (cout,):
        raise ShapeError(f"conv2d: bias {bias.shape} does not match {cout} output channels")
    h, w, _ = frame.shape
    oh, ow = conv_output_hw(h, w, kh, kw, stride, pad)
    cols = ShareTensor(
        im2col(frame.first, kh, kw, stride, pad), im2col(frame.second, kh, kw, stride, pad), frame.holder
    )
    out = pi_trunc(ctx, pi_dmm(ctx, cols, kernel.reshape(kh * kw * cin, cout)))
    return (out + bias.reshape(1, cout).broadcast_to(out.shape)).reshape(oh, ow, cout)


def secure_avgpool(ctx: SessionContext, fmap: ShareTensor, ph: int, pw: int) -> ShareTensor:
    h, w, c = fmap.shape
    if h % ph or w % pw:
        raise ShapeError(f"avgpool {ph}x{pw} does not divide {fmap.shape}")
    windows = fmap.reshape(h // ph, ph, w // pw, pw, c)
    summed = ShareTensor(
        windows.first.sum(axis=(1, 3), dtype=np.uint64),
        windows.second.sum(axis=(1, 3), dtype=np.uint64),
        fmap.holder,
    )
    return pi_trunc(ctx, summed.mul_public(ctx.codec.encode(1.0 / (ph * pw))))


def secure_dense(ctx: SessionContext, x: ShareTensor, weights: ShareTensor, bias: ShareTensor) -> ShareTensor:
    x = x.reshape(1, -1)
    if weights.first.ndim != 2 or weights.shape[0] != x.shape[1] or bias.shape != (weights.shape[1],):
        raise ShapeError(f"dense: input {x.shape}, weights {weights.shape}, bias {bias.shape}")
    out = pi_trunc(ctx, pi_dmm(ctx, x, weights)).reshape(-1)
    return out + bias


def pi_soft(ctx: SessionContext, logits: ShareTensor) -> ShareTensor:
    """Approximate softmax: RELU(u_i) / sum_j RELU(u_j), or 1/C if that sum is 0.

    Follows the branch-free recipe: cn = [0 < sum], denominator and
    numerators chosen with cn, one secure division for the shared reciprocal.
    The last axis holds the classes; leading axes are independent rows.
    """
    shape = logits.shape
    classes = shape[-1]
    rows = logits.reshape(-1, classes)
    x_relu = pi_relu(ctx, rows)
    sum_relu = x_relu.sum(axis=1)
    cn = pi_lt(ctx, ctx.public(0, sum_relu.shape), sum_relu)
    not_cn = one_minus(ctx, cn)
    denom = mul_bit(ctx, cn, sum_relu) + not_cn.mul_public(ctx.codec.encode(classes))
    denom_inv = pi_div(ctx, ctx.public_fixed(1.0, denom.shape), denom)

    def per_row(v: ShareTensor) -> ShareTensor:
        return v.reshape(-1, 1).broadcast_to(rows.shape)

    numer = mul_bit(ctx, per_row(cn), x_relu) + per_row(not_cn).mul_public(ctx.codec.one)
    return pi_fpmul(ctx, numer, per_row(denom_inv)).reshape(shape)


def apply_layer(ctx: SessionContext, layer, x: ShareTensor, params: dict[str, ShareTensor]) -> ShareTensor:
    if isinstance(layer, Conv2D):
        return secure_conv2d(ctx, x, params[layer.weights], params[layer.bias], layer.stride, layer.pad)
    if isinstance(layer, ReLU):
        return pi_relu(ctx, x)
    if isinstance(layer, AvgPool):
        return secure_avgpool(ctx, x, layer.ph, layer.pw)
    if isinstance(layer, Flatten):
        return x.reshape(-1)
    if isinstance(layer, Dense):
        return secure_dense(ctx, x, params[layer.weights], params[layer.bias])
    if isinstance(layer, ApproxSoftmax):
        return pi_soft(ctx, x)
    raise ShapeError(f"unsupported layer {layer!r}")


def pi_finfer(ctx: SessionContext, model: ModelSpec, params: dict[str, ShareTensor], frame: ShareTensor) -> ShareTensor:
    """Probability vector (length C, fixed-point) for one shared frame."""
    if frame.shape != model.input_shape:
        raise ShapeError(f"frame {frame.shape} does not match model input {model.input_shape}")
    x = frame
    for layer in model.layers:
        x = apply_layer(ctx, layer, x, params)
    return x.reshape(-1)


def split_params(model: ModelSpec, flat: ShareTensor) -> dict[str, ShareTensor]:
    """Per-layer parameter views of a party's flat weight share."""
    firsts = model.split_flat(flat.first)
    seconds = model.split_flat(flat.second)
    return {name: ShareTensor(firsts[name], seconds[name], flat.holder) for name in firsts}
