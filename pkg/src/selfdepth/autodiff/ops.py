"""Differentiable operations on Tensors.

Every function builds its result with ``make_op`` so that gradients flow
back through ``backward``. Shapes are validated eagerly; incompatible
operands raise ``ShapeError`` with the offending extents in the message.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import ShapeError, Tensor, as_tensor, make_op


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape``, undoing numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise arithmetic ---------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_op(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
                   "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_op(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
                   "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_op(a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape),
                              _unbroadcast(g * a.data, b.shape)),
                   "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def backward(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * out / b.data, b.shape))

    return make_op(out, (a, b), backward, "div")


def power(x, exponent: float) -> Tensor:
    x = as_tensor(x)
    p = float(exponent)
    out = x.data ** p
    return make_op(out, (x,), lambda g: (g * p * x.data ** (p - 1.0),), "power")


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    out = np.sqrt(x.data)
    return make_op(out, (x,), lambda g: (g / (2.0 * out),), "sqrt")


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return make_op(out, (x,), lambda g: (g * out,), "exp")


def absolute(x) -> Tensor:
    x = as_tensor(x)
    return make_op(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),), "abs")


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    # split by sign so exp never overflows
    out = np.where(x.data >= 0,
                   1.0 / (1.0 + np.exp(-np.abs(x.data))),
                   np.exp(-np.abs(x.data)) / (1.0 + np.exp(-np.abs(x.data))))
    return make_op(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def relu(x) -> Tensor:
    x = as_tensor(x)
    return make_op(np.maximum(x.data, 0), (x,),
                   lambda g: (g * (x.data > 0),), "relu")


def elu(x) -> Tensor:
    x = as_tensor(x)
    neg = np.expm1(np.minimum(x.data, 0))
    out = np.where(x.data > 0, x.data, neg)
    return make_op(out, (x,),
                   lambda g: (g * np.where(x.data > 0, 1.0, neg + 1.0),), "elu")


_ACTIVATIONS = {"relu": relu, "elu": elu, "sigmoid": sigmoid}


def activation(x, mode: str) -> Tensor:
    """Elementwise nonlinearity; ``mode`` is one of relu, elu, sigmoid."""
    try:
        fn = _ACTIVATIONS[mode]
    except KeyError:
        raise ValueError(f"unknown activation mode {mode!r}, "
                         f"expected one of {sorted(_ACTIVATIONS)}") from None
    return fn(x)


def clamp_min(x, low: float) -> Tensor:
    """max(x, low) elementwise; gradient passes where x >= low."""
    x = as_tensor(x)
    return make_op(np.maximum(x.data, low), (x,),
                   lambda g: (g * (x.data >= low),), "clamp_min")


def elementwise_min(a, b) -> Tensor:
    """Per-element minimum; on exact ties the gradient goes to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"elementwise_min requires equal shapes, got {a.shape} vs {b.shape}")
    first = a.data <= b.data
    return make_op(np.where(first, a.data, b.data), (a, b),
                   lambda g: (g * first, g * (~first)), "elementwise_min")


def masked_fill(x, keep: np.ndarray, fill: float) -> Tensor:
    """Keep x where ``keep`` is true, otherwise the constant ``fill``."""
    x = as_tensor(x)
    keep = np.asarray(keep, dtype=bool)
    if keep.shape != x.shape:
        raise ShapeError(f"mask shape {keep.shape} does not match tensor shape {x.shape}")
    return make_op(np.where(keep, x.data, np.asarray(fill, dtype=x.dtype)), (x,),
                   lambda g: (g * keep,), "masked_fill")


# -- reductions ---------------------------------------------------------------

def _normalize_axes(axes, ndim: int) -> tuple[int, ...]:
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    normalized = []
    for ax in axes:
        if not -ndim <= ax < ndim:
            raise ShapeError(f"axis {ax} out of range for {ndim}-d tensor")
        normalized.append(ax % ndim)
    if len(set(normalized)) != len(normalized):
        raise ShapeError(f"duplicate axes in {axes}")
    return tuple(normalized)


def reduce_sum(x, axes=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _normalize_axes(axes, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = g.reshape([1 if i in axes else s for i, s in enumerate(x.shape)])
        return (np.broadcast_to(g, x.shape).copy(),)

    return make_op(np.asarray(out), (x,), backward, "reduce_sum")


def reduce_mean(x, axes=None, keepdims: bool = False) -> Tensor:
    """Arithmetic mean over ``axes``; gradient is a uniform 1/n fan-out."""
    x = as_tensor(x)
    axes = _normalize_axes(axes, x.ndim)
    n = int(np.prod([x.shape[i] for i in axes])) if axes else 1
    if n == 0:
        raise ShapeError(f"mean over an empty reduction (shape {x.shape}, axes {axes})")
    out = x.data.mean(axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = g.reshape([1 if i in axes else s for i, s in enumerate(x.shape)])
        return (np.broadcast_to(g / n, x.shape).copy(),)

    return make_op(np.asarray(out), (x,), backward, "reduce_mean")


# -- shape manipulation -------------------------------------------------------

def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out = x.data.reshape(shape)
    return make_op(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x, axes) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_op(np.transpose(x.data, axes), (x,),
                   lambda g: (np.transpose(g, inverse),), "transpose")


def _is_basic_index(key) -> bool:
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(p, (int, slice, type(None), type(Ellipsis))) for p in parts)


def getitem(x, key) -> Tensor:
    x = as_tensor(x)
    out = np.asarray(x.data[key])

    def backward(g):
        buf = np.zeros_like(x.data)
        if _is_basic_index(key):
            buf[key] += g
        else:
            np.add.at(buf, key, g)
        return (buf,)

    return make_op(out, (x,), backward, "getitem")


def concat(tensors, axis: int) -> Tensor:
    """Join tensors along an existing axis; gradients route back per slice."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of an empty list")
    ndim = tensors[0].ndim
    axis = _normalize_axes(axis, ndim)[0]
    base = list(tensors[0].shape)
    for t in tensors[1:]:
        other = list(t.shape)
        if len(other) != ndim or any(o != b for i, (o, b) in enumerate(zip(other, base)) if i != axis):
            raise ShapeError(f"ragged shapes in concat along axis {axis}: "
                             f"{[t.shape for t in tensors]}")
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return make_op(np.concatenate([t.data for t in tensors], axis=axis),
                   tensors, backward, "concat")


def stack(tensors, axis: int = 0) -> Tensor:
    """Stack equally-shaped tensors along a new axis."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("stack of an empty list")
    shape = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != shape:
            raise ShapeError(f"ragged shapes in stack: {[t.shape for t in tensors]}")

    def backward(g):
        moved = np.moveaxis(g, axis, 0)
        return tuple(moved[i] for i in range(len(tensors)))

    return make_op(np.stack([t.data for t in tensors], axis=axis),
                   tensors, backward, "stack")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul expects 2-d operands with matching inner "
                         f"extents, got {a.shape} @ {b.shape}")
    return make_op(a.data @ b.data, (a, b),
                   lambda g: (g @ b.data.T, a.data.T @ g), "matmul")


# -- convolution --------------------------------------------------------------

def _conv_out_extent(extent: int, k: int, stride: int, padding: int) -> int:
    return (extent + 2 * padding - k) // stride + 1


def _check_conv(name, in_shape, k_shape, nsp, stride, padding):
    if stride < 1:
        raise ShapeError(f"{name}: stride must be >= 1, got {stride}")
    if padding < 0:
        raise ShapeError(f"{name}: padding must be >= 0, got {padding}")
    if in_shape[1] != k_shape[1]:
        raise ShapeError(f"{name}: input has {in_shape[1]} channels but kernel "
                         f"expects {k_shape[1]} (input {in_shape}, kernel {k_shape})")
    for d in range(nsp):
        if k_shape[2 + d] > in_shape[2 + d] + 2 * padding:
            raise ShapeError(f"{name}: kernel extent {k_shape[2 + d]} exceeds padded "
                             f"input extent {in_shape[2 + d] + 2 * padding} on axis {d}")


def conv2d(x, kernel, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-d cross-correlation of [B,C,H,W] with [F,C,kh,kw], zero padding."""
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.ndim != 4 or kernel.ndim != 4:
        raise ShapeError(f"conv2d expects 4-d input and kernel, got {x.shape} and {kernel.shape}")
    _check_conv("conv2d", x.shape, kernel.shape, 2, stride, padding)
    B, C, H, W = x.shape
    F, _, kh, kw = kernel.shape
    Ho = _conv_out_extent(H, kh, stride, padding)
    Wo = _conv_out_extent(W, kw, stride, padding)
    pad = ((0, 0), (0, 0), (padding, padding), (padding, padding))
    xp = np.pad(x.data, pad)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    win = win[:, :, :Ho, :Wo]
    out = np.einsum("bchwkl,fckl->bfhw", win, kernel.data, optimize=True)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (F,):
            raise ShapeError(f"conv2d: bias shape {bias.shape} does not match {F} filters")
        out = out + bias.data[None, :, None, None]
    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def backward(g):
        # tensordot instead of einsum: the window view is strided, which
        # forces einsum off the BLAS path
        dk = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))
        dxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                # output (h, w) reads xp[h*stride + i, w*stride + j]
                part = np.tensordot(g, kernel.data[:, :, i, j], axes=([1], [0]))
                dxp[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += \
                    np.moveaxis(part, 3, 1)
        dx = dxp[:, :, padding:padding + H, padding:padding + W]
        if bias is None:
            return (dx, dk)
        return (dx, dk, g.sum(axis=(0, 2, 3)))

    return make_op(out, parents, backward, "conv2d")


def conv3d(x, kernel, bias=None, stride: int = 1, padding: int = 0,
           padding_depth: int | None = None) -> Tensor:
    """3-d cross-correlation of [B,C,D,H,W] with [F,C,kd,kh,kw], zero padding.

    ``padding`` applies to all three axes; ``padding_depth`` overrides the
    depth axis (e.g. 0 so a kd=2 kernel collapses a 2-deep volume while the
    spatial axes stay padded).
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.ndim != 5 or kernel.ndim != 5:
        raise ShapeError(f"conv3d expects 5-d input and kernel, got {x.shape} and {kernel.shape}")
    if x.shape[1] != kernel.shape[1]:
        raise ShapeError(f"conv3d: input has {x.shape[1]} channels but kernel "
                         f"expects {kernel.shape[1]}")
    pd = padding if padding_depth is None else padding_depth
    if stride < 1 or padding < 0 or pd < 0:
        raise ShapeError(f"conv3d: invalid stride {stride} or padding {padding}/{pd}")
    B, C, D, H, W = x.shape
    F, _, kd, kh, kw = kernel.shape
    if kd > D + 2 * pd:
        raise ShapeError(f"conv3d: kernel depth {kd} exceeds padded input depth {D + 2 * pd}")
    Do = _conv_out_extent(D, kd, stride, pd)
    Ho = _conv_out_extent(H, kh, stride, padding)
    Wo = _conv_out_extent(W, kw, stride, padding)
    pad = ((0, 0), (0, 0), (pd, pd), (padding, padding), (padding, padding))
    xp = np.pad(x.data, pad)
    win = sliding_window_view(xp, (kd, kh, kw), axis=(2, 3, 4))
    win = win[:, :, ::stride, ::stride, ::stride][:, :, :Do, :Ho, :Wo]
    out = np.einsum("bcdhwxyz,fcxyz->bfdhw", win, kernel.data, optimize=True)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (F,):
            raise ShapeError(f"conv3d: bias shape {bias.shape} does not match {F} filters")
        out = out + bias.data[None, :, None, None, None]
    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def backward(g):
        dk = np.tensordot(g, win, axes=([0, 2, 3, 4], [0, 2, 3, 4]))
        dxp = np.zeros_like(xp)
        for d in range(kd):
            for i in range(kh):
                for j in range(kw):
                    part = np.tensordot(g, kernel.data[:, :, d, i, j], axes=([1], [0]))
                    dxp[:, :,
                        d:d + stride * Do:stride,
                        i:i + stride * Ho:stride,
                        j:j + stride * Wo:stride] += np.moveaxis(part, 4, 1)
        dx = dxp[:, :, pd:pd + D, padding:padding + H, padding:padding + W]
        if bias is None:
            return (dx, dk)
        return (dx, dk, g.sum(axis=(0, 2, 3, 4)))

    return make_op(out, parents, backward, "conv3d")


# -- resampling ---------------------------------------------------------------

def _up2_axis_forward(x: np.ndarray) -> np.ndarray:
    # factor-2 bilinear along the last axis, sample centers at (i+0.5)/2 - 0.5
    prev = np.concatenate([x[..., :1], x[..., :-1]], axis=-1)
    nxt = np.concatenate([x[..., 1:], x[..., -1:]], axis=-1)
    out = np.empty(x.shape[:-1] + (2 * x.shape[-1],), dtype=x.dtype)
    out[..., 0::2] = 0.25 * prev + 0.75 * x
    out[..., 1::2] = 0.75 * x + 0.25 * nxt
    return out


def _up2_axis_adjoint(g: np.ndarray) -> np.ndarray:
    ge, go = g[..., 0::2], g[..., 1::2]
    dx = 0.75 * ge + 0.75 * go
    dx[..., :-1] += 0.25 * ge[..., 1:]
    dx[..., 0] += 0.25 * ge[..., 0]
    dx[..., 1:] += 0.25 * go[..., :-1]
    dx[..., -1] += 0.25 * go[..., -1]
    return dx


def upsample2x(x) -> Tensor:
    """Bilinear 2x upsampling of the last two axes (align-corners-false)."""
    x = as_tensor(x)
    if x.ndim < 2:
        raise ShapeError(f"upsample2x needs at least 2 dims, got shape {x.shape}")
    fwd = _up2_axis_forward(x.data)
    fwd = np.swapaxes(_up2_axis_forward(np.swapaxes(fwd, -1, -2)), -1, -2)

    def backward(g):
        g = np.swapaxes(_up2_axis_adjoint(np.swapaxes(g, -1, -2)), -1, -2)
        return (_up2_axis_adjoint(g),)

    return make_op(fwd, (x,), backward, "upsample2x")


def avg_pool3x3_reflect(x) -> Tensor:
    """3x3 box mean over the last two axes with mirror padding."""
    x = as_tensor(x)
    if x.ndim < 2 or x.shape[-1] < 2 or x.shape[-2] < 2:
        raise ShapeError(f"avg_pool3x3_reflect needs extents >= 2, got shape {x.shape}")
    H, W = x.shape[-2], x.shape[-1]
    pad = [(0, 0)] * (x.ndim - 2) + [(1, 1), (1, 1)]
    xp = np.pad(x.data, pad, mode="reflect")
    out = np.zeros_like(x.data)
    for di in range(3):
        for dj in range(3):
            out += xp[..., di:di + H, dj:dj + W]
    out = out / 9.0

    def backward(g):
        gp = np.zeros_like(xp)
        gg = g / 9.0
        for di in range(3):
            for dj in range(3):
                gp[..., di:di + H, dj:dj + W] += gg
        # fold mirrored borders back: padded row 0 is original row 1 (mirror
        # without edge repeat), which sits at padded index 2
        gp[..., 2, :] += gp[..., 0, :]
        gp[..., -3, :] += gp[..., -1, :]
        gp[..., :, 2] += gp[..., :, 0]
        gp[..., :, -3] += gp[..., :, -1]
        return (gp[..., 1:-1, 1:-1].copy(),)

    return make_op(out, (x,), backward, "avg_pool3x3_reflect")
