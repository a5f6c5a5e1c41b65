"""Differentiable array operations used by the generator and discriminator.

Array layout is (batch, channels, time) everywhere. Each forward op has a
matching gradient op; the conv kernels dispatch to the numba or numpy
backend chosen in :mod:`augvoc.backend`.
"""

import numpy as np

from . import backend

if backend.USE_NUMBA:
    from . import _kernels_numba as _k
else:
    from . import _kernels_numpy as _k


def _f64c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def same_pad(kernel_size, dilation=1):
    """Padding that preserves length for odd kernels at stride 1."""
    return dilation * (kernel_size - 1) // 2


def conv1d(x, w, b, stride=1, dilation=1, pad=0):
    """1-D convolution (cross-correlation) with zero padding.

    x: (B, Cin, T), w: (Cout, Cin, K), b: (Cout,) or None.
    """
    y = _k.conv1d_fw(_f64c(x), _f64c(w), stride, dilation, pad)
    if b is not None:
        y += b[None, :, None]
    return y


def conv1d_grads(x, w, gy, stride=1, dilation=1, pad=0,
                 need_gx=True, need_gw=True):
    """Gradients of conv1d. Returns (gx, gw, gb); entries are None if skipped."""
    gy = _f64c(gy)
    gx = gw = gb = None
    if need_gx:
        gx = _k.conv1d_gx(gy, _f64c(w), stride, dilation, pad, x.shape[2])
    if need_gw:
        gw = _k.conv1d_gw(_f64c(x), gy, stride, dilation, pad, w.shape[2])
        gb = gy.sum(axis=(0, 2))
    return gx, gw, gb


def conv_transpose1d(x, w, b, stride, pad):
    """Transposed 1-D convolution producing exactly T*stride output samples.

    x: (B, Cin, T), w: (Cin, Cout, K). Requires K and pad chosen so that
    (T*stride + 2*pad - K) // stride + 1 == T; the stock choice K = 2*stride,
    pad = (stride + 1) // 2 satisfies it.
    """
    t_target = x.shape[2] * stride
    y = _k.conv1d_gx(_f64c(x), _f64c(w), stride, 1, pad, t_target)
    if b is not None:
        y += b[None, :, None]
    return y


def conv_transpose1d_grads(x, w, gy, stride, pad, need_gx=True, need_gw=True):
    """Gradients of conv_transpose1d. Returns (gx, gw, gb)."""
    gy = _f64c(gy)
    gx = gw = gb = None
    if need_gx:
        gx = _k.conv1d_fw(gy, _f64c(w), stride, 1, pad)
        assert gx.shape[2] == x.shape[2], "transposed-conv geometry mismatch"
    if need_gw:
        gw = _k.conv1d_gw(gy, _f64c(x), stride, 1, pad, w.shape[2])
        gb = gy.sum(axis=(0, 2))
    return gx, gw, gb


def leaky_relu(x, slope):
    return np.where(x >= 0.0, x, slope * x)


def leaky_relu_grad(x_pre, g, slope):
    return np.where(x_pre >= 0.0, g, slope * g)


def tanh_grad(y_out, g):
    """Gradient through tanh given its output."""
    return g * (1.0 - y_out * y_out)


def avg_pool2(x):
    """Average-pool by 2 along time, dropping a trailing odd sample."""
    T2 = x.shape[2] // 2
    return x[:, :, :T2 * 2].reshape(x.shape[0], x.shape[1], T2, 2).mean(axis=3)


def avg_pool2_grad(g, t_in):
    """Gradient of avg_pool2 back to an input of length t_in."""
    B, C, T2 = g.shape
    gx = np.zeros((B, C, t_in))
    gx[:, :, :T2 * 2] = np.repeat(g * 0.5, 2, axis=2)
    return gx
