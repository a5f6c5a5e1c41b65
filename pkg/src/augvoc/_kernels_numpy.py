"""Pure-numpy implementations of the 1-D convolution kernels.

These mirror the numba kernels exactly (same signatures, same zero-padding
semantics) using an im2col view plus BLAS tensordot. Used when numba is
unavailable or when AUGVOC_BACKEND=numpy.
"""

import numpy as np


def _im2col(xp, K, T_out, stride, dilation):
    s0, s1, s2 = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp,
        (xp.shape[0], xp.shape[1], K, T_out),
        (s0, s1, s2 * dilation, s2 * stride),
        writeable=False,
    )


def conv1d_fw(x, w, stride, dilation, pad):
    """y[b,o,t] = sum_{c,k} w[o,c,k] * x[b,c,t*stride + k*dilation - pad]."""
    B, Cin, T = x.shape
    Cout, _, K = w.shape
    span = dilation * (K - 1) + 1
    T_out = (T + 2 * pad - span) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    cols = _im2col(xp, K, T_out, stride, dilation)
    y = np.tensordot(w, cols, axes=([1, 2], [1, 2]))
    return np.ascontiguousarray(y.transpose(1, 0, 2))


def conv1d_gx(gy, w, stride, dilation, pad, t_in):
    """Adjoint of conv1d_fw with respect to its input."""
    B, Cout, T_out = gy.shape
    _, Cin, K = w.shape
    gxp = np.zeros((B, Cin, t_in + 2 * pad))
    for k in range(K):
        # (B, Cout, T_out) x (Cout, Cin) -> (B, T_out, Cin)
        tap = np.tensordot(gy, w[:, :, k], axes=([1], [0]))
        off = k * dilation
        gxp[:, :, off:off + (T_out - 1) * stride + 1:stride] += tap.transpose(0, 2, 1)
    return np.ascontiguousarray(gxp[:, :, pad:pad + t_in])


def conv1d_gw(x, gy, stride, dilation, pad, n_taps):
    """Adjoint of conv1d_fw with respect to its weights."""
    B, Cin, T = x.shape
    _, Cout, T_out = gy.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    cols = _im2col(xp, n_taps, T_out, stride, dilation)
    # (B, Cout, T_out) x (B, Cin, K, T_out) -> (Cout, Cin, K)
    return np.tensordot(gy, cols, axes=([0, 2], [0, 3]))
