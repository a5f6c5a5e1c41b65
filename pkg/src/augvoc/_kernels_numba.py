"""Numba implementations of the 1-D convolution kernels.

Loop structure: the input is zero-padded once, stride-1 taps run as
contiguous axpy loops, and strided taps go through a small gather buffer so
the inner loops always touch contiguous memory. All arrays are float64 and
C-contiguous; callers guarantee both.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def conv1d_fw(x, w, stride, dilation, pad):
    """y[b,o,t] = sum_{c,k} w[o,c,k] * x[b,c,t*stride + k*dilation - pad]."""
    B, Cin, T = x.shape
    Cout, _, K = w.shape
    span = dilation * (K - 1) + 1
    T_out = (T + 2 * pad - span) // stride + 1
    xp = np.zeros((B, Cin, T + 2 * pad))
    xp[:, :, pad:pad + T] = x
    y = np.zeros((B, Cout, T_out))
    buf = np.empty((K, T_out))
    for b in range(B):
        for c in range(Cin):
            xrow = xp[b, c]
            if stride == 1:
                for o in range(Cout):
                    yrow = y[b, o]
                    for k in range(K):
                        wv = w[o, c, k]
                        xs = xrow[k * dilation:k * dilation + T_out]
                        for t in range(T_out):
                            yrow[t] += wv * xs[t]
            else:
                for k in range(K):
                    off = k * dilation
                    brow = buf[k]
                    for t in range(T_out):
                        brow[t] = xrow[t * stride + off]
                for o in range(Cout):
                    yrow = y[b, o]
                    for k in range(K):
                        wv = w[o, c, k]
                        brow = buf[k]
                        for t in range(T_out):
                            yrow[t] += wv * brow[t]
    return y


@njit(cache=True, fastmath=True)
def conv1d_gx(gy, w, stride, dilation, pad, t_in):
    """Adjoint of conv1d_fw with respect to its input."""
    B, Cout, T_out = gy.shape
    _, Cin, K = w.shape
    gxp = np.zeros((B, Cin, t_in + 2 * pad))
    buf = np.empty((K, T_out))
    for b in range(B):
        for c in range(Cin):
            for k in range(K):
                brow = buf[k]
                for t in range(T_out):
                    brow[t] = 0.0
            for o in range(Cout):
                grow = gy[b, o]
                for k in range(K):
                    wv = w[o, c, k]
                    brow = buf[k]
                    for t in range(T_out):
                        brow[t] += wv * grow[t]
            gxrow = gxp[b, c]
            for k in range(K):
                off = k * dilation
                brow = buf[k]
                if stride == 1:
                    gs = gxrow[off:off + T_out]
                    for t in range(T_out):
                        gs[t] += brow[t]
                else:
                    for t in range(T_out):
                        gxrow[t * stride + off] += brow[t]
    return gxp[:, :, pad:pad + t_in].copy()


@njit(cache=True, fastmath=True)
def conv1d_gw(x, gy, stride, dilation, pad, n_taps):
    """Adjoint of conv1d_fw with respect to its weights."""
    B, Cin, T = x.shape
    _, Cout, T_out = gy.shape
    K = n_taps
    xp = np.zeros((B, Cin, T + 2 * pad))
    xp[:, :, pad:pad + T] = x
    gw = np.zeros((Cout, Cin, K))
    buf = np.empty((K, T_out))
    for b in range(B):
        for c in range(Cin):
            xrow = xp[b, c]
            for k in range(K):
                off = k * dilation
                brow = buf[k]
                if stride == 1:
                    xs = xrow[off:off + T_out]
                    for t in range(T_out):
                        brow[t] = xs[t]
                else:
                    for t in range(T_out):
                        brow[t] = xrow[t * stride + off]
            for o in range(Cout):
                grow = gy[b, o]
                for k in range(K):
                    brow = buf[k]
                    acc = 0.0
                    for t in range(T_out):
                        acc += grow[t] * brow[t]
                    gw[o, c, k] += acc
    return gw
