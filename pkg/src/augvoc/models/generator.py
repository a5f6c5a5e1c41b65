"""Upsampling convolutional generator: log-mel frames in, waveform out.

A compact stack in the familiar GAN-vocoder shape: a wide entry convolution,
one transposed-convolution upsampling stage per hop factor (each followed by
a residual block of dilated convolutions at half the channel width), and a
tanh-bounded output head. The product of the upsample factors equals the hop
length, so output length is exactly frames * hop for any frame count.

Forward passes record every pre-activation needed for the hand-written
backward pass; `Generator.backward` returns parameter gradients for the
adversarial, feature-matching, and mel losses combined upstream.
"""

from dataclasses import dataclass

import numpy as np

from .. import ConfigError, InvalidInputError
from ..dsp import MelSpectrogram, Waveform
from ..ops import (
    conv1d,
    conv1d_grads,
    conv_transpose1d,
    conv_transpose1d_grads,
    leaky_relu,
    leaky_relu_grad,
    same_pad,
    tanh_grad,
)

LEAKY_SLOPE = 0.1


@dataclass(frozen=True)
class GeneratorConfig:
    """Shape of the generator stack.

    upsample_factors must multiply to the mel hop length; channel width
    halves at each stage starting from base_channels.
    """

    n_mels: int = 80
    upsample_factors: tuple = (8, 8, 4)
    base_channels: int = 128
    resblock_kernel: int = 3
    resblock_dilations: tuple = (1, 3)
    io_kernel: int = 7

    def __post_init__(self):
        if any(f < 2 for f in self.upsample_factors):
            raise ConfigError("upsample factors must all be >= 2")
        if self.base_channels % (2 ** len(self.upsample_factors)):
            raise ConfigError(
                "base_channels must be divisible by 2**len(upsample_factors)"
            )
        if self.resblock_kernel % 2 == 0 or self.io_kernel % 2 == 0:
            raise ConfigError("kernel sizes must be odd for symmetric padding")
        if self.n_mels < 1:
            raise ConfigError("n_mels must be >= 1")

    @property
    def hop_length(self):
        return int(np.prod(self.upsample_factors))

    def stage_channels(self, i):
        return self.base_channels // (2 ** i)

    def param_shapes(self):
        """Ordered {name: shape} of every parameter."""
        k = self.io_kernel
        shapes = {
            "pre.w": (self.base_channels, self.n_mels, k),
            "pre.b": (self.base_channels,),
        }
        for i, f in enumerate(self.upsample_factors):
            cin, cout = self.stage_channels(i), self.stage_channels(i + 1)
            shapes[f"up{i}.w"] = (cin, cout, 2 * f)
            shapes[f"up{i}.b"] = (cout,)
            for j, _d in enumerate(self.resblock_dilations):
                shapes[f"res{i}.d{j}.w"] = (cout, cout, self.resblock_kernel)
                shapes[f"res{i}.d{j}.b"] = (cout,)
        c_last = self.stage_channels(len(self.upsample_factors))
        shapes["post.w"] = (1, c_last, k)
        shapes["post.b"] = (1,)
        return shapes

    def param_count(self):
        return sum(int(np.prod(s)) for s in self.param_shapes().values())


def init_generator(cfg: GeneratorConfig, seed: int):
    """Normal(0, 0.01) weights, zero biases; deterministic per seed."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in cfg.param_shapes().items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.normal(0.0, 0.01, size=shape)
    return params


class Generator:
    """Stateless forward/backward engine for a GeneratorConfig."""

    def __init__(self, cfg: GeneratorConfig):
        self.cfg = cfg

    def forward(self, params, mels, want_cache=False):
        """mels (B, n_mels, frames) -> audio (B, 1, frames * hop)."""
        cfg = self.cfg
        if mels.ndim != 3 or mels.shape[1] != cfg.n_mels:
            raise ConfigError(
                f"expected (B, {cfg.n_mels}, frames) input, got {mels.shape}"
            )
        cache = {"mels": mels} if want_cache else None
        pad_io = same_pad(cfg.io_kernel)

        h = conv1d(mels, params["pre.w"], params["pre.b"], pad=pad_io)
        stages = []
        for i, f in enumerate(self.cfg.upsample_factors):
            pre_up = h
            a = leaky_relu(h, LEAKY_SLOPE)
            u = conv_transpose1d(
                a, params[f"up{i}.w"], params[f"up{i}.b"],
                stride=f, pad=(f + 1) // 2,
            )
            res_caches = []
            x = u
            for j, d in enumerate(cfg.resblock_dilations):
                r_in = x
                ra = leaky_relu(x, LEAKY_SLOPE)
                rc = conv1d(
                    ra, params[f"res{i}.d{j}.w"], params[f"res{i}.d{j}.b"],
                    dilation=d, pad=same_pad(cfg.resblock_kernel, d),
                )
                x = r_in + rc
                res_caches.append((r_in, ra))
            stages.append((pre_up, a, u, res_caches))
            h = x
        pre_post = h
        a_post = leaky_relu(h, LEAKY_SLOPE)
        z = conv1d(a_post, params["post.w"], params["post.b"], pad=pad_io)
        y = np.tanh(z)
        if want_cache:
            cache.update(stages=stages, pre_post=pre_post, a_post=a_post, y=y)
        return y, cache

    def backward(self, params, cache, gy):
        """Gradients of a scalar loss w.r.t. every parameter, given dL/dy."""
        cfg = self.cfg
        pad_io = same_pad(cfg.io_kernel)
        grads = {}

        g = tanh_grad(cache["y"], gy)
        g, grads["post.w"], grads["post.b"] = conv1d_grads(
            cache["a_post"], params["post.w"], g, pad=pad_io,
        )
        g = leaky_relu_grad(cache["pre_post"], g, LEAKY_SLOPE)

        for i in reversed(range(len(cfg.upsample_factors))):
            f = cfg.upsample_factors[i]
            pre_up, a, u, res_caches = cache["stages"][i]
            for j in reversed(range(len(cfg.resblock_dilations))):
                d = cfg.resblock_dilations[j]
                r_in, ra = res_caches[j]
                gc, grads[f"res{i}.d{j}.w"], grads[f"res{i}.d{j}.b"] = conv1d_grads(
                    ra, params[f"res{i}.d{j}.w"], g,
                    dilation=d, pad=same_pad(cfg.resblock_kernel, d),
                )
                g = g + leaky_relu_grad(r_in, gc, LEAKY_SLOPE)
            g, grads[f"up{i}.w"], grads[f"up{i}.b"] = conv_transpose1d_grads(
                a, params[f"up{i}.w"], g, stride=f, pad=(f + 1) // 2,
            )
            g = leaky_relu_grad(pre_up, g, LEAKY_SLOPE)

        _, grads["pre.w"], grads["pre.b"] = conv1d_grads(
            cache["mels"], params["pre.w"], g, pad=pad_io, need_gx=False,
        )
        return grads


def generate(params, mel: MelSpectrogram, cfg: GeneratorConfig, sample_rate=None) -> Waveform:
    """Synthesize one waveform from a mel spectrogram.

    Output length is mel.n_frames * hop_length; values lie in (-1, 1).
    """
    if mel.config.n_mels != cfg.n_mels:
        raise ConfigError(
            f"mel has {mel.config.n_mels} bins but generator expects {cfg.n_mels}"
        )
    if cfg.hop_length != mel.config.hop_length:
        raise ConfigError(
            f"generator upsamples by {cfg.hop_length} but mel hop is "
            f"{mel.config.hop_length}"
        )
    x = mel.values.T[None, :, :]
    y, _ = Generator(cfg).forward(params, x)
    audio = y[0, 0]
    if not np.all(np.isfinite(audio)):
        raise InvalidInputError("generator produced non-finite samples")
    return Waveform(samples=audio, sample_rate=sample_rate or mel.config.sample_rate)
