"""Multi-scale waveform discriminator with optional augmentation conditioning.

Each sub-discriminator is a stack of strided 1-D convolutions with leaky-ReLU
activations ending in an un-activated per-timestep score map (least-squares
GAN convention). Scale k sees the input average-pooled k times by 2.

When `augmentation_conditional` is set, the augmentation state mu is
broadcast along time and concatenated onto the waveform in the channel
direction before the first convolution of every sub-discriminator, so the
stack judges realness relative to the declared augmentation strength. The
`discriminate` contract is strict: a conditional model requires mu and an
unconditional model rejects it, preventing a silent fallback to the wrong
objective.
"""

from dataclasses import dataclass

import numpy as np

from .. import ConfigError, InvalidInputError
from ..dsp import Waveform
from ..ops import (
    avg_pool2,
    avg_pool2_grad,
    conv1d,
    conv1d_grads,
    leaky_relu,
    leaky_relu_grad,
    same_pad,
)
from ..augment import AugmentationState

LEAKY_SLOPE = 0.1


@dataclass(frozen=True)
class DiscriminatorConfig:
    """Shape of the multi-scale stack.

    channels lists the hidden widths; kernel_sizes and strides cover the
    hidden layers plus the final score convolution, so their length is
    len(channels) + 1.
    """

    num_scales: int = 2
    channels: tuple = (16, 64, 64, 64)
    kernel_sizes: tuple = (15, 41, 41, 5, 3)
    strides: tuple = (1, 4, 4, 1, 1)
    augmentation_conditional: bool = False
    mu_dim: int = 1

    def __post_init__(self):
        if self.num_scales < 1:
            raise ConfigError("num_scales must be >= 1")
        if len(self.kernel_sizes) != len(self.channels) + 1:
            raise ConfigError("need one kernel size per hidden layer plus the head")
        if len(self.strides) != len(self.kernel_sizes):
            raise ConfigError("kernel_sizes and strides must align")
        if any(k % 2 == 0 for k in self.kernel_sizes):
            raise ConfigError("kernel sizes must be odd for symmetric padding")
        if self.mu_dim < 1:
            raise ConfigError("mu_dim must be >= 1")

    @property
    def in_channels(self):
        return 1 + self.mu_dim if self.augmentation_conditional else 1

    @property
    def n_layers(self):
        return len(self.kernel_sizes)

    def layer_dims(self):
        widths = (self.in_channels,) + tuple(self.channels) + (1,)
        return list(zip(widths[:-1], widths[1:], self.kernel_sizes, self.strides))

    def param_shapes(self):
        shapes = {}
        for k in range(self.num_scales):
            for j, (cin, cout, ksize, _s) in enumerate(self.layer_dims()):
                shapes[f"s{k}.l{j}.w"] = (cout, cin, ksize)
                shapes[f"s{k}.l{j}.b"] = (cout,)
        return shapes

    def param_count(self):
        return sum(int(np.prod(s)) for s in self.param_shapes().values())


def init_discriminator(cfg: DiscriminatorConfig, seed: int):
    """Normal(0, 0.01) weights, zero biases; deterministic per seed."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in cfg.param_shapes().items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.normal(0.0, 0.01, size=shape)
    return params


def condition_input(x, mu):
    """Concatenate the augmentation state onto a waveform along channels.

    x is a Waveform or 1-D array of length t; mu is an AugmentationState or
    1-D vector of d components. Returns a (t, 1 + d) matrix whose column 0
    is the waveform and column 1 + j repeats mu[j] t times (a scalar state
    behaves as a 1x1 tensor stretched to the signal length).
    """
    samples = x.samples if isinstance(x, Waveform) else np.asarray(x, dtype=np.float64)
    vec = mu.mu if isinstance(mu, AugmentationState) else np.atleast_1d(
        np.asarray(mu, dtype=np.float64)
    )
    if samples.ndim != 1:
        raise InvalidInputError("condition_input expects a single waveform")
    if vec.ndim != 1 or vec.size < 1:
        raise InvalidInputError("mu must have at least one component")
    if not np.all(np.isfinite(vec)):
        raise InvalidInputError("mu contains non-finite entries")
    t = samples.size
    out = np.empty((t, 1 + vec.size))
    out[:, 0] = samples
    out[:, 1:] = vec[None, :]
    return out


def _condition_batch(x, mu):
    """(B, T) waveforms + (B, d) states -> (B, 1 + d, T)."""
    B, T = x.shape
    if not np.all(np.isfinite(mu)):
        raise InvalidInputError("mu contains non-finite entries")
    out = np.empty((B, 1 + mu.shape[1], T))
    out[:, 0, :] = x
    out[:, 1:, :] = mu[:, :, None]
    return out


class Discriminator:
    """Stateless forward/backward engine for a DiscriminatorConfig."""

    def __init__(self, cfg: DiscriminatorConfig):
        self.cfg = cfg

    def _check_mu(self, mu):
        if self.cfg.augmentation_conditional:
            if mu is None:
                raise ConfigError(
                    "augmentation-conditional discriminator requires mu"
                )
            mu = np.asarray(mu, dtype=np.float64)
            if mu.ndim != 2 or mu.shape[1] != self.cfg.mu_dim:
                raise ConfigError(
                    f"mu must be (batch, {self.cfg.mu_dim}), got {mu.shape}"
                )
            return mu
        if mu is not None:
            raise ConfigError(
                "unconditional discriminator must not receive mu"
            )
        return None

    def forward(self, params, x, mu=None, want_cache=False):
        """x (B, T), mu (B, d) or None -> (scores, features, cache).

        scores[k] is the (B, 1, T_k) map of sub-discriminator k; features[k]
        lists its post-activation maps plus the score map.
        """
        cfg = self.cfg
        mu = self._check_mu(mu)
        if x.ndim != 2:
            raise InvalidInputError(f"expected (B, T) waveforms, got {x.shape}")
        if cfg.augmentation_conditional:
            h0 = _condition_batch(x, mu)
        else:
            h0 = x[:, None, :]

        scores, features, cache_scales = [], [], []
        dims = cfg.layer_dims()
        inp = h0
        for k in range(cfg.num_scales):
            if k > 0:
                inp = avg_pool2(inp)
            h = inp
            pre_acts, act_ins = [], []
            feats = []
            for j, (_ci, _co, ksize, stride) in enumerate(dims):
                act_ins.append(h)
                a = conv1d(
                    h, params[f"s{k}.l{j}.w"], params[f"s{k}.l{j}.b"],
                    stride=stride, pad=same_pad(ksize),
                )
                pre_acts.append(a)
                if j < cfg.n_layers - 1:
                    h = leaky_relu(a, LEAKY_SLOPE)
                    feats.append(h)
                else:
                    h = a
                    feats.append(a)
            scores.append(h)
            features.append(feats)
            cache_scales.append((inp, act_ins, pre_acts))
        cache = {"x_shape": x.shape, "scales": cache_scales} if want_cache else None
        return scores, features, cache

    def backward(self, params, cache, g_scores=None, g_features=None,
                 need_gx=False, need_gparams=True):
        """Accumulate gradients from score maps and/or feature maps.

        Returns (param_grads, gx, gmu); gx is (B, T) and gmu (B, d) when
        need_gx is set (gmu is None for an unconditional model). The
        generator phase sets need_gparams=False to skip weight gradients it
        would discard.
        """
        cfg = self.cfg
        dims = cfg.layer_dims()
        grads = {name: None for name in cfg.param_shapes()} if need_gparams else None
        g_input_total = None

        for k in reversed(range(cfg.num_scales)):
            inp, act_ins, pre_acts = cache["scales"][k]
            g = None
            if g_scores is not None and g_scores[k] is not None:
                g = g_scores[k]
            for j in reversed(range(cfg.n_layers)):
                gf = None
                if g_features is not None and g_features[k][j] is not None:
                    gf = g_features[k][j]
                if j == cfg.n_layers - 1:
                    ga = g if gf is None else (gf if g is None else g + gf)
                else:
                    gh = g if gf is None else (gf if g is None else g + gf)
                    ga = leaky_relu_grad(pre_acts[j], gh, LEAKY_SLOPE)
                _ci, _co, ksize, stride = dims[j]
                name = f"s{k}.l{j}"
                g, gw, gb = conv1d_grads(
                    act_ins[j], params[f"{name}.w"], ga,
                    stride=stride, pad=same_pad(ksize),
                    need_gw=need_gparams,
                )
                if need_gparams:
                    grads[f"{name}.w"] = gw if grads[f"{name}.w"] is None else grads[f"{name}.w"] + gw
                    grads[f"{name}.b"] = gb if grads[f"{name}.b"] is None else grads[f"{name}.b"] + gb
            if need_gx:
                # Unpool back through each 2x stage using the recorded lengths
                # (a halved odd length cannot be recovered by doubling).
                for kk in range(k, 0, -1):
                    t_prev = cache["scales"][kk - 1][0].shape[2]
                    g = avg_pool2_grad(g, t_prev)
                g_input_total = g if g_input_total is None else g_input_total + g

        if not need_gx:
            return grads, None, None
        B, T = cache["x_shape"]
        if g_input_total.shape[2] != T:
            raise InvalidInputError("input gradient length mismatch")
        gx = g_input_total[:, 0, :]
        gmu = None
        if cfg.augmentation_conditional:
            gmu = g_input_total[:, 1:, :].sum(axis=2)
        return grads, gx, gmu


def discriminate(params, x: Waveform, cfg: DiscriminatorConfig, mu=None):
    """Score a single waveform; returns (score maps, feature stacks).

    mu must be an AugmentationState exactly when the config is
    augmentation-conditional.
    """
    model = Discriminator(cfg)
    batch_mu = None
    if mu is not None:
        state = mu if isinstance(mu, AugmentationState) else AugmentationState(mu)
        batch_mu = state.mu[None, :]
    if cfg.augmentation_conditional and batch_mu is None:
        raise ConfigError("augmentation-conditional discriminator requires mu")
    scores, features, _ = model.forward(
        params, x.samples[None, :], mu=batch_mu,
    )
    return [s[0, 0] for s in scores], [[f[0] for f in fs] for fs in features]
