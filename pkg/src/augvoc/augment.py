"""Waveform augmentations and the two batch strategies that deploy them.

Two augmentations are built in, each summarized by a scalar augmentation
state mu that the conditional discriminator can consume:

* mixup: x~ = m*x1 + (1-m)*x2 with m ~ U(0,1); mu = (1 - max(m, 1-m)) * 2,
  so mu is 0 at the identity endpoints and 1 at an even 50/50 mix.
* rate: playback-speed change by 2**s with s ~ U(-1,1); mu = 2**s.

Strategies differ in what the generator sees:

* S1 augments only discriminator inputs. The generator is driven by mels of
  the untouched real audio, and the trainer applies the SAME sampled
  parameters (mixture rates, pairings, rates) to the generated batch so that
  real and fake inputs to the discriminator differ only in authenticity.
* S2 (default) augments the real audio first; the generator receives mels of
  the augmented audio, so both networks see augmented material.

`apply_params` / `apply_params_grad` expose the parameterized augmentation as
a differentiable batch transform, which the S1 path needs to back-propagate
generator gradients through the augmentation of generated audio.
"""

from dataclasses import dataclass, field

import numpy as np

from . import ConfigError, InvalidInputError
from .dsp import (
    MelConfig,
    MelSpectrogram,
    Waveform,
    log_mel_batch,
    resample_array,
    resample_grad,
    resample_time_scale,
)

STRATEGIES = ("S1", "S2")
AUG_KINDS = ("none", "mixup", "rate")


@dataclass(frozen=True)
class AugmentationState:
    """Augmentation strength vector mu; d = 1 for both built-in kinds."""

    mu: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        if mu.ndim != 1 or mu.size < 1:
            raise InvalidInputError("mu must be a 1-D vector with d >= 1")
        if not np.all(np.isfinite(mu)):
            raise InvalidInputError("mu contains non-finite entries")
        object.__setattr__(self, "mu", mu)

    @property
    def d(self):
        return self.mu.size

    @classmethod
    def scalar(cls, value):
        return cls(mu=np.array([float(value)]))


@dataclass(frozen=True)
class MixupParams:
    m: float
    partner_index: int

    def __post_init__(self):
        if not 0.0 <= self.m <= 1.0:
            raise InvalidInputError(f"mixture rate m={self.m} outside [0, 1]")
        if self.partner_index < 0:
            raise InvalidInputError("partner_index must be non-negative")


@dataclass(frozen=True)
class RateParams:
    s: float

    def __post_init__(self):
        if not -1.0 <= self.s <= 1.0:
            raise InvalidInputError(f"rate exponent s={self.s} outside [-1, 1]")


@dataclass(frozen=True)
class TrainingBatch:
    """One prepared step of training data.

    real_waves are what the discriminator sees as real (augmented under both
    strategies unless kind is none); gen_inputs drive the generator. Under S1
    gen_inputs are the mels of the untouched audio (also kept in raw_mels)
    and `params` lets the trainer re-apply the identical augmentation to
    generated audio.
    """

    real_waves: list
    gen_inputs: list
    mu: list
    strategy: str
    kind: str
    params: list
    raw_mels: list | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.kind not in AUG_KINDS:
            raise ConfigError(f"unknown augmentation kind {self.kind!r}")
        n = len(self.real_waves)
        if not (len(self.gen_inputs) == len(self.mu) == len(self.params) == n) or n == 0:
            raise InvalidInputError("batch lists must be non-empty and equal length")
        if self.strategy == "S1":
            if self.raw_mels is None or len(self.raw_mels) != n:
                raise InvalidInputError("S1 batches must carry raw (non-augmented) mels")
            if any(g is not r for g, r in zip(self.gen_inputs, self.raw_mels)):
                raise InvalidInputError("under S1, gen_inputs must be the raw mels")

    def __len__(self):
        return len(self.real_waves)

    def real_array(self):
        return np.stack([w.samples for w in self.real_waves])

    def gen_input_array(self):
        return np.stack([m.values for m in self.gen_inputs])

    def mu_array(self):
        return np.stack([s.mu for s in self.mu])


def mixup_mu(m):
    """Distortion strength of a mixture rate: 0 at m in {0,1}, 1 at m=0.5."""
    m = np.asarray(m, dtype=np.float64)
    return (1.0 - np.maximum(m, 1.0 - m)) * 2.0


def rate_mu(s):
    """Augmentation state of a rate change: the speed factor 2**s."""
    return np.power(2.0, np.asarray(s, dtype=np.float64))


def sample_mixup(rng, batch_size, index):
    """Draw mixup parameters: m ~ U(0,1), partner uniform over other indices.

    With batch_size 1 the only legal partner is the sample itself, which
    degenerates mixup to the identity.
    """
    m = float(rng.uniform(0.0, 1.0))
    if batch_size <= 1:
        partner = index
    else:
        partner = int(rng.integers(batch_size - 1))
        if partner >= index:
            partner += 1
    return MixupParams(m=m, partner_index=partner)


def sample_rate(rng):
    """Draw rate-change parameters: s ~ U(-1, 1)."""
    return RateParams(s=float(rng.uniform(-1.0, 1.0)))


def mixup(x1: Waveform, x2: Waveform, m: float):
    """Convex combination of two waveforms; returns (x~, state)."""
    if len(x1) != len(x2):
        raise InvalidInputError(
            f"mixup length mismatch: {len(x1)} vs {len(x2)}"
        )
    if x1.sample_rate != x2.sample_rate:
        raise InvalidInputError("mixup sample-rate mismatch")
    if not 0.0 <= m <= 1.0:
        raise InvalidInputError(f"mixture rate m={m} outside [0, 1]")
    mixed = m * x1.samples + (1.0 - m) * x2.samples
    return (
        Waveform(samples=mixed, sample_rate=x1.sample_rate),
        AugmentationState.scalar(mixup_mu(m)),
    )


def rate_change(x: Waveform, s: float):
    """Speed the waveform up by 2**s (s < 0 slows it down)."""
    if not -1.0 <= s <= 1.0:
        raise InvalidInputError(f"rate exponent s={s} outside [-1, 1]")
    factor = float(rate_mu(s))
    return resample_time_scale(x, factor), AugmentationState.scalar(factor)


def _mixup_permutation(rng, n):
    """Pairing permutation with no fixed points for n > 1."""
    perm = rng.permutation(n)
    for i in range(n):
        if perm[i] == i:
            j = (i + 1) % n
            perm[i], perm[j] = perm[j], perm[i]
    return perm


def sample_params(kind, rng, batch_size):
    """Fresh per-sample augmentation parameters for one batch.

    Mixup partners form a fixed-point-free permutation (self-pairing only at
    batch size 1) so every sample both gives and receives mass exactly once.
    """
    if kind == "none":
        return [None] * batch_size
    if kind == "mixup":
        if batch_size == 1:
            partners = np.array([0])
        else:
            partners = _mixup_permutation(rng, batch_size)
        ms = rng.uniform(0.0, 1.0, size=batch_size)
        return [MixupParams(m=float(ms[i]), partner_index=int(partners[i]))
                for i in range(batch_size)]
    if kind == "rate":
        ss = rng.uniform(-1.0, 1.0, size=batch_size)
        return [RateParams(s=float(s)) for s in ss]
    raise ConfigError(f"unknown augmentation kind {kind!r}")


def apply_params(x, kind, params):
    """Apply per-sample augmentation parameters to a (B, T) batch.

    Rate-changed signals are cropped from the front or zero-padded at the
    tail back to T so the batch stays rectangular. Returns
    (augmented (B, T), mu (B,), cache) where cache feeds apply_params_grad.
    """
    x = np.asarray(x, dtype=np.float64)
    B, T = x.shape
    if len(params) != B:
        raise InvalidInputError("one parameter record per batch row required")

    if kind == "none":
        return x.copy(), np.zeros(B), ("none", B, T)

    if kind == "mixup":
        ms = np.array([p.m for p in params])
        partners = np.array([p.partner_index for p in params])
        y = ms[:, None] * x + (1.0 - ms[:, None]) * x[partners]
        return y, mixup_mu(ms), ("mixup", ms, partners)

    if kind == "rate":
        y = np.zeros_like(x)
        mu = np.empty(B)
        caches = []
        for i, p in enumerate(params):
            factor = float(rate_mu(p.s))
            resampled, rc = resample_array(x[i], factor)
            keep = min(T, resampled.size)
            y[i, :keep] = resampled[:keep]
            mu[i] = factor
            caches.append((rc, keep, resampled.size))
        return y, mu, ("rate", caches, T)

    raise ConfigError(f"unknown augmentation kind {kind!r}")


def apply_params_grad(cache, gy):
    """Back-propagate through apply_params; returns grad w.r.t. the input batch."""
    tag = cache[0]
    if tag == "none":
        return np.asarray(gy).copy()

    if tag == "mixup":
        _, ms, partners = cache
        gx = ms[:, None] * gy
        np.add.at(gx, partners, (1.0 - ms)[:, None] * gy)
        return gx

    _, caches, T = cache
    gy = np.asarray(gy)
    rows = []
    for i, (rc, keep, n_out) in enumerate(caches):
        g_res = np.zeros(n_out)
        g_res[:keep] = gy[i, :keep]
        rows.append(resample_grad(rc, g_res))
    return np.stack(rows)


def apply_strategy(real_waves, strategy, kind, rng, cfg: MelConfig) -> TrainingBatch:
    """Build one TrainingBatch from equal-length real waveform crops.

    S2: real_waves are augmented and the generator input mels are extracted
    from the augmented audio. S1: the discriminator's real side is augmented
    but the generator sees mels of the untouched audio, and the sampled
    parameters ride along for re-application to generated audio.
    """
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}")
    if kind not in AUG_KINDS:
        raise ConfigError(f"unknown augmentation kind {kind!r}")
    if not real_waves:
        raise InvalidInputError("empty batch")
    lengths = {len(w) for w in real_waves}
    if len(lengths) != 1:
        raise InvalidInputError("batch waves must share one segment length")
    rates = {w.sample_rate for w in real_waves}
    if len(rates) != 1 or rates != {cfg.sample_rate}:
        raise ConfigError("batch sample rate must match the mel config")

    x = np.stack([w.samples for w in real_waves])
    params = sample_params(kind, rng, len(real_waves))
    x_aug, mu, _ = apply_params(x, kind, params)

    sr = cfg.sample_rate
    aug_waves = [Waveform(samples=row, sample_rate=sr) for row in x_aug]
    mel_src = x_aug if strategy == "S2" else x
    mel_values, _ = log_mel_batch(mel_src, cfg)
    mels = [MelSpectrogram(values=v, config=cfg) for v in mel_values]
    states = [AugmentationState.scalar(v) for v in mu]

    if strategy == "S2":
        return TrainingBatch(
            real_waves=aug_waves, gen_inputs=mels, mu=states,
            strategy="S2", kind=kind, params=params,
        )
    return TrainingBatch(
        real_waves=aug_waves, gen_inputs=mels, mu=states,
        strategy="S1", kind=kind, params=params, raw_mels=mels,
    )
