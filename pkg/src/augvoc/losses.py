"""Training objectives for the adversarial vocoder.

One implementation serves both the unconditional and the
augmentation-conditional setups; the only difference is whether a mu state
travels with each waveform into the discriminator.

Conventions (fixed here so every consumer agrees):

* least-squares adversarial targets 1/0, score maps reduced by mean;
* sub-discriminator losses are summed then divided by the number of scales,
  keeping magnitudes comparable across `num_scales` settings;
* feature matching is the per-layer mean absolute difference between real
  and fake activations, summed over layers;
* the mel loss is the element-mean L1 between log-mels and intentionally
  never sees mu: the generator always targets the reference mels it was
  driven with;
* total_g = adv_g + lambda_fm * fm + lambda_mel * mel, total_d = adv_d,
  with default weights 2 and 45.

The waveform-level functions (`adv_loss_d`, `adv_loss_g`, `fm_loss`,
`mel_loss`) accept any discriminator callable (x, mu) -> (scores, features),
which keeps them testable against constant-output stubs. The batched
value-and-gradient helpers at the bottom are what the training loop and the
finite-difference checks consume.
"""

from dataclasses import dataclass

import numpy as np

from . import ConfigError, DivergenceError, InvalidInputError
from .dsp import MelConfig, Waveform, log_mel_batch, log_mel_batch_grad
from .models.discriminator import Discriminator, DiscriminatorConfig
from .augment import AugmentationState


@dataclass(frozen=True)
class LossWeights:
    lambda_fm: float = 2.0
    lambda_mel: float = 45.0

    def __post_init__(self):
        if self.lambda_fm < 0 or self.lambda_mel < 0:
            raise ConfigError("loss weights must be non-negative")


@dataclass(frozen=True)
class LossBreakdown:
    adv_d: float
    adv_g: float
    fm: float
    mel: float
    total_g: float
    total_d: float

    FIELDS = ("adv_d", "adv_g", "fm", "mel", "total_g", "total_d")

    def as_dict(self):
        return {name: getattr(self, name) for name in self.FIELDS}


def discriminator_fn(params, cfg: DiscriminatorConfig):
    """Adapt model parameters to the (x, mu) -> (scores, features) protocol."""
    model = Discriminator(cfg)

    def call(x: Waveform, mu=None):
        batch_mu = None
        if mu is not None:
            state = mu if isinstance(mu, AugmentationState) else AugmentationState(mu)
            batch_mu = state.mu[None, :]
        scores, features, _ = model.forward(params, x.samples[None, :], mu=batch_mu)
        return [s[0, 0] for s in scores], [[f[0] for f in fs] for fs in features]

    return call


def _mean_sq(arr):
    return float(np.mean(np.square(arr)))


def adv_loss_d(d_fn, real: Waveform, fake: Waveform, mu=None):
    """Least-squares discriminator loss, averaged across sub-discriminators:
    mean((D(real)-1)^2) + mean(D(fake)^2)."""
    scores_r, _ = d_fn(real, mu)
    scores_f, _ = d_fn(fake, mu)
    per_scale = [
        _mean_sq(np.asarray(sr) - 1.0) + _mean_sq(sf)
        for sr, sf in zip(scores_r, scores_f)
    ]
    return float(np.mean(per_scale))


def adv_loss_g(d_fn, fake: Waveform, mu=None):
    """Least-squares generator loss: mean((D(fake) - 1)^2)."""
    scores_f, _ = d_fn(fake, mu)
    return float(np.mean([_mean_sq(np.asarray(s) - 1.0) for s in scores_f]))


def fm_loss(d_fn, real: Waveform, fake: Waveform, mu=None):
    """Feature-matching loss: per-layer mean |real - fake| activation gap,
    summed over layers, averaged across sub-discriminators."""
    if len(real) != len(fake):
        raise InvalidInputError("feature matching needs equal-length inputs")
    _, feats_r = d_fn(real, mu)
    _, feats_f = d_fn(fake, mu)
    per_scale = []
    for fr, ff in zip(feats_r, feats_f):
        acc = 0.0
        for r, f in zip(fr, ff):
            if np.shape(r) != np.shape(f):
                raise InvalidInputError("feature stacks disagree in shape")
            acc += float(np.mean(np.abs(np.asarray(r) - np.asarray(f))))
        per_scale.append(acc)
    return float(np.mean(per_scale))


def mel_loss(real: Waveform, fake: Waveform, cfg: MelConfig):
    """Element-mean L1 between the log-mels of two equal-length waveforms."""
    if len(real) != len(fake):
        raise InvalidInputError(
            f"mel loss length mismatch: {len(real)} vs {len(fake)}"
        )
    vr, _ = log_mel_batch(real.samples[None, :], cfg)
    vf, _ = log_mel_batch(fake.samples[None, :], cfg)
    return float(np.mean(np.abs(vr - vf)))


def total_losses(parts, weights: LossWeights) -> LossBreakdown:
    """Combine loss parts: total_g = adv_g + fm*lambda_fm + mel*lambda_mel."""
    vals = {k: float(parts[k]) for k in ("adv_d", "adv_g", "fm", "mel")}
    bad = [k for k, v in vals.items() if not np.isfinite(v)]
    if bad:
        raise DivergenceError(f"non-finite loss parts: {', '.join(sorted(bad))}")
    total_g = vals["adv_g"] + weights.lambda_fm * vals["fm"] + weights.lambda_mel * vals["mel"]
    return LossBreakdown(
        adv_d=vals["adv_d"], adv_g=vals["adv_g"], fm=vals["fm"], mel=vals["mel"],
        total_g=total_g, total_d=vals["adv_d"],
    )


# -- batched values with gradients -------------------------------------------
#
# The helpers below work on (B, T) arrays and multi-scale score/feature lists
# as produced by models.Discriminator.forward, and return both the scalar
# value and the gradient arrays needed to continue back-propagation.

def adv_d_parts(scores_real, scores_fake):
    """Value and score-map gradients of the discriminator objective."""
    n = len(scores_real)
    value = 0.0
    g_real, g_fake = [], []
    for sr, sf in zip(scores_real, scores_fake):
        value += _mean_sq(sr - 1.0) + _mean_sq(sf)
        g_real.append(2.0 * (sr - 1.0) / (n * sr.size))
        g_fake.append(2.0 * sf / (n * sf.size))
    return value / n, g_real, g_fake


def adv_g_parts(scores_fake):
    """Value and score-map gradients of the generator's adversarial term."""
    n = len(scores_fake)
    value = 0.0
    g_fake = []
    for sf in scores_fake:
        value += _mean_sq(sf - 1.0)
        g_fake.append(2.0 * (sf - 1.0) / (n * sf.size))
    return value / n, g_fake


def fm_parts(feats_real, feats_fake):
    """Value and per-feature gradients (both sides) of feature matching."""
    n = len(feats_real)
    value = 0.0
    g_real = [[None] * len(fs) for fs in feats_real]
    g_fake = [[None] * len(fs) for fs in feats_fake]
    for k, (fr, ff) in enumerate(zip(feats_real, feats_fake)):
        for i, (r, f) in enumerate(zip(fr, ff)):
            diff = r - f
            value += float(np.mean(np.abs(diff)))
            s = np.sign(diff) / (n * diff.size)
            g_real[k][i] = s
            g_fake[k][i] = -s
    return value / n, g_real, g_fake


def mel_parts(ref_values, fake_audio, cfg: MelConfig):
    """Mel L1 against fixed reference mels; gradient w.r.t. the fake audio.

    ref_values is (B, frames, n_mels); fake_audio is (B, T).
    """
    fake_values, cache = log_mel_batch(fake_audio, cfg)
    if fake_values.shape != ref_values.shape:
        raise InvalidInputError(
            f"mel shapes disagree: {fake_values.shape} vs {ref_values.shape}"
        )
    diff = fake_values - ref_values
    value = float(np.mean(np.abs(diff)))
    g_fake_audio = log_mel_batch_grad(cache, np.sign(diff) / diff.size)
    return value, g_fake_audio
