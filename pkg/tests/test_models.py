"""Generator/discriminator engines: shapes, contracts, gradients."""

import numpy as np
import pytest

from augvoc import ConfigError, InvalidInputError
from augvoc.augment import AugmentationState
from augvoc.dsp import MelConfig, Waveform, log_mel
from augvoc.models import (
    Discriminator,
    DiscriminatorConfig,
    Generator,
    GeneratorConfig,
    condition_input,
    discriminate,
    generate,
    init_discriminator,
    init_generator,
)

G_CFG = GeneratorConfig(n_mels=8, upsample_factors=(2, 2), base_channels=8)
D_CFG = DiscriminatorConfig(
    num_scales=2, channels=(4, 6, 6, 6), kernel_sizes=(5, 5, 5, 3, 3),
    strides=(1, 2, 2, 1, 1),
)
D_CFG_MU = DiscriminatorConfig(
    num_scales=2, channels=(4, 6, 6, 6), kernel_sizes=(5, 5, 5, 3, 3),
    strides=(1, 2, 2, 1, 1), augmentation_conditional=True,
)


def _healthy_params(shapes, rng):
    """Parameters away from the tiny-init regime, where pre-activations are
    large enough for finite differences not to straddle leaky-ReLU kinks."""
    return {
        name: rng.normal(0.0, 0.2 if name.endswith(".b") else 0.3, size=shape)
        for name, shape in shapes.items()
    }


def test_generator_config_validation():
    assert G_CFG.hop_length == 4
    assert GeneratorConfig().hop_length == 256
    with pytest.raises(ConfigError):
        GeneratorConfig(upsample_factors=(1, 4))
    with pytest.raises(ConfigError):
        GeneratorConfig(base_channels=6, upsample_factors=(2, 2))
    with pytest.raises(ConfigError):
        GeneratorConfig(resblock_kernel=4)
    with pytest.raises(ConfigError):
        GeneratorConfig(io_kernel=2)


def test_generator_param_inventory():
    shapes = G_CFG.param_shapes()
    assert shapes["pre.w"] == (8, 8, 7)
    assert shapes["up0.w"] == (8, 4, 4)
    assert shapes["res1.d1.w"] == (2, 2, 3)
    assert shapes["post.w"] == (1, 2, 7)
    total = sum(int(np.prod(s)) for s in shapes.values())
    assert G_CFG.param_count() == total


def test_generator_init_deterministic():
    a = init_generator(G_CFG, 3)
    b = init_generator(G_CFG, 3)
    c = init_generator(G_CFG, 4)
    for name in a:
        np.testing.assert_array_equal(a[name], b[name])
    assert any(not np.array_equal(a[n], c[n]) for n in a)
    assert all(np.all(a[n] == 0.0) for n in a if n.endswith(".b"))


@pytest.mark.parametrize("frames", [1, 2, 3, 5, 17, 64])
def test_generator_output_length(frames, rng):
    params = init_generator(G_CFG, 0)
    mels = rng.standard_normal((2, 8, frames))
    y, _ = Generator(G_CFG).forward(params, mels)
    assert y.shape == (2, 1, frames * G_CFG.hop_length)


def test_generator_zero_params_give_silence(rng):
    params = {n: np.zeros(s) for n, s in G_CFG.param_shapes().items()}
    y, _ = Generator(G_CFG).forward(params, rng.standard_normal((1, 8, 10)))
    assert np.all(y == 0.0)


def test_generator_rejects_wrong_mel_count(rng):
    params = init_generator(G_CFG, 0)
    with pytest.raises(ConfigError):
        Generator(G_CFG).forward(params, rng.standard_normal((1, 5, 10)))


def test_generate_wraps_waveform():
    mel_cfg = MelConfig(sample_rate=22050, fft_size=64, win_length=64,
                        hop_length=4, n_mels=8)
    wave = Waveform(samples=0.3 * np.sin(np.linspace(0, 80, 512)),
                    sample_rate=22050)
    mel = log_mel(wave, mel_cfg)
    out = generate(init_generator(G_CFG, 0), mel, G_CFG)
    assert isinstance(out, Waveform)
    assert len(out) == mel.n_frames * 4
    assert out.sample_rate == 22050

    bad_hop = MelConfig(sample_rate=22050, fft_size=64, win_length=64,
                        hop_length=8, n_mels=8)
    with pytest.raises(ConfigError):
        generate(init_generator(G_CFG, 0), log_mel(wave, bad_hop), G_CFG)


def test_generator_backward_directional_fd(rng):
    params = _healthy_params(G_CFG.param_shapes(), rng)
    mels = rng.standard_normal((2, 8, 6))
    weight = rng.standard_normal((2, 1, 24))
    model = Generator(G_CFG)

    y, cache = model.forward(params, mels, want_cache=True)
    grads = model.backward(params, cache, weight)
    assert set(grads) == set(params)

    direction = {n: rng.standard_normal(p.shape) for n, p in params.items()}
    eps = 1e-5
    plus = {n: params[n] + eps * direction[n] for n in params}
    minus = {n: params[n] - eps * direction[n] for n in params}
    hi, _ = model.forward(plus, mels)
    lo, _ = model.forward(minus, mels)
    fd = float(np.sum((hi - lo) * weight)) / (2 * eps)
    analytic = sum(float(np.sum(grads[n] * direction[n])) for n in params)
    np.testing.assert_allclose(analytic, fd, rtol=1e-6)


def test_discriminator_config_validation():
    assert D_CFG.in_channels == 1
    assert D_CFG_MU.in_channels == 2
    assert DiscriminatorConfig(augmentation_conditional=True, mu_dim=2).in_channels == 3
    with pytest.raises(ConfigError):
        DiscriminatorConfig(kernel_sizes=(15, 41, 41, 5))
    with pytest.raises(ConfigError):
        DiscriminatorConfig(kernel_sizes=(15, 40, 41, 5, 3))
    with pytest.raises(ConfigError):
        DiscriminatorConfig(num_scales=0)


def test_condition_input_shapes_and_content():
    x = np.linspace(-1, 1, 50)
    out = condition_input(x, AugmentationState.scalar(0.7))
    assert out.shape == (50, 2)
    np.testing.assert_array_equal(out[:, 0], x)
    assert np.all(out[:, 1] == 0.7)

    out2 = condition_input(Waveform(samples=x, sample_rate=22050),
                           np.array([1.5, -2.0]))
    assert out2.shape == (50, 3)
    assert np.all(out2[:, 1] == 1.5) and np.all(out2[:, 2] == -2.0)

    with pytest.raises(InvalidInputError):
        condition_input(np.zeros((2, 10)), np.array([1.0]))
    with pytest.raises(InvalidInputError):
        condition_input(x, np.array([]))
    with pytest.raises(InvalidInputError):
        condition_input(x, np.array([np.nan]))


def test_discriminator_score_and_feature_shapes(rng):
    params = init_discriminator(D_CFG, 0)
    x = rng.standard_normal((3, 256))
    scores, features, _ = Discriminator(D_CFG).forward(params, x)
    assert len(scores) == 2 and len(features) == 2
    # strides multiply to 4; scale 1 sees the input pooled by 2
    assert scores[0].shape == (3, 1, 64)
    assert scores[1].shape == (3, 1, 32)
    for feats, score in zip(features, scores):
        assert len(feats) == 5
        assert feats[-1] is score


def test_discriminator_mu_contract(rng):
    x = rng.standard_normal((2, 128))
    mu = np.zeros((2, 1))
    with pytest.raises(ConfigError):
        Discriminator(D_CFG_MU).forward(init_discriminator(D_CFG_MU, 0), x)
    with pytest.raises(ConfigError):
        Discriminator(D_CFG).forward(init_discriminator(D_CFG, 0), x, mu=mu)
    with pytest.raises(ConfigError):
        Discriminator(D_CFG_MU).forward(
            init_discriminator(D_CFG_MU, 0), x, mu=np.zeros((2, 3)))


def test_discriminator_mu_changes_scores(rng):
    params = init_discriminator(D_CFG_MU, 0)
    x = rng.standard_normal((1, 128))
    model = Discriminator(D_CFG_MU)
    s0, _, _ = model.forward(params, x, mu=np.zeros((1, 1)))
    s1, _, _ = model.forward(params, x, mu=np.ones((1, 1)))
    assert not np.allclose(s0[0], s1[0])


@pytest.mark.parametrize("cfg", [D_CFG, D_CFG_MU], ids=["plain", "conditional"])
def test_discriminator_backward_directional_fd(cfg, rng):
    params = _healthy_params(cfg.param_shapes(), rng)
    x = rng.standard_normal((2, 101))  # odd length exercises pool padding
    mu = rng.standard_normal((2, 1)) if cfg.augmentation_conditional else None
    model = Discriminator(cfg)

    scores, features, cache = model.forward(params, x, mu=mu, want_cache=True)
    g_scores = [rng.standard_normal(s.shape) for s in scores]
    g_feats = [[rng.standard_normal(f.shape) for f in fs] for fs in features]
    grads, gx, gmu = model.backward(params, cache, g_scores, g_feats,
                                    need_gx=True)

    def loss(p, xx, mm):
        ss, ff, _ = model.forward(p, xx, mu=mm)
        total = sum(float(np.sum(s * g)) for s, g in zip(ss, g_scores))
        total += sum(
            float(np.sum(f * g))
            for fs, gs in zip(ff, g_feats) for f, g in zip(fs, gs)
        )
        return total

    # eps below the smallest pre-activation magnitude so the perturbation
    # never crosses a leaky-ReLU kink
    eps = 1e-6
    direction = {n: rng.standard_normal(p.shape) for n, p in params.items()}
    plus = {n: params[n] + eps * direction[n] for n in params}
    minus = {n: params[n] - eps * direction[n] for n in params}
    fd = (loss(plus, x, mu) - loss(minus, x, mu)) / (2 * eps)
    analytic = sum(float(np.sum(grads[n] * direction[n])) for n in params)
    np.testing.assert_allclose(analytic, fd, rtol=1e-6)

    dx = rng.standard_normal(x.shape)
    fd_x = (loss(params, x + eps * dx, mu) - loss(params, x - eps * dx, mu)) / (2 * eps)
    np.testing.assert_allclose(float(np.sum(gx * dx)), fd_x, rtol=1e-6)

    if cfg.augmentation_conditional:
        dmu = rng.standard_normal(mu.shape)
        fd_mu = (loss(params, x, mu + eps * dmu) - loss(params, x, mu - eps * dmu)) / (2 * eps)
        np.testing.assert_allclose(float(np.sum(gmu * dmu)), fd_mu, rtol=1e-6)
    else:
        assert gmu is None


def test_discriminator_backward_can_skip_param_grads(rng):
    params = init_discriminator(D_CFG, 0)
    x = rng.standard_normal((1, 64))
    model = Discriminator(D_CFG)
    scores, _, cache = model.forward(params, x, want_cache=True)
    grads, gx, _ = model.backward(
        params, cache, g_scores=[np.ones_like(s) for s in scores],
        need_gx=True, need_gparams=False,
    )
    assert grads is None
    assert gx.shape == x.shape


def test_discriminate_single_wave(rng):
    wave = Waveform(samples=rng.uniform(-0.5, 0.5, size=200), sample_rate=22050)
    scores, features = discriminate(init_discriminator(D_CFG, 0), wave, D_CFG)
    assert len(scores) == 2 and scores[0].ndim == 1
    with pytest.raises(ConfigError):
        discriminate(init_discriminator(D_CFG_MU, 0), wave, D_CFG_MU)
    s2, _ = discriminate(init_discriminator(D_CFG_MU, 0), wave, D_CFG_MU,
                         mu=AugmentationState.scalar(0.3))
    assert len(s2) == 2
