"""Deterministic training loop: alternating least-squares GAN updates.

Each step builds a fresh augmented batch, updates the discriminator on its
adversarial loss, then updates the generator on adversarial + feature
matching + mel losses against the just-updated discriminator (one fresh
discriminator forward). All randomness flows through a single generator
stream in a fixed draw order (clip indices, crop offsets, augmentation
parameters), so a (seed, config, corpus) triple fully determines every batch,
every parameter, the metrics log, and each checkpoint, byte for byte when
wall-time logging is disabled.

The reported LossBreakdown describes the step just taken: adv_d is measured
after the discriminator update (from the same forward passes that drive the
generator update), and the generator terms are measured before the generator
update.
"""

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import ConfigError, DivergenceError, InvalidInputError
from .augment import apply_params, apply_params_grad, apply_strategy
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .data import SubsetSpec, load_corpus, sample_segment, split_corpus, subset
from .dsp import log_mel_batch
from .losses import (
    LossWeights,
    adv_d_parts,
    adv_g_parts,
    fm_parts,
    mel_parts,
    total_losses,
)
from .models import Discriminator, Generator, init_discriminator, init_generator

ADAM_EPS = 1e-8

# Config keys that may differ between a checkpoint and a resuming run
# (schedule and output plumbing; nothing that alters the math).
VOLATILE_CONFIG_KEYS = frozenset({
    "max_iterations", "checkpoint_every", "validate_every", "patience",
    "log_wall_time", "out_dir",
})


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.9
    batch_size: int = 16
    max_iterations: int = 1000
    lr_decay: float = 0.999

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("betas must lie in [0, 1)")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    @classmethod
    def from_run(cls, cfg: RunConfig):
        return cls(
            learning_rate=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2,
            batch_size=cfg.batch_size, max_iterations=cfg.max_iterations,
            lr_decay=cfg.lr_decay,
        )


@dataclass
class TrainState:
    step: int
    gen_params: dict
    disc_params: dict
    opt_gen_m: dict
    opt_gen_v: dict
    opt_disc_m: dict
    opt_disc_v: dict
    rng: np.random.Generator
    best_val: tuple | None = None


@dataclass(frozen=True)
class TrainSetup:
    gen: Generator
    disc: Discriminator
    mel_cfg: object
    weights: LossWeights
    opt: OptimizerConfig
    mode: str
    grad_clip: float = 0.0


def make_setup(cfg: RunConfig) -> TrainSetup:
    return TrainSetup(
        gen=Generator(cfg.generator_config()),
        disc=Discriminator(cfg.discriminator_config()),
        mel_cfg=cfg.mel_config(),
        weights=cfg.loss_weights(),
        opt=OptimizerConfig.from_run(cfg),
        mode=cfg.mode,
        grad_clip=cfg.grad_clip,
    )


def init_state(cfg: RunConfig) -> TrainState:
    """Fresh state: child seeds [seed, 0..2] for gen, disc, and the stream."""
    gen_params = init_generator(cfg.generator_config(), [cfg.seed, 0])
    disc_params = init_discriminator(cfg.discriminator_config(), [cfg.seed, 1])
    return TrainState(
        step=0,
        gen_params=gen_params,
        disc_params=disc_params,
        opt_gen_m={k: np.zeros_like(v) for k, v in gen_params.items()},
        opt_gen_v={k: np.zeros_like(v) for k, v in gen_params.items()},
        opt_disc_m={k: np.zeros_like(v) for k, v in disc_params.items()},
        opt_disc_v={k: np.zeros_like(v) for k, v in disc_params.items()},
        rng=np.random.default_rng([cfg.seed, 2]),
    )


def adam_step(params, grads, m, v, lr, beta1, beta2, t, clip=0.0):
    """In-place Adam update at bias-correction time t (1-based)."""
    if clip > 0.0:
        sq = 0.0
        for name in sorted(params):
            sq += float(np.sum(np.square(grads[name])))
        norm = np.sqrt(sq)
        if norm > clip:
            scale = clip / norm
            grads = {k: g * scale for k, g in grads.items()}
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name in params:
        g = grads[name]
        m[name] = beta1 * m[name] + (1.0 - beta1) * g
        v[name] = beta2 * v[name] + (1.0 - beta2) * np.square(g)
        params[name] -= lr * (m[name] / c1) / (np.sqrt(v[name] / c2) + ADAM_EPS)


def _adv_d_value(scores_real, scores_fake):
    per_scale = [
        float(np.mean(np.square(sr - 1.0)) + np.mean(np.square(sf)))
        for sr, sf in zip(scores_real, scores_fake)
    ]
    return float(np.mean(per_scale))


def train_step(state: TrainState, batch, setup: TrainSetup, lr):
    """One D-then-G update on a prepared batch; returns the LossBreakdown.

    Raises DivergenceError (with the step index) if any loss, parameter, or
    optimizer moment leaves the finite range.
    """
    step_index = state.step + 1
    if setup.mode == "augcondd" and batch.kind == "none":
        raise ConfigError("augcondd mode requires an augmented batch")
    x_real = batch.real_array()
    mu = batch.mu_array() if setup.mode == "augcondd" else None
    gen_in = batch.gen_input_array()
    mel_ref = gen_in
    mel_in = gen_in.transpose(0, 2, 1)

    y, gcache = setup.gen.forward(state.gen_params, mel_in, want_cache=True)
    x_g = y[:, 0, :]
    if not np.all(np.isfinite(x_g)):
        raise DivergenceError("generator produced non-finite audio", step_index)
    if batch.strategy == "S1" and batch.kind != "none":
        fake_d, _mu_fake, aug_cache = apply_params(x_g, batch.kind, batch.params)
    else:
        fake_d, aug_cache = x_g, None
    if fake_d.shape != x_real.shape:
        raise InvalidInputError(
            f"fake batch shape {fake_d.shape} != real {x_real.shape}"
        )

    # Discriminator update (generator output treated as a constant).
    sr, _fr, cr = setup.disc.forward(state.disc_params, x_real, mu=mu, want_cache=True)
    sf, _ff, cf = setup.disc.forward(state.disc_params, fake_d, mu=mu, want_cache=True)
    adv_d_pre, g_sr, g_sf = adv_d_parts(sr, sf)
    if not np.isfinite(adv_d_pre):
        raise DivergenceError("non-finite discriminator loss", step_index)
    gd_r, _, _ = setup.disc.backward(state.disc_params, cr, g_scores=g_sr)
    gd_f, _, _ = setup.disc.backward(state.disc_params, cf, g_scores=g_sf)
    gd = {k: gd_r[k] + gd_f[k] for k in gd_r}
    adam_step(state.disc_params, gd, state.opt_disc_m, state.opt_disc_v,
              lr, setup.opt.beta1, setup.opt.beta2, step_index, setup.grad_clip)

    # Generator update against the freshly updated discriminator.
    sr2, fr2, _cr2 = setup.disc.forward(state.disc_params, x_real, mu=mu)
    sf2, ff2, cf2 = setup.disc.forward(state.disc_params, fake_d, mu=mu, want_cache=True)
    adv_g, g_sf2 = adv_g_parts(sf2)
    fm, _g_fr2, g_ff2 = fm_parts(fr2, ff2)
    mel, g_mel_audio = mel_parts(mel_ref, x_g, setup.mel_cfg)
    try:
        breakdown = total_losses(
            {"adv_d": _adv_d_value(sr2, sf2), "adv_g": adv_g, "fm": fm, "mel": mel},
            setup.weights,
        )
    except DivergenceError as exc:
        raise DivergenceError(exc.detail, step_index)

    g_feats = [[setup.weights.lambda_fm * g for g in fs] for fs in g_ff2]
    _, gx_fake, _gmu = setup.disc.backward(
        state.disc_params, cf2, g_scores=g_sf2, g_features=g_feats,
        need_gx=True, need_gparams=False,
    )
    if aug_cache is not None:
        gx_fake = apply_params_grad(aug_cache, gx_fake)
    g_audio = gx_fake + setup.weights.lambda_mel * g_mel_audio
    gg = setup.gen.backward(state.gen_params, gcache, g_audio[:, None, :])
    adam_step(state.gen_params, gg, state.opt_gen_m, state.opt_gen_v,
              lr, setup.opt.beta1, setup.opt.beta2, step_index, setup.grad_clip)

    for group in (state.gen_params, state.disc_params,
                  state.opt_gen_m, state.opt_gen_v,
                  state.opt_disc_m, state.opt_disc_v):
        for name, arr in group.items():
            if not np.all(np.isfinite(arr)):
                raise DivergenceError(f"non-finite values in {name}", step_index)

    state.step = step_index
    return breakdown


def make_batch(train_corpus, cfg: RunConfig, rng, mel_cfg):
    """Draw one training batch: clips, crops, then augmentation parameters."""
    idx = rng.integers(len(train_corpus), size=cfg.batch_size)
    segments = [
        sample_segment(train_corpus.waves[i], cfg.segment_length, rng,
                       cfg.hop_length)
        for i in idx
    ]
    return apply_strategy(segments, cfg.strategy, cfg.augmentation, rng, mel_cfg)


def validation_mel_l1(setup: TrainSetup, gen_params, val_corpus, cfg: RunConfig):
    """Copy-synthesis mel-L1 over whole validation clips.

    Inference conditions: no augmentation; the mel comparison needs no mu at
    all. Identical frame counts are guaranteed because generated length is
    frames * hop.
    """
    mel_cfg = setup.mel_cfg
    total = 0.0
    for w in val_corpus.waves:
        ref, _ = log_mel_batch(w.samples[None, :], mel_cfg)
        audio, _ = setup.gen.forward(gen_params, ref.transpose(0, 2, 1))
        out, _ = log_mel_batch(audio[:, 0, :], mel_cfg)
        total += float(np.mean(np.abs(out - ref)))
    return total / len(val_corpus.waves)


def current_lr(cfg: RunConfig, completed_steps, steps_per_epoch):
    epoch = completed_steps // steps_per_epoch
    return cfg.learning_rate * (cfg.lr_decay ** epoch)


def _log_row(fh, record):
    fh.write(json.dumps(record, sort_keys=True) + "\n")
    fh.flush()


def save_state(path, state: TrainState, cfg: RunConfig):
    # Volatile keys stay out of the echo so runs that differ only in
    # schedule or output paths produce byte-identical checkpoints.
    echo = {
        k: v for k, v in cfg.to_flat_dict().items()
        if k not in VOLATILE_CONFIG_KEYS
    }
    save_checkpoint(
        path,
        step=state.step,
        config_echo=echo,
        rng_state=state.rng.bit_generator.state,
        best_val=state.best_val,
        gen_params=state.gen_params,
        disc_params=state.disc_params,
        opt_gen_m=state.opt_gen_m,
        opt_gen_v=state.opt_gen_v,
        opt_disc_m=state.opt_disc_m,
        opt_disc_v=state.opt_disc_v,
    )


def load_state(path, cfg: RunConfig) -> TrainState:
    """Restore a TrainState, refusing configs that change the math."""
    header, groups = load_checkpoint(path)
    echo = header["config"]
    current = cfg.to_flat_dict()
    clashes = [
        k for k in current
        if k not in VOLATILE_CONFIG_KEYS and echo.get(k) != current[k]
    ]
    if clashes:
        raise ConfigError(
            "checkpoint config disagrees with the active config on: "
            + ", ".join(sorted(clashes))
        )
    rng = np.random.default_rng()
    rng.bit_generator.state = header["rng_state"]
    best = header.get("best_val")
    return TrainState(
        step=header["step"],
        gen_params=groups["gen"],
        disc_params=groups["disc"],
        opt_gen_m=groups["opt.gen.m"],
        opt_gen_v=groups["opt.gen.v"],
        opt_disc_m=groups["opt.disc.m"],
        opt_disc_v=groups["opt.disc.v"],
        rng=rng,
        best_val=None if best is None else (int(best[0]), float(best[1])),
    )


def _checkpoint_path(out_dir, step):
    return os.path.join(out_dir, f"checkpoint_{step:06d}.ckpt")


def run_training(cfg: RunConfig, resume_from=None, callback=None):
    """Full training: data prep, loop, validation, checkpoints, logging.

    Returns a summary dict (final step, best validation, artifact paths).
    The optional callback(step, batch, breakdown, state) observes every step;
    instrumentation only, its return value is ignored.
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    corpus = load_corpus(cfg.data_dir)
    train_c, val_c = split_corpus(corpus, cfg.val_clips)
    if cfg.subset_ratio < 1.0:
        train_c = subset(train_c, SubsetSpec(ratio=cfg.subset_ratio, seed=cfg.seed))
    setup = make_setup(cfg)
    steps_per_epoch = max(1, len(train_c) // cfg.batch_size)

    state = load_state(resume_from, cfg) if resume_from else init_state(cfg)
    log_path = os.path.join(cfg.out_dir, "train_log.jsonl")
    log_fh = open(log_path, "a" if resume_from else "w", encoding="utf-8")
    stale_validations = 0

    def validate_now():
        nonlocal stale_validations
        value = validation_mel_l1(setup, state.gen_params, val_c, cfg)
        if state.best_val is None or value < state.best_val[1]:
            state.best_val = (state.step, value)
            stale_validations = 0
        else:
            stale_validations += 1
        _log_row(log_fh, {"step": state.step, "val_mel_l1": value})
        return value

    try:
        if not resume_from:
            validate_now()
            save_state(_checkpoint_path(cfg.out_dir, state.step), state, cfg)

        while state.step < cfg.max_iterations:
            t0 = time.perf_counter()
            lr = current_lr(cfg, state.step, steps_per_epoch)
            batch = make_batch(train_c, cfg, state.rng, setup.mel_cfg)
            try:
                breakdown = train_step(state, batch, setup, lr)
            except DivergenceError as exc:
                _log_row(log_fh, {
                    "step": exc.step if exc.step is not None else state.step + 1,
                    "event": "divergence", "detail": exc.detail,
                })
                raise
            seconds = time.perf_counter() - t0 if cfg.log_wall_time else 0.0
            record = {"step": state.step, "lr": lr, "seconds": seconds}
            record.update(breakdown.as_dict())
            _log_row(log_fh, record)
            if callback is not None:
                callback(state.step, batch, breakdown, state)

            is_last = state.step >= cfg.max_iterations
            if state.step % cfg.validate_every == 0 or is_last:
                validate_now()
            if state.step % cfg.checkpoint_every == 0 or is_last:
                save_state(_checkpoint_path(cfg.out_dir, state.step), state, cfg)
            if cfg.patience > 0 and stale_validations >= cfg.patience:
                _log_row(log_fh, {"step": state.step, "event": "early_stop",
                                  "patience": cfg.patience})
                break

        final_path = _checkpoint_path(cfg.out_dir, state.step)
        if not os.path.exists(final_path):
            save_state(final_path, state, cfg)
    finally:
        log_fh.close()

    return {
        "final_step": state.step,
        "best_val": state.best_val,
        "log_path": log_path,
        "final_checkpoint": _checkpoint_path(cfg.out_dir, state.step),
        "train_clips": len(train_c),
        "val_clips": len(val_c),
    }


def read_log(path):
    """Parse a metrics log back into a list of records."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def select_best(log_rows, patience=0):
    """Step of the smallest validation mel-L1; ties go to the earliest step.

    `patience` mirrors the early-stopping window used during training and is
    accepted for interface symmetry; selection itself is a pure argmin.
    """
    vals = [(r["step"], r["val_mel_l1"]) for r in log_rows if "val_mel_l1" in r]
    if not vals:
        raise InvalidInputError("log contains no validation rows")
    best_step, _ = min(vals, key=lambda sv: (sv[1], sv[0]))
    return best_step
