"""Run configuration: one flat key=value document drives every command.

A RunConfig aggregates the mel, model, optimizer, and loss settings plus the
run-level choices (mode, augmentation, strategy, seed, paths). Defaults
follow the published 22.05 kHz recipe: hop 256, 80 mels, lambda_fm 2,
lambda_mel 45, Adam(2e-4, 0.5, 0.9), batch 16. `desk_profile` shrinks
everything (hop 64, 32 mels, 2048-sample segments, batch 8) so full training
runs finish in minutes on a CPU.

Config files are plain text, one `key = value` per line, `#` comments
allowed; tuples are comma-separated integers and fmax accepts `none` for
"half the sample rate". Every key can also be overridden on the command
line. The full resolved configuration is echoed into checkpoints and
reports, so any artifact names the settings that produced it.
"""

import dataclasses
import math
import os
from dataclasses import dataclass

from . import ConfigError
from .dsp import MelConfig
from .losses import LossWeights
from .models import DiscriminatorConfig, GeneratorConfig

MODES = ("baseline", "augcondd")

CONFIG_ENV_VAR = "AUGVOC_CONFIG"


@dataclass(frozen=True)
class RunConfig:
    # run identity
    mode: str = "baseline"
    augmentation: str = "none"
    strategy: str = "S2"
    seed: int = 0
    data_dir: str = "data"
    out_dir: str = "runs/default"
    subset_ratio: float = 1.0
    val_clips: int = 8
    segment_length: int = 8192
    # mel analysis
    sample_rate: int = 22050
    fft_size: int = 1024
    hop_length: int = 256
    win_length: int = 1024
    n_mels: int = 80
    fmin: float = 0.0
    fmax: float | None = None
    log_floor: float = 1e-5
    # generator
    upsample_factors: tuple = (8, 8, 4)
    base_channels: int = 128
    # discriminator
    num_scales: int = 2
    disc_channels: tuple = (16, 64, 64, 64)
    disc_kernels: tuple = (15, 41, 41, 5, 3)
    disc_strides: tuple = (1, 4, 4, 1, 1)
    mu_dim: int = 1
    # optimizer
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.9
    batch_size: int = 16
    max_iterations: int = 1000
    lr_decay: float = 0.999
    grad_clip: float = 0.0
    # loss weights
    lambda_fm: float = 2.0
    lambda_mel: float = 45.0
    # schedule
    checkpoint_every: int = 500
    validate_every: int = 250
    patience: int = 0
    log_wall_time: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.augmentation not in ("none", "mixup", "rate"):
            raise ConfigError(f"unknown augmentation {self.augmentation!r}")
        if self.strategy not in ("S1", "S2"):
            raise ConfigError(f"strategy must be S1 or S2, got {self.strategy!r}")
        if self.mode == "augcondd" and self.augmentation == "none":
            raise ConfigError(
                "mode=augcondd requires augmentation != none: a conditional "
                "discriminator needs an augmentation state to condition on"
            )
        if self.mode == "augcondd" and self.mu_dim != 1:
            raise ConfigError("built-in augmentations provide mu_dim=1")
        if math.prod(self.upsample_factors) != self.hop_length:
            raise ConfigError(
                f"product of upsample_factors {self.upsample_factors} must "
                f"equal hop_length {self.hop_length}"
            )
        if self.segment_length <= 0 or self.segment_length % self.hop_length:
            raise ConfigError(
                f"segment_length {self.segment_length} must be a positive "
                f"multiple of hop_length {self.hop_length}"
            )
        if not 0.0 < self.subset_ratio <= 1.0:
            raise ConfigError("subset_ratio must lie in (0, 1]")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.max_iterations < 0:
            raise ConfigError("max_iterations must be >= 0")
        if self.val_clips < 1:
            raise ConfigError("val_clips must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("betas must lie in [0, 1)")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigError("lr_decay must lie in (0, 1]")
        if self.checkpoint_every < 1 or self.validate_every < 1:
            raise ConfigError("checkpoint_every and validate_every must be >= 1")
        if self.patience < 0:
            raise ConfigError("patience must be >= 0 (0 disables early stop)")
        # Constructing the sub-configs runs their own validation too.
        self.mel_config()
        self.generator_config()
        self.discriminator_config()
        self.loss_weights()

    def mel_config(self) -> MelConfig:
        return MelConfig(
            sample_rate=self.sample_rate, fft_size=self.fft_size,
            hop_length=self.hop_length, win_length=self.win_length,
            n_mels=self.n_mels, fmin=self.fmin, fmax=self.fmax,
            log_floor=self.log_floor,
        )

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(
            n_mels=self.n_mels, upsample_factors=tuple(self.upsample_factors),
            base_channels=self.base_channels,
        )

    def discriminator_config(self) -> DiscriminatorConfig:
        return DiscriminatorConfig(
            num_scales=self.num_scales, channels=tuple(self.disc_channels),
            kernel_sizes=tuple(self.disc_kernels), strides=tuple(self.disc_strides),
            augmentation_conditional=self.mode == "augcondd",
            mu_dim=self.mu_dim,
        )

    def loss_weights(self) -> LossWeights:
        return LossWeights(lambda_fm=self.lambda_fm, lambda_mel=self.lambda_mel)

    def to_flat_dict(self):
        """All fields as plain strings, in field order."""
        out = {}
        for f in dataclasses.fields(self):
            out[f.name] = _format_value(getattr(self, f.name))
        return out


def desk_profile(**overrides) -> RunConfig:
    """Small-everything profile: minutes-long CPU runs, same code paths."""
    base = dict(
        segment_length=2048,
        fft_size=256, hop_length=64, win_length=256, n_mels=32,
        upsample_factors=(4, 4, 4), base_channels=48,
        disc_channels=(16, 24, 24, 24), disc_kernels=(15, 11, 11, 5, 3),
        disc_strides=(1, 4, 4, 1, 1),
        batch_size=8, max_iterations=2000,
        checkpoint_every=1000, validate_every=250,
    )
    base.update(overrides)
    return RunConfig(**base)


PRESETS = {"full": lambda **kw: RunConfig(**kw), "desk": desk_profile}


def _format_value(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(field: dataclasses.Field, raw: str):
    raw = raw.strip()
    name, ftype = field.name, field.type
    if ftype is tuple:
        try:
            return tuple(int(p) for p in raw.split(",") if p.strip())
        except ValueError:
            raise ConfigError(f"{name}: expected comma-separated integers, got {raw!r}")
    if ftype is bool:
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"{name}: expected true/false, got {raw!r}")
    if ftype is int:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{name}: expected an integer, got {raw!r}")
    if ftype is float:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{name}: expected a number, got {raw!r}")
    if ftype == float | None:
        if raw.lower() in ("none", "auto", ""):
            return None
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{name}: expected a number or 'none', got {raw!r}")
    return raw


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def config_from_dict(values, preset=None) -> RunConfig:
    """Build a RunConfig from raw string values plus an optional preset base."""
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    kwargs = {}
    for key, raw in values.items():
        field = _FIELDS.get(key)
        if field is None:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = _parse_value(field, raw) if isinstance(raw, str) else raw
    maker = PRESETS[preset] if preset else RunConfig
    return maker(**kwargs)


def load_config(path, overrides=None, preset=None) -> RunConfig:
    """Parse a flat key=value config file, then apply overrides on top."""
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                if "=" not in stripped:
                    raise ConfigError(
                        f"{path}:{lineno}: expected 'key = value', got {stripped!r}"
                    )
                key, _, raw = stripped.partition("=")
                key = key.strip()
                if key == "preset":
                    preset = preset or raw.strip()
                    continue
                values[key] = raw.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    if overrides:
        values.update(overrides)
    return config_from_dict(values, preset=preset)


def save_config(cfg: RunConfig, path):
    """Write the full resolved configuration, one key per line."""
    lines = [f"{k} = {v}" for k, v in cfg.to_flat_dict().items()]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def default_config_path():
    """Config file named by the environment, if any."""
    return os.environ.get(CONFIG_ENV_VAR)
