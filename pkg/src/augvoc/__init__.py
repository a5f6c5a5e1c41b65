"""Desk-scale GAN vocoder training with augmentation-state conditioning.

The package trains a compact mel-to-waveform generator against a multi-scale
discriminator. The discriminator can optionally receive the augmentation
state of each training sample as an extra input channel, so that augmented
speech is judged relative to how it was augmented instead of being mistaken
for clean speech.
"""

__version__ = "0.1.0"


class AugvocError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(AugvocError, ValueError):
    """A configuration value or combination of values is invalid."""


class InvalidInputError(AugvocError, ValueError):
    """A runtime input (waveform, state vector, file) violates a contract."""


class DivergenceError(AugvocError, RuntimeError):
    """Training produced a non-finite loss or parameter; the step aborted."""

    def __init__(self, detail, step=None):
        at = "" if step is None else f" at step {step}"
        super().__init__(f"training diverged{at}: {detail}")
        self.step = step
        self.detail = detail
