"""Generator and discriminator model definitions."""

from .generator import Generator, GeneratorConfig, generate, init_generator
from .discriminator import (
    Discriminator,
    DiscriminatorConfig,
    condition_input,
    discriminate,
    init_discriminator,
)

__all__ = [
    "Generator",
    "GeneratorConfig",
    "generate",
    "init_generator",
    "Discriminator",
    "DiscriminatorConfig",
    "condition_input",
    "discriminate",
    "init_discriminator",
]
