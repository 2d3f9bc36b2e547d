"""Domain adaptation toolkit for style-based generators.

Restricted parameter spaces, style-space domain directions, the three
adaptation objectives, image-to-image translation, cross-domain morphing,
evaluation metrics, and an HTTP service over a shared artifact registry.
"""

from .arch import (
    ArchitectureDescriptor,
    GeneratorWeights,
    SamplerConfig,
    StyleSpacePoint,
    affine_styles,
    build_architecture,
    generate,
    map_latent,
    modulated_conv,
    random_weights,
    sample_z,
    synthesize,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .directions import StyleDomainDirection, apply, compose_with_edit, load, mix, save, transfer
from .paramspace import (
    AFFINE,
    FULL,
    MAPPING,
    STYLESPACE,
    SYNT_CONV,
    ParamSpaceKind,
    ParameterSelection,
    WeightOffsets,
    affine_plus,
    apply_offsets,
    count,
    parse_kind,
    reset_to_parent,
    select,
    stylespace_plus,
)
from .trainer import AdaptationResult, Hyperparams, adapt, adapt_adversarial, invert, preset

__version__ = "0.1.0"

__all__ = [
    "AdaptationResult",
    "ArchitectureDescriptor",
    "GeneratorWeights",
    "Hyperparams",
    "ParamSpaceKind",
    "ParameterSelection",
    "SamplerConfig",
    "StyleDomainDirection",
    "StyleSpacePoint",
    "WeightOffsets",
    "adapt",
    "adapt_adversarial",
    "affine_styles",
    "affine_plus",
    "apply",
    "apply_offsets",
    "build_architecture",
    "compose_with_edit",
    "count",
    "generate",
    "invert",
    "load",
    "load_checkpoint",
    "map_latent",
    "mix",
    "modulated_conv",
    "parse_kind",
    "preset",
    "random_weights",
    "reset_to_parent",
    "sample_z",
    "save",
    "save_checkpoint",
    "select",
    "stylespace_plus",
    "synthesize",
    "transfer",
    "AFFINE",
    "FULL",
    "MAPPING",
    "STYLESPACE",
    "SYNT_CONV",
]
