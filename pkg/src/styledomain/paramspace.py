"""Trainable-parameter subsets of a generator, and exact counting.

Seven named parameterizations are supported:

* ``Full``       -- mapping + affine + synthesis (incl. tRGB) weights,
* ``SyntConv``   -- synthesis convolutions, constant input, noise gains, tRGB,
* ``Affine``     -- every affine layer, including those feeding tRGB,
* ``Mapping``    -- the mapping network only,
* ``Affine+``    -- Affine plus spatially-uniform kernel offsets for one block,
* ``StyleSpace`` -- one free offset vector per style layer (no generator weights),
* ``StyleSpace+``-- StyleSpace plus the same block offsets.

Counts for the full-scale descriptors reproduce the published size columns
to table rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from .arch import DTYPE, ArchitectureDescriptor, GeneratorWeights, expected_shapes
from .errors import ConfigurationError, FingerprintError, ShapeError

DEFAULT_OFFSET_BLOCK = 64  # block resolution with the best adaptation quality

_BASE_KINDS = ("Full", "SyntConv", "Affine", "Mapping", "StyleSpace")
_BLOCK_KINDS = ("AffinePlus", "StyleSpacePlus")


@dataclass(frozen=True)
class ParamSpaceKind:
    """One of the named parameterizations; block kinds carry a resolution."""

    name: str
    block_resolution: int | None = None

    def __post_init__(self):
        if self.name in _BASE_KINDS:
            if self.block_resolution is not None:
                raise ConfigurationError(f"{self.name} takes no block resolution")
        elif self.name in _BLOCK_KINDS:
            if self.block_resolution is None:
                raise ConfigurationError(f"{self.name} requires a block resolution")
        else:
            raise ConfigurationError(f"unknown parameter space {self.name!r}")

    @property
    def uses_offsets(self) -> bool:
        return self.name in _BLOCK_KINDS

    @property
    def is_stylespace(self) -> bool:
        return self.name in ("StyleSpace", "StyleSpacePlus")

    def __str__(self) -> str:
        if self.uses_offsets:
            base = "Affine+" if self.name == "AffinePlus" else "StyleSpace+"
            return f"{base}{self.block_resolution}"
        return self.name


FULL = ParamSpaceKind("Full")
SYNT_CONV = ParamSpaceKind("SyntConv")
AFFINE = ParamSpaceKind("Affine")
MAPPING = ParamSpaceKind("Mapping")
STYLESPACE = ParamSpaceKind("StyleSpace")


def affine_plus(block_resolution: int = DEFAULT_OFFSET_BLOCK) -> ParamSpaceKind:
    return ParamSpaceKind("AffinePlus", block_resolution)


def stylespace_plus(block_resolution: int = DEFAULT_OFFSET_BLOCK) -> ParamSpaceKind:
    return ParamSpaceKind("StyleSpacePlus", block_resolution)


def parse_kind(text: str, default_block: int | None = None) -> ParamSpaceKind:
    """Parse CLI spellings like ``stylespace``, ``affine+``, ``affine+64``."""
    t = text.strip().lower()
    aliases = {
        "full": FULL,
        "syntconv": SYNT_CONV,
        "affine": AFFINE,
        "mapping": MAPPING,
        "stylespace": STYLESPACE,
    }
    if t in aliases:
        return aliases[t]
    for prefix, name in (("affine+", "AffinePlus"), ("stylespace+", "StyleSpacePlus")):
        if t.startswith(prefix):
            rest = t[len(prefix):]
            block = int(rest) if rest else (default_block or DEFAULT_OFFSET_BLOCK)
            return ParamSpaceKind(name, block)
    raise ConfigurationError(f"cannot parse parameter space {text!r}")


@dataclass(frozen=True)
class WeightOffsets:
    """Spatially-uniform kernel offsets for one synthesis block.

    ``delta_theta_1``/``delta_theta_2`` have shape (out, in, 1, 1) for the
    block's two convolutions; ``delta_trgb`` is (3, in, 1, 1) for its tRGB
    layer.  Broadcast over the spatial axes when added to the raw kernels.
    """

    block_resolution: int
    delta_theta_1: torch.Tensor
    delta_theta_2: torch.Tensor
    delta_trgb: torch.Tensor

    def __post_init__(self):
        for t in (self.delta_theta_1, self.delta_theta_2, self.delta_trgb):
            if t.dim() != 4 or t.shape[2:] != (1, 1):
                raise ShapeError("offset tensors must have 1x1 spatial extent")
            if not torch.isfinite(t).all():
                raise ShapeError("offset tensors must be finite")

    def named_tensors(self) -> dict[str, torch.Tensor]:
        r = self.block_resolution
        return {
            f"offsets.{r}.conv1": self.delta_theta_1,
            f"offsets.{r}.conv2": self.delta_theta_2,
            f"offsets.{r}.trgb": self.delta_trgb,
        }

    def scaled(self, coeff: float) -> "WeightOffsets":
        return WeightOffsets(
            self.block_resolution,
            coeff * self.delta_theta_1,
            coeff * self.delta_theta_2,
            coeff * self.delta_trgb,
        )

    def add(self, other: "WeightOffsets", coeff: float = 1.0) -> "WeightOffsets":
        if other.block_resolution != self.block_resolution:
            raise ShapeError("offsets target different blocks")
        return WeightOffsets(
            self.block_resolution,
            self.delta_theta_1 + coeff * other.delta_theta_1,
            self.delta_theta_2 + coeff * other.delta_theta_2,
            self.delta_trgb + coeff * other.delta_trgb,
        )


def offset_shapes(desc: ArchitectureDescriptor, block_resolution: int) -> dict[str, tuple[int, ...]]:
    c1, c2 = desc.block_conv_indices(block_resolution)
    convs = desc.conv_layers
    tr = desc.trgb_layers[desc.trgb_index(block_resolution)]
    return {
        f"offsets.{block_resolution}.conv1": (convs[c1].out_channels, convs[c1].in_channels, 1, 1),
        f"offsets.{block_resolution}.conv2": (convs[c2].out_channels, convs[c2].in_channels, 1, 1),
        f"offsets.{block_resolution}.trgb": (3, tr.in_channels, 1, 1),
    }


def zero_offsets(desc: ArchitectureDescriptor, block_resolution: int) -> WeightOffsets:
    shapes = offset_shapes(desc, block_resolution)
    r = block_resolution
    return WeightOffsets(
        block_resolution=r,
        delta_theta_1=torch.zeros(shapes[f"offsets.{r}.conv1"], dtype=DTYPE),
        delta_theta_2=torch.zeros(shapes[f"offsets.{r}.conv2"], dtype=DTYPE),
        delta_trgb=torch.zeros(shapes[f"offsets.{r}.trgb"], dtype=DTYPE),
    )


@dataclass(frozen=True)
class ParameterSelection:
    """The named, disjoint tensor slots trainable under one parameterization."""

    kind: ParamSpaceKind
    slots: tuple[tuple[str, tuple[int, ...], int], ...]  # (name, shape, count)
    total: int

    @property
    def slot_names(self) -> tuple[str, ...]:
        return tuple(name for name, _, _ in self.slots)


def _slots_from_shapes(shapes: dict[str, tuple[int, ...]], names: list[str]):
    out = []
    for n in sorted(names):
        shape = shapes[n]
        out.append((n, shape, int(math.prod(shape)) if shape else 1))
    return tuple(out)


def select(desc: ArchitectureDescriptor, kind: ParamSpaceKind) -> ParameterSelection:
    """Enumerate the trainable slots of ``kind`` for this architecture.

    Pure and order-stable: slot lists are sorted by name.
    """
    shapes = dict(expected_shapes(desc))
    shapes.pop("stats.w_mean")  # a statistic, never trainable

    mapping = [n for n in shapes if n.startswith("mapping.")]
    affine = [n for n in shapes if n.startswith("affine.")]
    synth = [n for n in shapes if n.startswith("synthesis.") or n.startswith("trgb.")]

    if kind.uses_offsets:
        if kind.block_resolution is None:  # unreachable; guarded in __post_init__
            raise ConfigurationError("block kind without resolution")
        off = offset_shapes(desc, kind.block_resolution)
        shapes.update(off)
        off_names = list(off)
    else:
        off_names = []

    style_shapes = {
        f"delta_s.{i}": (layer.in_channels,) for i, layer in enumerate(desc.style_layers)
    }
    shapes.update(style_shapes)

    if kind.name == "Full":
        names = mapping + affine + synth
    elif kind.name == "SyntConv":
        names = synth
    elif kind.name == "Affine":
        names = affine
    elif kind.name == "Mapping":
        names = mapping
    elif kind.name == "AffinePlus":
        names = affine + off_names
    elif kind.name == "StyleSpace":
        names = list(style_shapes)
    elif kind.name == "StyleSpacePlus":
        names = list(style_shapes) + off_names
    else:  # pragma: no cover
        raise ConfigurationError(f"unknown kind {kind}")

    slots = _slots_from_shapes(shapes, names)
    return ParameterSelection(kind=kind, slots=slots, total=sum(c for _, _, c in slots))


def count(desc: ArchitectureDescriptor, kind: ParamSpaceKind) -> int:
    """Number of trainable scalars under ``kind``; equals ``select(...).total``."""
    return select(desc, kind).total


def apply_offsets(
    base: GeneratorWeights, offsets: WeightOffsets
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Effective kernels for the offsets' block: raw kernel + broadcast delta.

    Returns the two convolution kernels and the tRGB kernel; ``base`` is
    never modified.
    """
    desc = base.descriptor
    c1, c2 = desc.block_conv_indices(offsets.block_resolution)
    ti = desc.trgb_index(offsets.block_resolution)
    k1, k2, kt = base.conv_kernels[c1], base.conv_kernels[c2], base.trgb_kernels[ti]
    for name, kern, delta in (
        ("conv1", k1, offsets.delta_theta_1),
        ("conv2", k2, offsets.delta_theta_2),
        ("trgb", kt, offsets.delta_trgb),
    ):
        if kern.shape[:2] != delta.shape[:2]:
            raise ShapeError(
                f"offset {name} channels {tuple(delta.shape[:2])} do not match "
                f"kernel {tuple(kern.shape[:2])}"
            )
    return k1 + offsets.delta_theta_1, k2 + offsets.delta_theta_2, kt + offsets.delta_trgb


_COMPONENTS = ("mapping", "affine", "synthesis")


def reset_to_parent(
    child: GeneratorWeights, parent: GeneratorWeights, components: str | tuple[str, ...]
) -> GeneratorWeights:
    """Copy whole components (mapping / affine / synthesis) back from the parent.

    Synthesis covers the convolution stack including tRGB kernels and the
    constant input.  Requires the same architecture fingerprint.
    """
    if child.descriptor.fingerprint != parent.descriptor.fingerprint:
        raise FingerprintError("child and parent have different architectures")
    if isinstance(components, str):
        components = (components,)
    for c in components:
        if c not in _COMPONENTS:
            raise ConfigurationError(f"unknown component {c!r}; expected one of {_COMPONENTS}")
    parent_named = parent.named_tensors()
    prefixes = {
        "mapping": ("mapping.",),
        "affine": ("affine.",),
        "synthesis": ("synthesis.", "trgb."),
    }
    updates = {}
    for c in components:
        for name, tensor in parent_named.items():
            if name.startswith(prefixes[c]):
                updates[name] = tensor.clone()
    return child.replace_tensors(updates)
