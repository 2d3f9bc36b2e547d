"""Domain directions in style space: algebra, transfer, and serialization.

A direction is a per-layer offset ``delta_s`` added to every sampled style
vector; the extended variant additionally carries spatially-uniform kernel
offsets for one synthesis block.  Directions are immutable values: every
operation returns a new one.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import torch

from .arch import (
    DTYPE,
    ArchitectureDescriptor,
    GeneratorWeights,
    SamplerConfig,
    StyleSpacePoint,
    affine_styles,
    map_latent,
    synthesize,
    tensor_bytes,
)
from .errors import ConfigurationError, FingerprintError, SerializationError, ShapeError
from .paramspace import WeightOffsets
from .container import read_container, write_container

MAGIC = b"SDDIR001"


@dataclass(frozen=True)
class StyleDomainDirection:
    """An offset in style space (optionally plus block weight offsets)."""

    delta_styles: tuple[torch.Tensor, ...]
    fingerprint: str
    domain_label: str = ""
    offsets: WeightOffsets | None = None
    training_meta: dict = field(default_factory=dict)

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return tuple(int(d.shape[-1]) for d in self.delta_styles)

    def validate_for(self, desc: ArchitectureDescriptor) -> None:
        if desc.fingerprint != self.fingerprint:
            raise FingerprintError(
                f"direction was trained for fingerprint {self.fingerprint[:12]}..., "
                f"generator is {desc.fingerprint[:12]}..."
            )
        if self.layer_dims != desc.style_dims:
            raise ShapeError("direction layer widths do not match the descriptor")

    def payload_hash(self) -> str:
        h = hashlib.sha256()
        for d in self.delta_styles:
            h.update(tensor_bytes(d))
        if self.offsets is not None:
            for _, t in sorted(self.offsets.named_tensors().items()):
                h.update(tensor_bytes(t))
        return h.hexdigest()


@dataclass(frozen=True)
class EditDirection:
    """A precomputed in-domain editing direction (same shape, no offsets)."""

    delta_styles: tuple[torch.Tensor, ...]
    fingerprint: str
    attribute_label: str = ""


def zero_direction(
    desc: ArchitectureDescriptor, domain_label: str = "", offsets: WeightOffsets | None = None
) -> StyleDomainDirection:
    return StyleDomainDirection(
        delta_styles=tuple(torch.zeros(d, dtype=DTYPE) for d in desc.style_dims),
        fingerprint=desc.fingerprint,
        domain_label=domain_label,
        offsets=offsets,
    )


def apply(
    styles: StyleSpacePoint, direction: StyleDomainDirection, strength: float = 1.0
) -> StyleSpacePoint:
    """Shift every style vector by ``strength`` times the direction."""
    if styles.fingerprint != direction.fingerprint:
        raise FingerprintError("style point and direction come from different architectures")
    if len(styles.styles) != len(direction.delta_styles):
        raise ShapeError("layer count mismatch between styles and direction")
    shifted = tuple(
        s + strength * d for s, d in zip(styles.styles, direction.delta_styles)
    )
    return StyleSpacePoint(styles=shifted, fingerprint=styles.fingerprint)


def mix(
    terms: Sequence[tuple[StyleDomainDirection, float]]
) -> StyleDomainDirection:
    """Linear combination of directions (and of their offsets, if present)."""
    if not terms:
        raise ConfigurationError("mix() needs at least one term")
    first = terms[0][0]
    has_offsets = first.offsets is not None
    for d, _ in terms[1:]:
        if d.fingerprint != first.fingerprint:
            raise FingerprintError("cannot mix directions from different architectures")
        if (d.offsets is not None) != has_offsets:
            raise ConfigurationError(
                "cannot mix directions with and without weight offsets"
            )
    delta = tuple(
        sum(c * d.delta_styles[i] for d, c in terms)
        for i in range(len(first.delta_styles))
    )
    offsets = None
    if has_offsets:
        offsets = terms[0][0].offsets.scaled(terms[0][1])
        for d, c in terms[1:]:
            offsets = offsets.add(d.offsets, c)
    label = " + ".join(f"{c:g}*{d.domain_label or 'unnamed'}" for d, c in terms)
    return StyleDomainDirection(
        delta_styles=delta,
        fingerprint=first.fingerprint,
        domain_label=label,
        offsets=offsets,
        training_meta={"mixed_from": [d.domain_label for d, _ in terms]},
    )


def negate(direction: StyleDomainDirection) -> StyleDomainDirection:
    return mix([(direction, -1.0)])


def compose_with_edit(
    direction: StyleDomainDirection, edit: EditDirection, edit_strength: float
) -> StyleDomainDirection:
    """Add a scaled editing direction to the style offsets; offsets untouched."""
    if edit.fingerprint != direction.fingerprint:
        raise FingerprintError("edit direction targets a different architecture")
    delta = tuple(
        d + edit_strength * e for d, e in zip(direction.delta_styles, edit.delta_styles)
    )
    return replace(direction, delta_styles=delta)


@dataclass(frozen=True)
class DirectionBinding:
    """A direction routed to a specific (aligned) generator.

    ``warning`` is set when the target generator's lineage does not record
    the direction's source architecture; application still proceeds since
    transfer to out-of-lineage children degrades gracefully rather than
    failing.
    """

    direction: StyleDomainDirection
    weights: GeneratorWeights
    warning: str | None = None

    def apply(self, styles: StyleSpacePoint, strength: float = 1.0) -> StyleSpacePoint:
        return apply(styles, self.direction, strength)

    def generate(
        self,
        z: torch.Tensor,
        cfg: SamplerConfig = SamplerConfig(),
        strength: float = 1.0,
    ) -> torch.Tensor:
        w = map_latent(self.weights, z, cfg)
        styles = self.apply(affine_styles(self.weights, w), strength)
        return synthesize(self.weights, styles, offsets=self.direction.offsets, cfg=cfg)


def transfer(
    direction: StyleDomainDirection, target: GeneratorWeights
) -> DirectionBinding:
    """Bind a direction to another generator with the same architecture."""
    direction.validate_for(target.descriptor)
    warning = None
    if direction.fingerprint not in target.lineage:
        warning = (
            "target lineage does not record the direction's source architecture; "
            "transfer quality is not guaranteed"
        )
    return DirectionBinding(direction=direction, weights=target, warning=warning)


def save(direction: StyleDomainDirection, path: str | Path) -> None:
    tensors = {f"delta_s.{i}": d for i, d in enumerate(direction.delta_styles)}
    header = {
        "kind": "style-domain-direction",
        "fingerprint": direction.fingerprint,
        "domain_label": direction.domain_label,
        "training_meta": direction.training_meta,
        "offsets_block": None,
    }
    if direction.offsets is not None:
        header["offsets_block"] = direction.offsets.block_resolution
        tensors.update(direction.offsets.named_tensors())
    write_container(path, MAGIC, header, tensors)


def load(path: str | Path) -> StyleDomainDirection:
    header, tensors = read_container(path, MAGIC)
    if header.get("kind") != "style-domain-direction":
        raise SerializationError(f"{path}: not a direction file")
    if not header.get("fingerprint"):
        raise SerializationError(f"{path}: direction file lacks a fingerprint")
    n_layers = sum(1 for k in tensors if k.startswith("delta_s."))
    delta = tuple(tensors[f"delta_s.{i}"] for i in range(n_layers))
    offsets = None
    block = header.get("offsets_block")
    if block is not None:
        offsets = WeightOffsets(
            block_resolution=int(block),
            delta_theta_1=tensors[f"offsets.{block}.conv1"],
            delta_theta_2=tensors[f"offsets.{block}.conv2"],
            delta_trgb=tensors[f"offsets.{block}.trgb"],
        )
    return StyleDomainDirection(
        delta_styles=delta,
        fingerprint=header["fingerprint"],
        domain_label=header.get("domain_label", ""),
        offsets=offsets,
        training_meta=header.get("training_meta", {}),
    )
