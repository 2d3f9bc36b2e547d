"""Downstream applications: cross-domain translation and morphing.

Translation inverts a source image to a latent with the source-domain
generator and re-renders it with an aligned target-domain generator;
the reference-based variant splices style codes from a source and a
reference inversion.  Morphing renders smooth transitions by ramping a
direction, blending aligned generator weights, or crossfading two
directions; stage boundaries must agree so frame sequences are continuous.
"""
from __future__ import annotations

from dataclasses import dataclass, replace as dc_replace
from typing import Sequence

import torch

from .arch import (
    GeneratorWeights,
    SamplerConfig,
    StyleSpacePoint,
    affine_styles,
    map_latent,
    synthesize,
)
from .directions import StyleDomainDirection, apply as apply_direction, mix
from .errors import ConfigurationError, FingerprintError, PlanError, ShapeError
from .trainer import invert

DEFAULT_TRANSLATION_STEPS = 1000
DEFAULT_PSI_OPT = 0.7
DEFAULT_PSI_INFER = 0.8
DEFAULT_STYLE_SPLIT = 6


@dataclass(frozen=True)
class TranslationConfig:
    steps: int = DEFAULT_TRANSLATION_STEPS
    psi_opt: float = DEFAULT_PSI_OPT
    psi_infer: float = DEFAULT_PSI_INFER
    style_split_index: int = DEFAULT_STYLE_SPLIT

    def __post_init__(self):
        if self.steps < 0 or self.style_split_index < 0:
            raise ConfigurationError("steps and split index must be non-negative")


def _check_aligned(a: GeneratorWeights, b: GeneratorWeights) -> None:
    if a.descriptor.fingerprint != b.descriptor.fingerprint:
        raise FingerprintError("generators are not aligned (different architectures)")


def translate(
    source: torch.Tensor,
    src_gen: GeneratorWeights,
    tgt_gen: GeneratorWeights,
    cfg: TranslationConfig = TranslationConfig(),
) -> torch.Tensor:
    """Unconditional translation: invert on the source generator, render on the target."""
    _check_aligned(src_gen, tgt_gen)
    z_star = invert(src_gen, source, steps=cfg.steps, psi=cfg.psi_opt)
    infer = SamplerConfig(truncation_psi=cfg.psi_infer)
    w = map_latent(tgt_gen, z_star, infer)
    return synthesize(tgt_gen, affine_styles(tgt_gen, w), cfg=infer)


def splice_styles(
    head: StyleSpacePoint, tail: StyleSpacePoint, split: int
) -> StyleSpacePoint:
    """Style codes of ``head`` up to (excluding) ``split``, ``tail`` after."""
    if head.fingerprint != tail.fingerprint:
        raise FingerprintError("cannot splice style codes from different architectures")
    n = len(head.styles)
    if not (0 <= split <= n):
        raise ConfigurationError(f"split {split} exceeds the {n} style layers")
    combined = tuple(head.styles[i] if i < split else tail.styles[i] for i in range(n))
    return StyleSpacePoint(styles=combined, fingerprint=head.fingerprint)


def translate_ref(
    source: torch.Tensor,
    reference: torch.Tensor,
    src_gen: GeneratorWeights,
    tgt_gen: GeneratorWeights,
    cfg: TranslationConfig = TranslationConfig(),
) -> torch.Tensor:
    """Reference-based translation: source codes up to the split, reference after.

    Both inversions resolve to style codes through the target generator's
    affine layers; the reference is inverted with the target generator.
    """
    _check_aligned(src_gen, tgt_gen)
    n = tgt_gen.descriptor.num_style_layers
    if cfg.style_split_index > n:
        raise ConfigurationError(f"split {cfg.style_split_index} exceeds the {n} style layers")
    z_src = invert(src_gen, source, steps=cfg.steps, psi=cfg.psi_opt)
    z_ref = invert(tgt_gen, reference, steps=cfg.steps, psi=cfg.psi_opt)
    infer = SamplerConfig(truncation_psi=cfg.psi_infer)
    s_src = affine_styles(tgt_gen, map_latent(tgt_gen, z_src, infer))
    s_ref = affine_styles(tgt_gen, map_latent(tgt_gen, z_ref, infer))
    styles = splice_styles(s_src, s_ref, cfg.style_split_index)
    return synthesize(tgt_gen, styles, cfg=infer)


def morph_weights(
    gen_a: GeneratorWeights, gen_b: GeneratorWeights, alpha: float
) -> GeneratorWeights:
    """Tensorwise linear interpolation between aligned generators.

    Endpoints return the input generators exactly; interior points compute
    ``a + alpha * (b - a)`` per tensor.
    """
    _check_aligned(gen_a, gen_b)
    if not (0.0 <= alpha <= 1.0):
        raise ConfigurationError("alpha must lie in [0, 1]")
    if alpha == 0.0:
        return gen_a
    if alpha == 1.0:
        return gen_b
    a_named = gen_a.named_tensors()
    b_named = gen_b.named_tensors()
    blended = {n: a + alpha * (b_named[n] - a) for n, a in a_named.items()}
    merged = dict.fromkeys(gen_a.lineage)
    merged.update(dict.fromkeys(gen_b.lineage))
    return gen_a.replace_tensors(blended).with_lineage(tuple(merged))


# --- morph plans -------------------------------------------------------------


@dataclass(frozen=True)
class DirectionRamp:
    """Ramp a direction's strength on a fixed generator."""

    gen: GeneratorWeights
    direction: StyleDomainDirection
    strength_from: float = 0.0
    strength_to: float = 1.0

    def state_at(self, t: float):
        s = self.strength_from + t * (self.strength_to - self.strength_from)
        return self.gen, self.direction, s


@dataclass(frozen=True)
class WeightBlend:
    """Blend aligned generator weights with an optional fixed direction."""

    gen_a: GeneratorWeights
    gen_b: GeneratorWeights
    direction: StyleDomainDirection | None = None
    strength: float = 1.0

    def state_at(self, t: float):
        return morph_weights(self.gen_a, self.gen_b, t), self.direction, self.strength


@dataclass(frozen=True)
class DirectionCrossfade:
    """Crossfade two directions on a fixed generator."""

    gen: GeneratorWeights
    direction_a: StyleDomainDirection
    direction_b: StyleDomainDirection

    def state_at(self, t: float):
        return self.gen, mix([(self.direction_a, 1.0 - t), (self.direction_b, t)]), 1.0


Stage = DirectionRamp | WeightBlend | DirectionCrossfade


@dataclass(frozen=True)
class MorphPlan:
    stages: tuple[Stage, ...]
    frames_per_stage: int = 8

    def __post_init__(self):
        if not self.stages:
            raise PlanError("a morph plan needs at least one stage")
        if self.frames_per_stage < 2:
            raise PlanError("frames_per_stage must be >= 2")


def _render_state(state, z: torch.Tensor, cfg: SamplerConfig) -> torch.Tensor:
    gen, direction, strength = state
    w = map_latent(gen, z, cfg)
    styles = affine_styles(gen, w)
    offsets = None
    if direction is not None:
        styles = apply_direction(styles, direction, strength)
        offsets = direction.offsets
    return synthesize(gen, styles, offsets=offsets, cfg=cfg)


def _states_equal(a, b) -> bool:
    gen_a, dir_a, s_a = a
    gen_b, dir_b, s_b = b
    if gen_a.descriptor.fingerprint != gen_b.descriptor.fingerprint:
        return False
    if gen_a.content_hash() != gen_b.content_hash():
        return False
    if (dir_a is None) != (dir_b is None):
        # a missing direction is equivalent to any direction at strength 0
        present, s = (dir_a, s_a) if dir_a is not None else (dir_b, s_b)
        return s == 0.0 or all(float(d.abs().max()) == 0.0 for d in present.delta_styles)
    if dir_a is None:
        return True
    if s_a != s_b:
        return False
    return dir_a.payload_hash() == dir_b.payload_hash()


def validate_plan(plan: MorphPlan) -> None:
    """Check fingerprint agreement and boundary continuity between stages."""
    fp = plan.stages[0].state_at(0.0)[0].descriptor.fingerprint
    for stage in plan.stages:
        for t in (0.0, 1.0):
            gen, direction, _ = stage.state_at(t)
            if gen.descriptor.fingerprint != fp:
                raise PlanError("stages reference differently shaped generators")
            if direction is not None:
                direction.validate_for(gen.descriptor)
    for i in range(len(plan.stages) - 1):
        end = plan.stages[i].state_at(1.0)
        start = plan.stages[i + 1].state_at(0.0)
        if not _states_equal(end, start):
            raise PlanError(
                f"stage {i} ends in a different state than stage {i + 1} begins"
            )


def plan_state(plan: MorphPlan, position: float):
    """Resolve a schedule position in [0, 1] to a renderable state."""
    if not (0.0 <= position <= 1.0):
        raise ConfigurationError("position must lie in [0, 1]")
    n = len(plan.stages)
    scaled = position * n
    idx = min(int(scaled), n - 1)
    return plan.stages[idx].state_at(scaled - idx)


def render_frame(
    plan: MorphPlan, position: float, z: torch.Tensor, cfg: SamplerConfig
) -> torch.Tensor:
    validate_plan(plan)
    return _render_state(plan_state(plan, position), z, cfg)


def render_morph(
    plan: MorphPlan, z: torch.Tensor, cfg: SamplerConfig = SamplerConfig()
) -> list[torch.Tensor]:
    """Render ``frames_per_stage`` frames per stage, endpoints included.

    Consecutive stages repeat their shared boundary frame, which is
    therefore bit-identical across the stage seam.
    """
    validate_plan(plan)
    frames: list[torch.Tensor] = []
    ts = torch.linspace(0.0, 1.0, plan.frames_per_stage, dtype=torch.float64)
    for stage in plan.stages:
        for t in ts.tolist():
            frames.append(_render_state(stage.state_at(t), z, cfg))
    return frames


def plan_from_document(doc: dict, resolve_generator, resolve_direction) -> MorphPlan:
    """Build a plan from its JSON schedule document.

    ``resolve_generator`` / ``resolve_direction`` map the document's artifact
    references (paths or registry ids) to loaded objects.
    """
    stages: list[Stage] = []
    for raw in doc.get("stages", []):
        kind = raw.get("type")
        if kind == "direction_ramp":
            stages.append(
                DirectionRamp(
                    gen=resolve_generator(raw["generator"]),
                    direction=resolve_direction(raw["direction"]),
                    strength_from=float(raw.get("from", 0.0)),
                    strength_to=float(raw.get("to", 1.0)),
                )
            )
        elif kind == "weight_blend":
            stages.append(
                WeightBlend(
                    gen_a=resolve_generator(raw["generator_a"]),
                    gen_b=resolve_generator(raw["generator_b"]),
                    direction=resolve_direction(raw["direction"]) if raw.get("direction") else None,
                    strength=float(raw.get("strength", 1.0)),
                )
            )
        elif kind == "direction_crossfade":
            stages.append(
                DirectionCrossfade(
                    gen=resolve_generator(raw["generator"]),
                    direction_a=resolve_direction(raw["direction_a"]),
                    direction_b=resolve_direction(raw["direction_b"]),
                )
            )
        else:
            raise PlanError(f"unknown stage type {kind!r}")
    return MorphPlan(
        stages=tuple(stages), frames_per_stage=int(doc.get("frames_per_stage", 8))
    )


def reverse_plan(plan: MorphPlan) -> MorphPlan:
    """The same schedule traversed backwards."""
    reversed_stages: list[Stage] = []
    for stage in reversed(plan.stages):
        if isinstance(stage, DirectionRamp):
            reversed_stages.append(
                dc_replace(
                    stage,
                    strength_from=stage.strength_to,
                    strength_to=stage.strength_from,
                )
            )
        elif isinstance(stage, WeightBlend):
            reversed_stages.append(
                dc_replace(stage, gen_a=stage.gen_b, gen_b=stage.gen_a)
            )
        else:
            reversed_stages.append(
                dc_replace(
                    stage,
                    direction_a=stage.direction_b,
                    direction_b=stage.direction_a,
                )
            )
    return MorphPlan(stages=tuple(reversed_stages), frames_per_stage=plan.frames_per_stage)
