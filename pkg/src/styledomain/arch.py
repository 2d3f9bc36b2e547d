"""Generator structure and its deterministic reference forward pass.

A generator is described statically by an :class:`ArchitectureDescriptor`
(layer shapes, style widths, resolutions) and realized by a
:class:`GeneratorWeights` bundle of plain tensors.  The forward pass is
split into the three stages that matter for restricted fine-tuning:

* ``map_latent``    -- noise ``z`` to intermediate latent ``w`` (with truncation),
* ``affine_styles`` -- ``w`` to the per-layer style vectors ``s_1..s_N``,
* ``synthesize``    -- style vectors to an RGB image through modulated
  convolutions with tRGB skip accumulation.

Everything here is pure and float64 on CPU, so forward passes are
bit-reproducible and cheap enough for exhaustive desk-scale checks.
Weights and descriptors are treated as immutable after construction.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import torch

from .errors import ConfigurationError, NumericError, ShapeError

DTYPE = torch.float64
DEMOD_EPS = 1e-8
W_MEAN_SAMPLES = 10_000
_W_MEAN_SEED = 0x57DA  # fixed so the truncation center is a pure function of the mapping weights

_ACTIVATIONS = ("elu", "lrelu")


@dataclass(frozen=True)
class StyleLayerInfo:
    kind: str  # "conv" | "trgb"
    resolution: int
    in_channels: int
    out_channels: int
    kernel_size: int


@dataclass(frozen=True)
class ArchitectureDescriptor:
    """Complete static description of a generator.

    ``fingerprint`` is a hash of the canonical serialization of every other
    field; equal descriptors always produce equal fingerprints.
    """

    name: str
    base_resolution: int
    output_resolution: int
    channel_schedule: tuple[tuple[int, int], ...]
    mapping_layers: int
    latent_dim: int
    activation: str
    style_layers: tuple[StyleLayerInfo, ...]
    fingerprint: str = field(default="")

    @property
    def num_style_layers(self) -> int:
        return len(self.style_layers)

    @property
    def style_dims(self) -> tuple[int, ...]:
        """Width of each style vector (the modulated layer's input channels)."""
        return tuple(layer.in_channels for layer in self.style_layers)

    @property
    def stylespace_dim(self) -> int:
        return sum(self.style_dims)

    @property
    def conv_layers(self) -> tuple[StyleLayerInfo, ...]:
        return tuple(l for l in self.style_layers if l.kind == "conv")

    @property
    def trgb_layers(self) -> tuple[StyleLayerInfo, ...]:
        return tuple(l for l in self.style_layers if l.kind == "trgb")

    def channels_at(self, resolution: int) -> int:
        for res, ch in self.channel_schedule:
            if res == resolution:
                return ch
        raise ConfigurationError(f"resolution {resolution} not in schedule of {self.name!r}")

    def block_conv_indices(self, resolution: int) -> tuple[int, int]:
        """Indices (into conv_layers) of the two convolutions of one block.

        Only non-base blocks have two convolutions, so ``resolution`` must be
        strictly above the base resolution.
        """
        if resolution <= self.base_resolution:
            raise ConfigurationError(
                f"block resolution {resolution} has a single convolution; "
                "offsets need a two-convolution block"
            )
        for i, (res, _) in enumerate(self.channel_schedule):
            if res == resolution:
                first = 2 * i - 1
                return first, first + 1
        raise ConfigurationError(f"unknown block resolution {resolution} for {self.name!r}")

    def trgb_index(self, resolution: int) -> int:
        for i, (res, _) in enumerate(self.channel_schedule):
            if res == resolution:
                return i
        raise ConfigurationError(f"unknown resolution {resolution} for {self.name!r}")


def _fingerprint_payload(desc: ArchitectureDescriptor) -> str:
    payload = {
        "name": desc.name,
        "base_resolution": desc.base_resolution,
        "output_resolution": desc.output_resolution,
        "channel_schedule": [list(pair) for pair in desc.channel_schedule],
        "mapping_layers": desc.mapping_layers,
        "latent_dim": desc.latent_dim,
        "activation": desc.activation,
        "style_layers": [
            [l.kind, l.resolution, l.in_channels, l.out_channels, l.kernel_size]
            for l in desc.style_layers
        ],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def descriptor_to_dict(desc: ArchitectureDescriptor) -> dict:
    return json.loads(_fingerprint_payload(desc))


def descriptor_from_dict(payload: Mapping) -> ArchitectureDescriptor:
    return _build(
        name=payload["name"],
        base_resolution=payload["base_resolution"],
        output_resolution=payload["output_resolution"],
        channel_schedule=tuple((int(r), int(c)) for r, c in payload["channel_schedule"]),
        mapping_layers=payload["mapping_layers"],
        latent_dim=payload["latent_dim"],
        activation=payload["activation"],
    )


def _enumerate_style_layers(
    schedule: Sequence[tuple[int, int]]
) -> tuple[StyleLayerInfo, ...]:
    # Per resolution: (up-)convolutions first, then the tRGB layer, in the
    # order the forward pass consumes their style vectors.
    layers: list[StyleLayerInfo] = []
    prev_ch = schedule[0][1]
    for i, (res, ch) in enumerate(schedule):
        if i == 0:
            layers.append(StyleLayerInfo("conv", res, ch, ch, 3))
        else:
            layers.append(StyleLayerInfo("conv", res, prev_ch, ch, 3))
            layers.append(StyleLayerInfo("conv", res, ch, ch, 3))
        layers.append(StyleLayerInfo("trgb", res, ch, 3, 1))
        prev_ch = ch
    return tuple(layers)


def _build(
    name: str,
    base_resolution: int,
    output_resolution: int,
    channel_schedule: tuple[tuple[int, int], ...],
    mapping_layers: int,
    latent_dim: int,
    activation: str,
) -> ArchitectureDescriptor:
    def _pow2(n: int) -> bool:
        return n >= 1 and (n & (n - 1)) == 0

    if not (_pow2(base_resolution) and _pow2(output_resolution)):
        raise ConfigurationError("resolutions must be powers of two")
    if base_resolution > output_resolution:
        raise ConfigurationError("base resolution exceeds output resolution")
    expected = base_resolution
    for res, ch in channel_schedule:
        if res != expected:
            raise ConfigurationError(
                f"channel schedule must double from {base_resolution} to "
                f"{output_resolution}; got resolution {res}, expected {expected}"
            )
        if ch < 1:
            raise ConfigurationError("channel counts must be positive")
        expected *= 2
    if channel_schedule[-1][0] != output_resolution:
        raise ConfigurationError("channel schedule does not reach the output resolution")
    if activation not in _ACTIVATIONS:
        raise ConfigurationError(f"unknown activation {activation!r}")
    if mapping_layers < 1 or latent_dim < 1:
        raise ConfigurationError("mapping_layers and latent_dim must be positive")

    desc = ArchitectureDescriptor(
        name=name,
        base_resolution=base_resolution,
        output_resolution=output_resolution,
        channel_schedule=tuple(channel_schedule),
        mapping_layers=mapping_layers,
        latent_dim=latent_dim,
        activation=activation,
        style_layers=_enumerate_style_layers(channel_schedule),
    )
    digest = hashlib.sha256(_fingerprint_payload(desc).encode()).hexdigest()
    return replace(desc, fingerprint=digest)


PRESETS: dict[str, dict] = {
    # Desk-scale generator: small enough that full gradient checks run in
    # seconds on one CPU core.  Smooth activation keeps finite-difference
    # validation clean.
    "toy32": dict(
        base_resolution=4,
        output_resolution=32,
        channel_schedule=((4, 64), (8, 32), (16, 16), (32, 8)),
        mapping_layers=2,
        latent_dim=64,
        activation="elu",
    ),
    "toy16": dict(
        base_resolution=4,
        output_resolution=16,
        channel_schedule=((4, 32), (8, 16), (16, 8)),
        mapping_layers=2,
        latent_dim=32,
        activation="elu",
    ),
    # Full-scale descriptors (for counting and compatibility checks only).
    "sg2-512": dict(
        base_resolution=4,
        output_resolution=512,
        channel_schedule=(
            (4, 512), (8, 512), (16, 512), (32, 512),
            (64, 512), (128, 256), (256, 128), (512, 64),
        ),
        mapping_layers=8,
        latent_dim=512,
        activation="lrelu",
    ),
    "sg2-1024": dict(
        base_resolution=4,
        output_resolution=1024,
        channel_schedule=(
            (4, 512), (8, 512), (16, 512), (32, 512), (64, 512),
            (128, 256), (256, 128), (512, 64), (1024, 32),
        ),
        mapping_layers=8,
        latent_dim=512,
        activation="lrelu",
    ),
}


def build_architecture(config: str | Mapping) -> ArchitectureDescriptor:
    """Build a descriptor from a named preset or explicit fields."""
    if isinstance(config, str):
        if config not in PRESETS:
            raise ConfigurationError(
                f"unknown preset {config!r}; available: {sorted(PRESETS)}"
            )
        fields = dict(PRESETS[config])
        return _build(name=config, **fields)
    fields = dict(config)
    name = fields.pop("name", "custom")
    fields.setdefault("activation", "elu")
    fields["channel_schedule"] = tuple(tuple(p) for p in fields["channel_schedule"])
    return _build(name=name, **fields)


@dataclass(frozen=True)
class SamplerConfig:
    truncation_psi: float = 1.0
    seed: int = 0
    noise_mode: str = "frozen_zero"  # "frozen_zero" | "fixed_seeded"

    def __post_init__(self):
        # psi == 0 (full truncation to the mean) is permitted as the limit case
        if not (0.0 <= self.truncation_psi <= 1.0):
            raise ConfigurationError("truncation_psi must lie in [0, 1]")
        if self.noise_mode not in ("frozen_zero", "fixed_seeded"):
            raise ConfigurationError(f"unknown noise mode {self.noise_mode!r}")


@dataclass(frozen=True)
class StyleSpacePoint:
    """Per-layer style vectors; the coordinate system for domain directions.

    Each entry has shape ``(dim_i,)`` or ``(batch, dim_i)``; all entries share
    the leading batch shape.
    """

    styles: tuple[torch.Tensor, ...]
    fingerprint: str

    @property
    def total_dim(self) -> int:
        return sum(int(s.shape[-1]) for s in self.styles)

    @property
    def batched(self) -> bool:
        return self.styles[0].dim() == 2


def _validate_point(desc: ArchitectureDescriptor, point: StyleSpacePoint) -> None:
    dims = desc.style_dims
    if len(point.styles) != len(dims):
        raise ShapeError(
            f"style point has {len(point.styles)} layers, descriptor expects {len(dims)}"
        )
    for i, (s, d) in enumerate(zip(point.styles, dims)):
        if s.shape[-1] != d:
            raise ShapeError(f"style layer {i} has width {s.shape[-1]}, expected {d}")


@dataclass(frozen=True)
class GeneratorWeights:
    """All tensors of one generator, paired with its descriptor.

    ``lineage`` lists architecture fingerprints of the checkpoint ancestry
    (own fingerprint first); fine-tuned children inherit and extend it.
    ``w_mean`` is the truncation center, estimated once from
    ``W_MEAN_SAMPLES`` mapped latents when the weights are created or loaded.
    """

    descriptor: ArchitectureDescriptor
    mapping: tuple[tuple[torch.Tensor, torch.Tensor], ...]   # (weight, bias) per layer
    affine: tuple[tuple[torch.Tensor, torch.Tensor], ...]    # (weight, bias) per style layer
    const_input: torch.Tensor                                # (ch_base, base, base)
    conv_kernels: tuple[torch.Tensor, ...]                   # (out, in, k, k)
    conv_biases: tuple[torch.Tensor, ...]                    # (out,)
    noise_strengths: tuple[torch.Tensor, ...]                # scalars, one per conv
    trgb_kernels: tuple[torch.Tensor, ...]                   # (3, in, 1, 1)
    trgb_biases: tuple[torch.Tensor, ...]                    # (3,)
    w_mean: torch.Tensor                                     # (latent_dim,)
    lineage: tuple[str, ...] = ()

    def named_tensors(self) -> dict[str, torch.Tensor]:
        out: dict[str, torch.Tensor] = {}
        for i, (w, b) in enumerate(self.mapping):
            out[f"mapping.{i}.weight"] = w
            out[f"mapping.{i}.bias"] = b
        for i, (w, b) in enumerate(self.affine):
            out[f"affine.{i}.weight"] = w
            out[f"affine.{i}.bias"] = b
        out["synthesis.const"] = self.const_input
        for j, k in enumerate(self.conv_kernels):
            out[f"synthesis.{j}.kernel"] = k
            out[f"synthesis.{j}.bias"] = self.conv_biases[j]
            out[f"synthesis.{j}.noise"] = self.noise_strengths[j]
        for j, k in enumerate(self.trgb_kernels):
            out[f"trgb.{j}.kernel"] = k
            out[f"trgb.{j}.bias"] = self.trgb_biases[j]
        out["stats.w_mean"] = self.w_mean
        return out

    def replace_tensors(self, named: Mapping[str, torch.Tensor]) -> "GeneratorWeights":
        """Return a copy with the given slots substituted (shapes must match)."""
        current = self.named_tensors()
        for name, tensor in named.items():
            if name not in current:
                raise ShapeError(f"unknown tensor slot {name!r}")
            if tuple(tensor.shape) != tuple(current[name].shape):
                raise ShapeError(
                    f"slot {name!r}: shape {tuple(tensor.shape)} != "
                    f"{tuple(current[name].shape)}"
                )
        merged = dict(current)
        merged.update(named)
        return _weights_from_named(self.descriptor, merged, self.lineage)

    def with_lineage(self, lineage: tuple[str, ...]) -> "GeneratorWeights":
        return replace(self, lineage=tuple(lineage))

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.named_tensors()):
            h.update(name.encode())
            h.update(tensor_bytes(self.named_tensors()[name]))
        return h.hexdigest()


def tensor_bytes(t: torch.Tensor) -> bytes:
    return t.detach().contiguous().numpy().tobytes()


def _weights_from_named(
    desc: ArchitectureDescriptor,
    named: Mapping[str, torch.Tensor],
    lineage: tuple[str, ...],
) -> GeneratorWeights:
    n_convs = len(desc.conv_layers)
    n_trgb = len(desc.trgb_layers)
    return GeneratorWeights(
        descriptor=desc,
        mapping=tuple(
            (named[f"mapping.{i}.weight"], named[f"mapping.{i}.bias"])
            for i in range(desc.mapping_layers)
        ),
        affine=tuple(
            (named[f"affine.{i}.weight"], named[f"affine.{i}.bias"])
            for i in range(desc.num_style_layers)
        ),
        const_input=named["synthesis.const"],
        conv_kernels=tuple(named[f"synthesis.{j}.kernel"] for j in range(n_convs)),
        conv_biases=tuple(named[f"synthesis.{j}.bias"] for j in range(n_convs)),
        noise_strengths=tuple(named[f"synthesis.{j}.noise"] for j in range(n_convs)),
        trgb_kernels=tuple(named[f"trgb.{j}.kernel"] for j in range(n_trgb)),
        trgb_biases=tuple(named[f"trgb.{j}.bias"] for j in range(n_trgb)),
        w_mean=named["stats.w_mean"],
        lineage=lineage,
    )


def expected_shapes(desc: ArchitectureDescriptor) -> dict[str, tuple[int, ...]]:
    """Slot name -> tensor shape for every weight of this architecture."""
    shapes: dict[str, tuple[int, ...]] = {}
    d = desc.latent_dim
    for i in range(desc.mapping_layers):
        shapes[f"mapping.{i}.weight"] = (d, d)
        shapes[f"mapping.{i}.bias"] = (d,)
    for i, layer in enumerate(desc.style_layers):
        shapes[f"affine.{i}.weight"] = (layer.in_channels, d)
        shapes[f"affine.{i}.bias"] = (layer.in_channels,)
    base_ch = desc.channel_schedule[0][1]
    shapes["synthesis.const"] = (base_ch, desc.base_resolution, desc.base_resolution)
    for j, layer in enumerate(desc.conv_layers):
        k = layer.kernel_size
        shapes[f"synthesis.{j}.kernel"] = (layer.out_channels, layer.in_channels, k, k)
        shapes[f"synthesis.{j}.bias"] = (layer.out_channels,)
        shapes[f"synthesis.{j}.noise"] = ()
    for j, layer in enumerate(desc.trgb_layers):
        shapes[f"trgb.{j}.kernel"] = (3, layer.in_channels, 1, 1)
        shapes[f"trgb.{j}.bias"] = (3,)
    shapes["stats.w_mean"] = (d,)
    return shapes


def descriptor_from_shapes(
    named: Mapping[str, torch.Tensor], name: str, activation: str
) -> ArchitectureDescriptor:
    """Re-derive a descriptor purely from weight shapes.

    Name and activation are not recoverable from shapes and must be passed
    through; everything structural (schedule, latent dim, layer counts) is
    inferred, so a round trip through this function cross-checks descriptor
    and weights.
    """
    latent_dim = int(named["mapping.0.weight"].shape[1])
    mapping_layers = sum(1 for k in named if k.startswith("mapping.") and k.endswith(".weight"))
    base_ch, base_res, _ = named["synthesis.const"].shape
    n_trgb = sum(1 for k in named if k.startswith("trgb.") and k.endswith(".kernel"))
    schedule = tuple(
        (base_res * 2**j, int(named[f"trgb.{j}.kernel"].shape[1])) for j in range(n_trgb)
    )
    if schedule[0][1] != base_ch:
        raise ShapeError("constant input channels disagree with the first tRGB layer")
    return _build(
        name=name,
        base_resolution=int(base_res),
        output_resolution=schedule[-1][0],
        channel_schedule=schedule,
        mapping_layers=mapping_layers,
        latent_dim=latent_dim,
        activation=activation,
    )


def random_weights(
    desc: ArchitectureDescriptor, seed: int = 0, lineage: tuple[str, ...] | None = None
) -> GeneratorWeights:
    """Random but sane weights: roughly unit-variance activations, styles near 1."""
    g = torch.Generator().manual_seed(seed)

    def randn(*shape):
        return torch.randn(*shape, generator=g, dtype=DTYPE)

    d = desc.latent_dim
    mapping = tuple(
        (randn(d, d) / math.sqrt(d), torch.zeros(d, dtype=DTYPE))
        for _ in range(desc.mapping_layers)
    )
    affine = tuple(
        (
            randn(layer.in_channels, d) / math.sqrt(d),
            torch.ones(layer.in_channels, dtype=DTYPE),  # bias 1: modulation rates near unity
        )
        for layer in desc.style_layers
    )
    base_ch = desc.channel_schedule[0][1]
    const_input = randn(base_ch, desc.base_resolution, desc.base_resolution)
    conv_kernels = tuple(
        randn(l.out_channels, l.in_channels, l.kernel_size, l.kernel_size)
        / math.sqrt(l.in_channels * l.kernel_size**2)
        for l in desc.conv_layers
    )
    conv_biases = tuple(torch.zeros(l.out_channels, dtype=DTYPE) for l in desc.conv_layers)
    noise_strengths = tuple(torch.zeros((), dtype=DTYPE) for _ in desc.conv_layers)
    trgb_kernels = tuple(
        randn(3, l.in_channels, 1, 1) / math.sqrt(l.in_channels) for l in desc.trgb_layers
    )
    trgb_biases = tuple(torch.zeros(3, dtype=DTYPE) for _ in desc.trgb_layers)

    w = GeneratorWeights(
        descriptor=desc,
        mapping=mapping,
        affine=affine,
        const_input=const_input,
        conv_kernels=conv_kernels,
        conv_biases=conv_biases,
        noise_strengths=noise_strengths,
        trgb_kernels=trgb_kernels,
        trgb_biases=trgb_biases,
        w_mean=torch.zeros(d, dtype=DTYPE),
        lineage=lineage if lineage is not None else (desc.fingerprint,),
    )
    return replace(w, w_mean=estimate_w_mean(w))


def estimate_w_mean(weights: GeneratorWeights, samples: int = W_MEAN_SAMPLES) -> torch.Tensor:
    g = torch.Generator().manual_seed(_W_MEAN_SEED)
    z = torch.randn(samples, weights.descriptor.latent_dim, generator=g, dtype=DTYPE)
    w = _mapping_forward(weights, z)
    return w.mean(dim=0)


def _activate(x: torch.Tensor, kind: str) -> torch.Tensor:
    if kind == "elu":
        return torch.nn.functional.elu(x)
    return torch.nn.functional.leaky_relu(x, 0.2) * math.sqrt(2.0)


def _mapping_forward(weights: GeneratorWeights, z: torch.Tensor) -> torch.Tensor:
    x = z * torch.rsqrt(torch.mean(z * z, dim=-1, keepdim=True) + 1e-8)
    for w, b in weights.mapping:
        x = _activate(x @ w.T + b, weights.descriptor.activation)
    return x


def map_latent(
    weights: GeneratorWeights, z: torch.Tensor, cfg: SamplerConfig = SamplerConfig()
) -> torch.Tensor:
    """Map noise to the intermediate latent and truncate toward the tracked mean."""
    if z.shape[-1] != weights.descriptor.latent_dim:
        raise ShapeError(
            f"latent has dim {z.shape[-1]}, descriptor expects {weights.descriptor.latent_dim}"
        )
    w = _mapping_forward(weights, z.to(DTYPE))
    return weights.w_mean + cfg.truncation_psi * (w - weights.w_mean)


def affine_styles(weights: GeneratorWeights, w: torch.Tensor) -> StyleSpacePoint:
    """Evaluate every affine layer on ``w``; purely affine, no activation."""
    if w.shape[-1] != weights.descriptor.latent_dim:
        raise ShapeError(
            f"latent has dim {w.shape[-1]}, descriptor expects {weights.descriptor.latent_dim}"
        )
    styles = tuple(w @ aw.T + ab for aw, ab in weights.affine)
    return StyleSpacePoint(styles=styles, fingerprint=weights.descriptor.fingerprint)


def modulated_conv(
    features: torch.Tensor,
    kernel: torch.Tensor,
    style: torch.Tensor,
    demodulate: bool,
    eps: float = DEMOD_EPS,
) -> torch.Tensor:
    """Convolution with per-input-channel kernel modulation.

    The kernel is scaled per input channel by the style vector; with
    ``demodulate`` each output channel of the scaled kernel is renormalized
    to unit L2 norm.  Same-padding convolution, stride 1.
    """
    squeeze = features.dim() == 3
    if squeeze:
        features = features.unsqueeze(0)
    if style.dim() == 1:
        style = style.unsqueeze(0).expand(features.shape[0], -1)
    batch, in_ch, h, w_ = features.shape
    out_ch, k_in, kh, kw = kernel.shape
    if k_in != in_ch or style.shape[-1] != in_ch:
        raise ShapeError(
            f"channel mismatch: features {in_ch}, kernel {k_in}, style {style.shape[-1]}"
        )
    weight = kernel.unsqueeze(0) * style[:, None, :, None, None]  # (B, out, in, kh, kw)
    if demodulate:
        norm = torch.rsqrt(weight.pow(2).sum(dim=(2, 3, 4)) + eps)
        weight = weight * norm[:, :, None, None, None]
    out = torch.nn.functional.conv2d(
        features.reshape(1, batch * in_ch, h, w_),
        weight.reshape(batch * out_ch, in_ch, kh, kw),
        padding=kh // 2,
        groups=batch,
    ).reshape(batch, out_ch, h, w_)
    return out.squeeze(0) if squeeze else out


def _upsample2(x: torch.Tensor) -> torch.Tensor:
    return torch.nn.functional.interpolate(x, scale_factor=2, mode="nearest")


def _upsample2_rgb(x: torch.Tensor) -> torch.Tensor:
    return torch.nn.functional.interpolate(
        x, scale_factor=2, mode="bilinear", align_corners=False
    )


def _layer_noise(cfg: SamplerConfig, conv_index: int, shape) -> torch.Tensor | None:
    if cfg.noise_mode == "frozen_zero":
        return None
    g = torch.Generator().manual_seed((cfg.seed * 1_000_003 + conv_index) & 0x7FFFFFFF)
    return torch.randn(1, 1, shape[-2], shape[-1], generator=g, dtype=DTYPE)


def synthesize(
    weights: GeneratorWeights,
    styles: StyleSpacePoint,
    offsets=None,
    cfg: SamplerConfig = SamplerConfig(),
) -> torch.Tensor:
    """Render an image from style vectors.

    ``offsets`` (optional spatially-uniform kernel deltas, see
    :mod:`styledomain.paramspace`) are broadcast-added to the raw kernels of
    their block before modulation.  Output shape is ``(3, R, R)`` for a
    single style point and ``(batch, 3, R, R)`` for batched styles.
    """
    desc = weights.descriptor
    if styles.fingerprint != desc.fingerprint:
        raise ShapeError("style point fingerprint does not match generator")
    _validate_point(desc, styles)

    eff_conv = list(weights.conv_kernels)
    eff_trgb = list(weights.trgb_kernels)
    if offsets is not None:
        from .paramspace import apply_offsets  # local import to avoid a cycle

        k1, k2, kt = apply_offsets(weights, offsets)
        c1, c2 = desc.block_conv_indices(offsets.block_resolution)
        eff_conv[c1], eff_conv[c2] = k1, k2
        eff_trgb[desc.trgb_index(offsets.block_resolution)] = kt

    batched = styles.batched
    svecs = [s.unsqueeze(0) if s.dim() == 1 else s for s in styles.styles]
    batch = svecs[0].shape[0]

    x = weights.const_input.unsqueeze(0).expand(batch, -1, -1, -1)
    rgb: torch.Tensor | None = None
    conv_i = 0
    trgb_i = 0
    style_i = 0
    act = desc.activation

    def _conv_step(x: torch.Tensor) -> torch.Tensor:
        nonlocal conv_i, style_i
        out = modulated_conv(x, eff_conv[conv_i], svecs[style_i], demodulate=True)
        noise = _layer_noise(cfg, conv_i, out.shape)
        if noise is not None:
            out = out + weights.noise_strengths[conv_i] * noise
        out = _activate(out + weights.conv_biases[conv_i][None, :, None, None], act)
        if not torch.isfinite(out).all():
            raise NumericError(f"non-finite features after conv {conv_i}", layer_index=conv_i)
        conv_i += 1
        style_i += 1
        return out

    for i, (res, _) in enumerate(desc.channel_schedule):
        if i == 0:
            x = _conv_step(x)
        else:
            x = _upsample2(x)
            x = _conv_step(x)
            x = _conv_step(x)
        y = modulated_conv(x, eff_trgb[trgb_i], svecs[style_i], demodulate=False)
        y = y + weights.trgb_biases[trgb_i][None, :, None, None]
        rgb = y if rgb is None else _upsample2_rgb(rgb) + y
        trgb_i += 1
        style_i += 1

    assert rgb is not None
    if not torch.isfinite(rgb).all():
        raise NumericError("non-finite image output", layer_index=None)
    return rgb if batched else rgb.squeeze(0)


def generate(
    weights: GeneratorWeights,
    z: torch.Tensor,
    cfg: SamplerConfig = SamplerConfig(),
    offsets=None,
) -> torch.Tensor:
    """Full forward pass: noise -> latent -> styles -> image."""
    w = map_latent(weights, z, cfg)
    return synthesize(weights, affine_styles(weights, w), offsets=offsets, cfg=cfg)


def sample_z(
    desc: ArchitectureDescriptor, seeds: Sequence[int] | int
) -> torch.Tensor:
    """Standard-normal latents, one row per seed, reproducible per seed."""
    if isinstance(seeds, int):
        seeds = [seeds]
    rows = []
    for s in seeds:
        g = torch.Generator().manual_seed(int(s))
        rows.append(torch.randn(desc.latent_dim, generator=g, dtype=DTYPE))
    return torch.stack(rows)


def import_checkpoint(
    desc: ArchitectureDescriptor,
    source_tensors: Mapping[str, torch.Tensor],
    manifest: Mapping[str, str],
    lineage: tuple[str, ...] | None = None,
) -> GeneratorWeights:
    """Assemble weights from externally named tensors via a slot manifest.

    ``manifest`` maps every weight slot of this architecture to a key in
    ``source_tensors``.  Any missing tensor or shape disagreement is fatal;
    nothing is silently skipped.  ``stats.w_mean`` may be supplied through
    the manifest, otherwise it is re-estimated from the imported mapping.
    """
    shapes = expected_shapes(desc)
    named: dict[str, torch.Tensor] = {}
    for slot, shape in shapes.items():
        if slot == "stats.w_mean" and slot not in manifest:
            continue
        if slot not in manifest:
            raise ConfigurationError(f"manifest missing slot {slot!r}")
        src = manifest[slot]
        if src not in source_tensors:
            raise ConfigurationError(f"source tensor {src!r} (slot {slot!r}) not found")
        t = source_tensors[src].to(DTYPE)
        if tuple(t.shape) != shape:
            raise ShapeError(
                f"slot {slot!r}: source shape {tuple(t.shape)} != expected {shape}"
            )
        if not torch.isfinite(t).all():
            raise NumericError(f"non-finite values in imported slot {slot!r}")
        named[slot] = t
    if "stats.w_mean" not in named:
        named["stats.w_mean"] = torch.zeros(desc.latent_dim, dtype=DTYPE)
    weights = _weights_from_named(
        desc, named, lineage if lineage is not None else (desc.fingerprint,)
    )
    if "stats.w_mean" not in manifest:
        weights = replace(weights, w_mean=estimate_w_mean(weights))
    return weights
