"""Domain-adaptation objectives over a pluggable embedding backend.

Three losses drive adaptation:

* text-directional: cosine alignment between the image-embedding change
  (adapted vs. frozen parent) and the text-embedding change (target vs.
  source description),
* one-shot composite: a reference-image variant with within-batch,
  reference-similarity and reference-reconstruction terms,
* hinge adversarial with differentiable augmentation for data-driven
  domains.

Backends encode images and text to unit-norm vectors.  Tests and desk-scale
runs use deterministic stub backends (seeded random projections of a 16x16
downsample); real encoders plug in through the same registry interface.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Protocol, Sequence

import torch

from .arch import DTYPE
from .errors import ConfigurationError, DegenerateDirectionError, NumericError, ShapeError

_DEGENERATE_NORM = 1e-12


class EmbeddingBackend(Protocol):
    id: str

    def image_encode(self, images: torch.Tensor) -> torch.Tensor: ...

    def text_encode(self, text: str) -> torch.Tensor: ...


def _l2_normalize(x: torch.Tensor) -> torch.Tensor:
    return x / x.norm(dim=-1, keepdim=True).clamp_min(1e-12)


class StubBackend:
    """Deterministic, differentiable stand-in for a vision-language encoder.

    Images are bilinearly downsampled to 16x16, flattened, pushed through a
    fixed seeded projection to ``dim`` and L2-normalized.  Text hashes to a
    seeded unit vector.  No external models; gradients flow to the pixels.
    """

    def __init__(self, seed: int = 0, dim: int = 64):
        self.id = f"stub-{seed}-{dim}"
        self.dim = dim
        g = torch.Generator().manual_seed(seed)
        self._proj = torch.randn(dim, 16 * 16 * 3, generator=g, dtype=DTYPE) / math.sqrt(
            16 * 16 * 3
        )
        self._text_salt = seed

    def image_encode(self, images: torch.Tensor) -> torch.Tensor:
        squeeze = images.dim() == 3
        if squeeze:
            images = images.unsqueeze(0)
        if images.shape[1] != 3:
            raise ShapeError("expected RGB images (batch, 3, H, W)")
        small = torch.nn.functional.interpolate(
            images, size=(16, 16), mode="bilinear", align_corners=False
        )
        emb = _l2_normalize(small.reshape(images.shape[0], -1) @ self._proj.T)
        return emb.squeeze(0) if squeeze else emb

    def text_encode(self, text: str) -> torch.Tensor:
        digest = hashlib.sha256(f"{self._text_salt}:{text}".encode()).digest()
        seed = int.from_bytes(digest[:8], "little") & 0x7FFFFFFF
        g = torch.Generator().manual_seed(seed)
        return _l2_normalize(torch.randn(self.dim, generator=g, dtype=DTYPE))


class AveragedBackend:
    """Mean of several backends' embeddings, renormalized.

    Mirrors training against a pair of encoder variants while presenting a
    single backend interface; the evaluation backend stays separate.
    """

    def __init__(self, backends: Sequence[EmbeddingBackend]):
        if not backends:
            raise ConfigurationError("AveragedBackend needs at least one backend")
        self.backends = tuple(backends)
        self.id = "avg(" + ",".join(b.id for b in backends) + ")"

    def image_encode(self, images: torch.Tensor) -> torch.Tensor:
        return _l2_normalize(
            sum(b.image_encode(images) for b in self.backends) / len(self.backends)
        )

    def text_encode(self, text: str) -> torch.Tensor:
        return _l2_normalize(
            sum(b.text_encode(text) for b in self.backends) / len(self.backends)
        )


_BACKEND_FACTORIES: dict[str, Callable[[], EmbeddingBackend]] = {}


def register_backend(backend_id: str, factory: Callable[[], EmbeddingBackend]) -> None:
    _BACKEND_FACTORIES[backend_id] = factory


def get_backend(backend_id: str) -> EmbeddingBackend:
    if backend_id not in _BACKEND_FACTORIES:
        raise ConfigurationError(
            f"unknown backend {backend_id!r}; registered: {sorted(_BACKEND_FACTORIES)}"
        )
    return _BACKEND_FACTORIES[backend_id]()


# Default stubs: a training pair (averaged) and a distinct evaluation stub.
register_backend("stub", lambda: StubBackend(seed=0))
register_backend("stub-train", lambda: AveragedBackend([StubBackend(1), StubBackend(2)]))
register_backend("stub-eval", lambda: StubBackend(seed=99))


@dataclass(frozen=True)
class TextDomainSpec:
    target_text: str
    source_text: str

    def __post_init__(self):
        if not self.target_text or not self.source_text:
            raise ConfigurationError("target and source descriptions must be non-empty")


@dataclass(frozen=True)
class OneShotSpec:
    """Reference image plus term weights for the one-shot composite loss.

    ``reference_recon`` is the current generation from the reference's
    inverted latent; the trainer refreshes it every iteration.  When absent
    the reconstruction term contributes zero.
    """

    reference_image: torch.Tensor
    lambda_cw: float = 0.5
    lambda_rc: float = 30.0
    lambda_rr: float = 10.0
    reference_recon: torch.Tensor | None = None

    def __post_init__(self):
        if min(self.lambda_cw, self.lambda_rc, self.lambda_rr) < 0:
            raise ConfigurationError("loss coefficients must be non-negative")


def _guarded_norms(delta_i: torch.Tensor, degenerate: str) -> torch.Tensor:
    """Per-row norms of the image-embedding changes.

    ``degenerate="error"`` raises on a (near-)zero row, per the loss contract.
    ``degenerate="guard"`` substitutes a unit denominator for zero rows so the
    gradient at the adaptation start (adapted == frozen parent, hence
    delta_i == 0 exactly) is the well-defined descent direction instead of a
    0/0; after one optimizer step the true cosine takes over.
    """
    norms = delta_i.norm(dim=-1)
    mask = norms < _DEGENERATE_NORM
    if bool(mask.any()):
        if degenerate == "error":
            raise DegenerateDirectionError("an image embedding direction has zero norm")
        norms = torch.where(mask, torch.ones_like(norms), norms)
    return norms


def _delta_cosine(
    delta_i: torch.Tensor, delta_t: torch.Tensor, degenerate: str = "error"
) -> torch.Tensor:
    """Mean of 1 - cos(delta_i[k], delta_t) with degenerate-direction checks."""
    t_norm = delta_t.norm()
    if float(t_norm.detach()) < _DEGENERATE_NORM:
        raise DegenerateDirectionError("target embedding direction has zero norm")
    norms = _guarded_norms(delta_i, degenerate)
    cos = (delta_i @ delta_t) / (norms * t_norm)
    return (1.0 - cos).mean()


def directional_loss(
    generated: torch.Tensor,
    base: torch.Tensor,
    spec: TextDomainSpec,
    backend: EmbeddingBackend,
    degenerate: str = "error",
) -> torch.Tensor:
    """Mean over the batch of 1 - cos(delta_image, delta_text); range [0, 2].

    ``base`` must come from the frozen parent generator on the same latents.
    """
    if generated.shape != base.shape or generated.dim() != 4:
        raise ShapeError("generated and base batches must share shape (K, 3, H, W)")
    delta_t = backend.text_encode(spec.target_text) - backend.text_encode(spec.source_text)
    delta_i = backend.image_encode(generated) - backend.image_encode(base)
    return _delta_cosine(delta_i, delta_t, degenerate)


def one_shot_loss(
    generated: torch.Tensor,
    base: torch.Tensor,
    spec: OneShotSpec,
    backend: EmbeddingBackend,
    degenerate: str = "error",
) -> torch.Tensor:
    """Composite reference-image objective.

    across + lambda_cw * within + lambda_rc * ref_similarity
    + lambda_rr * ref_reconstruction.  The within term is the mean pairwise
    cosine distance of the per-sample embedding changes (zero for singleton
    batches); the reconstruction term is the pixel MSE between the reference
    and ``spec.reference_recon`` when provided.
    """
    if generated.shape != base.shape or generated.dim() != 4:
        raise ShapeError("generated and base batches must share shape (K, 3, H, W)")
    e_gen = backend.image_encode(generated)
    e_base = backend.image_encode(base)
    e_ref = backend.image_encode(spec.reference_image)

    delta_i = e_gen - e_base
    delta_ref = e_ref - e_base.mean(dim=0)
    across = _delta_cosine(delta_i, delta_ref, degenerate)

    k = generated.shape[0]
    if k >= 2:
        norms = _guarded_norms(delta_i, degenerate)
        unit = delta_i / norms[:, None]
        gram = unit @ unit.T
        pair_sum = (gram.sum() - gram.diagonal().sum()) / 2.0
        within = 1.0 - pair_sum / (k * (k - 1) / 2.0)
    else:
        within = torch.zeros((), dtype=DTYPE)

    ref_sim = (1.0 - e_gen @ e_ref).mean()

    if spec.reference_recon is not None:
        ref_rec = (spec.reference_recon - spec.reference_image).pow(2).mean()
    else:
        ref_rec = torch.zeros((), dtype=DTYPE)

    return across + spec.lambda_cw * within + spec.lambda_rc * ref_sim + spec.lambda_rr * ref_rec


# --- differentiable augmentation -------------------------------------------

_AUG_OPS = ("blit", "geometric", "color")


@dataclass(frozen=True)
class AugmentationPolicy:
    """Which transform families to apply, each with probability ``p`` per sample."""

    ops: tuple[str, ...] = _AUG_OPS
    p: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for op in self.ops:
            if op not in _AUG_OPS:
                raise ConfigurationError(f"unknown augmentation op {op!r}")
        if not (0.0 <= self.p <= 1.0):
            raise ConfigurationError("augmentation probability must lie in [0, 1]")

    def with_seed(self, seed: int) -> "AugmentationPolicy":
        return replace(self, seed=seed)


def bgc_policy(p: float = 0.5, seed: int = 0) -> AugmentationPolicy:
    """Blit + geometric + color, the default family for data-driven adaptation."""
    return AugmentationPolicy(ops=_AUG_OPS, p=p, seed=seed)


def hflip(images: torch.Tensor) -> torch.Tensor:
    return images.flip(-1)


def translate(images: torch.Tensor, dx: int, dy: int) -> torch.Tensor:
    """Integer shift with zero padding; linear in the pixel values."""
    h, w = images.shape[-2:]
    out = torch.zeros_like(images)
    src_y = slice(max(0, -dy), min(h, h - dy))
    dst_y = slice(max(0, dy), min(h, h + dy))
    src_x = slice(max(0, -dx), min(w, w - dx))
    dst_x = slice(max(0, dx), min(w, w + dx))
    out[..., dst_y, dst_x] = images[..., src_y, src_x]
    return out

def rotate_scale(images: torch.Tensor, angle: float, scale: float) -> torch.Tensor:
    """Rotate (radians) and scale about the center, bilinear resampling."""
    squeeze = images.dim() == 3
    if squeeze:
        images = images.unsqueeze(0)
    cos, sin = math.cos(angle) / scale, math.sin(angle) / scale
    theta = torch.tensor(
        [[cos, -sin, 0.0], [sin, cos, 0.0]], dtype=images.dtype
    ).expand(images.shape[0], 2, 3)
    grid = torch.nn.functional.affine_grid(theta, list(images.shape), align_corners=False)
    out = torch.nn.functional.grid_sample(
        images, grid, mode="bilinear", padding_mode="zeros", align_corners=False
    )
    return out.squeeze(0) if squeeze else out


def adjust_color(
    images: torch.Tensor, brightness: float, contrast: float, saturation: float
) -> torch.Tensor:
    """Affine color jitter: x -> contrast*(x - mean) + mean + brightness, then
    blend toward the per-pixel channel mean by (1 - saturation)."""
    mean = images.mean(dim=(-3, -2, -1), keepdim=True)
    out = contrast * (images - mean) + mean + brightness
    gray = out.mean(dim=-3, keepdim=True)
    return gray + saturation * (out - gray)


def augment(
    batch: torch.Tensor, policy: AugmentationPolicy, stream: int = 0
) -> torch.Tensor:
    """Apply the policy independently per sample; deterministic per (seed, stream)."""
    if not policy.ops or policy.p == 0.0:
        return batch
    g = torch.Generator().manual_seed((policy.seed * 0x9E3779B1 + stream) & 0x7FFFFFFF)

    def coin(p: float) -> bool:
        return bool(torch.rand((), generator=g) < p)

    def uniform(lo: float, hi: float) -> float:
        return float(torch.rand((), generator=g)) * (hi - lo) + lo

    h = batch.shape[-2]
    out = []
    for i in range(batch.shape[0]):
        img = batch[i]
        if "blit" in policy.ops and coin(policy.p):
            if coin(0.5):
                img = hflip(img)
            shift = max(1, h // 8)
            img = translate(
                img, int(uniform(-shift, shift + 1)), int(uniform(-shift, shift + 1))
            )
        if "geometric" in policy.ops and coin(policy.p):
            img = rotate_scale(img, uniform(-0.5, 0.5), uniform(0.8, 1.25))
        if "color" in policy.ops and coin(policy.p):
            img = adjust_color(
                img, uniform(-0.2, 0.2), uniform(0.75, 1.25), uniform(0.5, 1.5)
            )
        out.append(img)
    return torch.stack(out)


# --- baseline discriminator -------------------------------------------------


@dataclass(frozen=True)
class Discriminator:
    """Fixed strided conv stack mapping an image to one logit; not a research object."""

    resolution: int
    convs: tuple[tuple[torch.Tensor, torch.Tensor], ...]  # (kernel, bias), stride 2 each
    head: tuple[torch.Tensor, torch.Tensor]               # (weight, bias)

    def named_tensors(self) -> dict[str, torch.Tensor]:
        out = {}
        for i, (k, b) in enumerate(self.convs):
            out[f"disc.conv{i}.kernel"] = k
            out[f"disc.conv{i}.bias"] = b
        out["disc.head.weight"] = self.head[0]
        out["disc.head.bias"] = self.head[1]
        return out


def make_discriminator(
    resolution: int, base_channels: int = 16, seed: int = 0
) -> Discriminator:
    g = torch.Generator().manual_seed(seed)
    convs = []
    in_ch, res, ch = 3, resolution, base_channels
    while res > 4:
        k = torch.randn(ch, in_ch, 3, 3, generator=g, dtype=DTYPE) / math.sqrt(in_ch * 9)
        convs.append((k, torch.zeros(ch, dtype=DTYPE)))
        in_ch, res, ch = ch, res // 2, min(2 * ch, 128)
    head_w = torch.randn(1, in_ch * res * res, generator=g, dtype=DTYPE) / math.sqrt(
        in_ch * res * res
    )
    return Discriminator(
        resolution=resolution, convs=tuple(convs), head=(head_w, torch.zeros(1, dtype=DTYPE))
    )


def discriminator_logits(disc: Discriminator, images: torch.Tensor) -> torch.Tensor:
    if images.shape[-1] != disc.resolution:
        raise ShapeError(
            f"discriminator expects {disc.resolution}x{disc.resolution} images"
        )
    x = images
    for k, b in disc.convs:
        x = torch.nn.functional.conv2d(x, k, b, stride=2, padding=1)
        x = torch.nn.functional.elu(x)
    logits = x.reshape(x.shape[0], -1) @ disc.head[0].T + disc.head[1]
    if not torch.isfinite(logits).all():
        raise NumericError("non-finite discriminator logits")
    return logits.squeeze(-1)


def adversarial_losses(
    fake: torch.Tensor,
    real: torch.Tensor,
    disc,
    aug: AugmentationPolicy,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Hinge GAN losses with augmentation before the discriminator.

    d_loss = sum max(0, 1 - D(T(real))) + sum max(0, 1 + D(T(fake)));
    g_loss = sum -D(T(fake)).  Gradients flow through T to the generator.
    ``disc`` is a :class:`Discriminator` or any callable mapping an image
    batch to per-sample logits (scripted logits in tests).
    """
    if fake.shape[0] == 0 or real.shape[0] == 0:
        raise ShapeError("batches must be non-empty")
    logit_fn = disc if callable(disc) else lambda imgs: discriminator_logits(disc, imgs)
    logits_fake = logit_fn(augment(fake, aug, stream=0))
    logits_real = logit_fn(augment(real, aug, stream=1))
    if not (torch.isfinite(logits_fake).all() and torch.isfinite(logits_real).all()):
        raise NumericError("non-finite discriminator logits")
    d_loss = torch.relu(1.0 - logits_real).sum() + torch.relu(1.0 + logits_fake).sum()
    g_loss = -logits_fake.sum()
    return g_loss, d_loss
