"""Adaptation runs: pick a parameter subset, drive a loss, emit artifacts.

The trainer never mutates the parent generator.  Trainable leaves are
cloned (or zero-initialized, for style offsets) per run, optimized with
ADAM under the published hyperparameter presets, and returned as an
:class:`AdaptationResult` holding either a style-space direction, named
weight deltas, or both.  Runs are deterministic under a fixed seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import torch

from .arch import (
    DTYPE,
    GeneratorWeights,
    SamplerConfig,
    StyleSpacePoint,
    affine_styles,
    generate,
    map_latent,
    synthesize,
)
from .directions import StyleDomainDirection
from .errors import ConfigurationError, NumericError, ShapeError
from .losses import (
    AugmentationPolicy,
    EmbeddingBackend,
    OneShotSpec,
    TextDomainSpec,
    adversarial_losses,
    directional_loss,
    make_discriminator,
    one_shot_loss,
)
from .paramspace import ParamSpaceKind, ParameterSelection, WeightOffsets, select

REGIMES = ("similar_text", "similar_oneshot", "ada")

# ADAM settings per parameter space for the text / one-shot regimes.
_SIMILAR_PRESETS: dict[str, tuple[float, tuple[float, float]]] = {
    "SyntConv": (0.002, (0.0, 0.999)),
    "Full": (0.002, (0.0, 0.999)),
    "Affine": (0.01, (0.0, 0.999)),
    "Mapping": (0.3, (0.0, 0.999)),
    "StyleSpace": (0.05, (0.9, 0.999)),
}
_ADA_BASE_LR = 0.002
_ADA_BUMPED_LR = 0.02  # generator lr for the offset/style parameterizations
_ADA_BETAS = (0.0, 0.99)
_DEFAULT_ITERATIONS = 300
_DEFAULT_BATCH = 4


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float
    betas: tuple[float, float]
    weight_decay: float = 0.0
    batch_size: int = _DEFAULT_BATCH
    iterations: int = _DEFAULT_ITERATIONS
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigurationError("learning rate must be positive")
        if not all(0.0 <= b < 1.0 for b in self.betas):
            raise ConfigurationError("betas must lie in [0, 1)")
        if self.batch_size < 1:
            raise ConfigurationError("batch size must be >= 1")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")


def preset(kind: ParamSpaceKind, regime: str) -> Hyperparams:
    """Published optimizer settings for a (parameter space, regime) pair."""
    if regime not in REGIMES:
        raise ConfigurationError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    if regime == "ada":
        bumped = kind.name in ("AffinePlus", "StyleSpace", "StyleSpacePlus")
        lr = _ADA_BUMPED_LR if bumped else _ADA_BASE_LR
        return Hyperparams(learning_rate=lr, betas=_ADA_BETAS)
    if kind.name not in _SIMILAR_PRESETS:
        raise ConfigurationError(
            f"no published preset for {kind} under regime {regime!r}; "
            "construct Hyperparams explicitly"
        )
    lr, betas = _SIMILAR_PRESETS[kind.name]
    return Hyperparams(learning_rate=lr, betas=betas)


@dataclass(frozen=True)
class AdaptationResult:
    """Artifacts of one adaptation run.

    Exactly the slots of ``select(kind)`` are populated: style kinds yield a
    direction (with offsets for the extended space); weight kinds yield
    named weight deltas (offset slots included for the affine-plus space).
    """

    kind: ParamSpaceKind
    direction: StyleDomainDirection | None
    weight_deltas: dict[str, torch.Tensor] | None
    loss_trace: tuple[float, ...]
    hyperparams: Hyperparams
    parent_fingerprint: str
    aux_traces: dict[str, tuple[float, ...]] = field(default_factory=dict)

    def build_child(
        self, parent: GeneratorWeights
    ) -> tuple[GeneratorWeights, WeightOffsets | None]:
        """Materialize the adapted generator (and standalone offsets, if any)."""
        if parent.descriptor.fingerprint != self.parent_fingerprint:
            raise ShapeError("result was trained from a different parent architecture")
        offsets = self.direction.offsets if self.direction is not None else None
        weights = parent
        if self.weight_deltas:
            named = parent.named_tensors()
            updates = {}
            for slot, delta in self.weight_deltas.items():
                if slot.startswith("offsets."):
                    continue
                updates[slot] = named[slot] + delta
            weights = parent.replace_tensors(updates)
            block = {s for s in self.weight_deltas if s.startswith("offsets.")}
            if block:
                res = int(next(iter(block)).split(".")[1])
                offsets = WeightOffsets(
                    block_resolution=res,
                    delta_theta_1=self.weight_deltas[f"offsets.{res}.conv1"],
                    delta_theta_2=self.weight_deltas[f"offsets.{res}.conv2"],
                    delta_trgb=self.weight_deltas[f"offsets.{res}.trgb"],
                )
        return weights, offsets


class TrainableState:
    """Leaf tensors for one parameter selection, plus the adapted forward pass."""

    def __init__(self, parent: GeneratorWeights, kind: ParamSpaceKind):
        self.parent = parent
        self.kind = kind
        self.selection: ParameterSelection = select(parent.descriptor, kind)
        parent_named = parent.named_tensors()
        self.params: dict[str, torch.Tensor] = {}
        for name, shape, _ in self.selection.slots:
            if name.startswith(("delta_s.", "offsets.")):
                leaf = torch.zeros(shape, dtype=DTYPE)
            else:
                leaf = parent_named[name].detach().clone()
            leaf.requires_grad_(True)
            self.params[name] = leaf

    def _weight_slots(self) -> dict[str, torch.Tensor]:
        return {
            n: t
            for n, t in self.params.items()
            if not n.startswith(("delta_s.", "offsets."))
        }

    def effective_weights(self) -> GeneratorWeights:
        slots = self._weight_slots()
        return self.parent.replace_tensors(slots) if slots else self.parent

    def offsets(self) -> WeightOffsets | None:
        if not self.kind.uses_offsets:
            return None
        r = self.kind.block_resolution
        return WeightOffsets(
            block_resolution=r,
            delta_theta_1=self.params[f"offsets.{r}.conv1"],
            delta_theta_2=self.params[f"offsets.{r}.conv2"],
            delta_trgb=self.params[f"offsets.{r}.trgb"],
        )

    def forward(self, z: torch.Tensor, cfg: SamplerConfig) -> torch.Tensor:
        weights = self.effective_weights()
        w = map_latent(weights, z, cfg)
        styles = affine_styles(weights, w)
        if self.kind.is_stylespace:
            n = len(styles.styles)
            shifted = tuple(
                styles.styles[i] + self.params[f"delta_s.{i}"] for i in range(n)
            )
            styles = StyleSpacePoint(styles=shifted, fingerprint=styles.fingerprint)
        return synthesize(weights, styles, offsets=self.offsets(), cfg=cfg)

    def to_result(
        self,
        loss_trace: Sequence[float],
        hp: Hyperparams,
        meta: Mapping,
        aux: Mapping[str, tuple[float, ...]] | None = None,
    ) -> AdaptationResult:
        parent_named = self.parent.named_tensors()
        direction = None
        deltas: dict[str, torch.Tensor] = {}
        if self.kind.is_stylespace:
            n = self.parent.descriptor.num_style_layers
            direction = StyleDomainDirection(
                delta_styles=tuple(
                    self.params[f"delta_s.{i}"].detach().clone() for i in range(n)
                ),
                fingerprint=self.parent.descriptor.fingerprint,
                domain_label=str(meta.get("domain_label", "")),
                offsets=(
                    WeightOffsets(
                        block_resolution=self.kind.block_resolution,
                        delta_theta_1=self.params[
                            f"offsets.{self.kind.block_resolution}.conv1"
                        ].detach().clone(),
                        delta_theta_2=self.params[
                            f"offsets.{self.kind.block_resolution}.conv2"
                        ].detach().clone(),
                        delta_trgb=self.params[
                            f"offsets.{self.kind.block_resolution}.trgb"
                        ].detach().clone(),
                    )
                    if self.kind.uses_offsets
                    else None
                ),
                training_meta=dict(meta),
            )
        else:
            for name, tensor in self.params.items():
                if name.startswith("offsets."):
                    deltas[name] = tensor.detach().clone()
                else:
                    deltas[name] = (tensor - parent_named[name]).detach().clone()
        return AdaptationResult(
            kind=self.kind,
            direction=direction,
            weight_deltas=deltas or None,
            loss_trace=tuple(loss_trace),
            hyperparams=hp,
            parent_fingerprint=self.parent.descriptor.fingerprint,
            aux_traces=dict(aux or {}),
        )


LossSpec = TextDomainSpec | OneShotSpec | Callable[[torch.Tensor], torch.Tensor]


def adapt(
    parent: GeneratorWeights,
    kind: ParamSpaceKind,
    loss_spec: LossSpec,
    backend: EmbeddingBackend | None,
    hp: Hyperparams,
    cfg: SamplerConfig = SamplerConfig(),
    latent_mode: str = "resample",
    ref_inversion_steps: int = 200,
    domain_label: str = "",
) -> AdaptationResult:
    """Optimize the selected parameters against the given objective.

    Per iteration: sample ``batch_size`` latents (fresh each step unless
    ``latent_mode="fixed_pool"``), run the adapted forward pass, evaluate the
    loss, and take one ADAM step on exactly the selected parameters.
    ``loss_spec`` may also be a plain callable on the generated batch for
    synthetic objectives.
    """
    if latent_mode not in ("resample", "fixed_pool"):
        raise ConfigurationError(f"unknown latent mode {latent_mode!r}")
    if isinstance(loss_spec, (TextDomainSpec, OneShotSpec)) and backend is None:
        raise ConfigurationError("embedding losses need a backend")

    state = TrainableState(parent, kind)
    opt = torch.optim.Adam(
        list(state.params.values()),
        lr=hp.learning_rate,
        betas=hp.betas,
        weight_decay=hp.weight_decay,
    )
    g = torch.Generator().manual_seed(hp.seed)
    latent_dim = parent.descriptor.latent_dim
    pool = (
        torch.randn(hp.batch_size, latent_dim, generator=g, dtype=DTYPE)
        if latent_mode == "fixed_pool"
        else None
    )

    z_ref: torch.Tensor | None = None
    if isinstance(loss_spec, OneShotSpec):
        z_ref = invert(
            parent, loss_spec.reference_image, steps=ref_inversion_steps,
            psi=cfg.truncation_psi,
        )

    trace: list[float] = []
    for it in range(hp.iterations):
        z = pool if pool is not None else torch.randn(
            hp.batch_size, latent_dim, generator=g, dtype=DTYPE
        )
        gen_images = state.forward(z, cfg)
        if isinstance(loss_spec, TextDomainSpec):
            with torch.no_grad():
                base = generate(parent, z, cfg)
            # guard: at the zero-initialized start the adapted and frozen
            # outputs coincide exactly, so the raw cosine is undefined
            loss = directional_loss(gen_images, base, loss_spec, backend, degenerate="guard")
        elif isinstance(loss_spec, OneShotSpec):
            with torch.no_grad():
                base = generate(parent, z, cfg)
            recon = state.forward(z_ref.unsqueeze(0), cfg).squeeze(0)
            loss = one_shot_loss(
                gen_images, base, replace(loss_spec, reference_recon=recon), backend,
                degenerate="guard",
            )
        else:
            loss = loss_spec(gen_images)
        value = float(loss.detach())
        if not torch.isfinite(loss):
            raise NumericError(f"non-finite loss at iteration {it}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        trace.append(value)

    meta = {
        "loss": type(loss_spec).__name__ if not callable(loss_spec) else "callable",
        "iterations": hp.iterations,
        "seed": hp.seed,
        "domain_label": domain_label,
    }
    return state.to_result(trace, hp, meta)


def adapt_adversarial(
    parent: GeneratorWeights,
    kind: ParamSpaceKind,
    dataset: torch.Tensor,
    aug: AugmentationPolicy,
    hp: Hyperparams,
    cfg: SamplerConfig = SamplerConfig(),
    disc_lr: float = _ADA_BASE_LR,
    disc_seed: int = 0,
    disc=None,
    train_disc: bool = True,
    domain_label: str = "",
) -> AdaptationResult:
    """Alternating hinge-loss training against an image dataset.

    Only the selection's parameters update on the generator side; a baseline
    discriminator (fresh per run, or ``disc`` when given) updates on the
    other.  The discriminator keeps the base learning rate even when the
    generator preset bumps it; ``train_disc=False`` freezes it.
    """
    if dataset.dim() != 4 or dataset.shape[0] == 0:
        raise ConfigurationError("dataset must be a non-empty (N, 3, H, W) tensor")
    if dataset.shape[-1] != parent.descriptor.output_resolution:
        raise ShapeError("dataset resolution does not match the generator")

    state = TrainableState(parent, kind)
    opt_g = torch.optim.Adam(
        list(state.params.values()), lr=hp.learning_rate, betas=hp.betas,
        weight_decay=hp.weight_decay,
    )
    if disc is None:
        disc = make_discriminator(parent.descriptor.output_resolution, seed=disc_seed)
    d_params = {n: t.detach().clone().requires_grad_(True) for n, t in disc.named_tensors().items()}
    disc = _disc_with(disc, d_params)
    opt_d = torch.optim.Adam(list(d_params.values()), lr=disc_lr, betas=hp.betas)

    g = torch.Generator().manual_seed(hp.seed)
    latent_dim = parent.descriptor.latent_dim
    g_trace: list[float] = []
    d_trace: list[float] = []
    for it in range(hp.iterations):
        idx = torch.randint(0, dataset.shape[0], (hp.batch_size,), generator=g)
        real = dataset[idx].to(DTYPE)
        z = torch.randn(hp.batch_size, latent_dim, generator=g, dtype=DTYPE)
        fake = state.forward(z, cfg)
        aug_it = aug.with_seed(aug.seed + it)

        _, d_loss = adversarial_losses(fake.detach(), real, disc, aug_it)
        if train_disc:
            opt_d.zero_grad()
            d_loss.backward()
            opt_d.step()

        g_loss, _ = adversarial_losses(fake, real.detach(), disc, aug_it)
        opt_g.zero_grad()
        if any(t.grad is not None for t in d_params.values()):
            for t in d_params.values():
                t.grad = None
        g_loss.backward()
        opt_g.step()

        g_trace.append(float(g_loss.detach()))
        d_trace.append(float(d_loss.detach()))
        if not (torch.isfinite(g_loss) and torch.isfinite(d_loss)):
            raise NumericError(f"non-finite adversarial loss at iteration {it}")

    meta = {
        "loss": "adversarial",
        "iterations": hp.iterations,
        "seed": hp.seed,
        "domain_label": domain_label,
    }
    return state.to_result(g_trace, hp, meta, aux={"d_loss": tuple(d_trace)})


def _disc_with(disc, named: Mapping[str, torch.Tensor]):
    from .losses import Discriminator

    convs = []
    i = 0
    while f"disc.conv{i}.kernel" in named:
        convs.append((named[f"disc.conv{i}.kernel"], named[f"disc.conv{i}.bias"]))
        i += 1
    return Discriminator(
        resolution=disc.resolution,
        convs=tuple(convs),
        head=(named["disc.head.weight"], named["disc.head.bias"]),
    )


def mean_color_objective(target_rgb) -> Callable[[torch.Tensor], torch.Tensor]:
    """Synthetic objective: squared distance of the batch mean color to a target.

    Useful for deterministic desk-scale adaptation runs with no embedding
    backend involved.
    """
    target = torch.as_tensor(target_rgb, dtype=DTYPE)
    if target.shape != (3,):
        raise ConfigurationError("target color must have three components")

    def objective(images: torch.Tensor) -> torch.Tensor:
        return (images.mean(dim=(0, 2, 3)) - target).pow(2).sum()

    return objective


DEFAULT_INVERSION_STEPS = 1000
DEFAULT_INVERSION_PSI = 0.7
_EXPLORE_LR = 0.1
_POLISH_LR = 0.01
_EXPLORE_SPLIT = 0.6
_NOISE_SCALE = 0.3


def invert(
    gen: GeneratorWeights,
    target: torch.Tensor,
    steps: int = DEFAULT_INVERSION_STEPS,
    psi: float = DEFAULT_INVERSION_PSI,
    backend: EmbeddingBackend | None = None,
    perceptual_weight: float = 0.0,
    seed: int = 0,
) -> torch.Tensor:
    """Optimize a latent ``z`` whose rendering matches the target image.

    Minimizes pixel MSE (optionally plus an embedding cosine term) with ADAM
    under truncation ``psi``; returns the best latent seen across ``steps``
    total iterations.  ``z`` starts at zero.  The budget is split into an
    exploration phase (high rate, annealed latent noise, which escapes the
    poor basins near the origin) and a polish phase from the best point with
    a freshly initialized optimizer at a low rate.
    """
    if target.shape[-1] != gen.descriptor.output_resolution:
        raise ShapeError("target resolution does not match the generator")
    target = target.to(DTYPE)
    cfg = SamplerConfig(truncation_psi=psi)
    target_emb = None
    if backend is not None and perceptual_weight > 0:
        target_emb = backend.image_encode(target).detach()

    def objective(img: torch.Tensor) -> torch.Tensor:
        loss = (img - target).pow(2).mean()
        if target_emb is not None:
            loss = loss + perceptual_weight * (1.0 - backend.image_encode(img) @ target_emb)
        return loss

    def run_phase(
        z_init: torch.Tensor, n: int, lr: float, noise0: float, phase_seed: int, ramp: bool
    ) -> tuple[float, torch.Tensor]:
        g = torch.Generator().manual_seed(phase_seed)
        z = z_init.clone().requires_grad_(True)
        opt = torch.optim.Adam([z], lr=lr)
        best_v, best_z = float("inf"), z_init.clone()
        for t in range(n):
            frac = t / n
            cur_lr = lr * 0.5 * (1.0 + math.cos(math.pi * frac))
            if ramp:
                cur_lr *= min(1.0, frac / 0.05)
            for group in opt.param_groups:
                group["lr"] = cur_lr
            noise = noise0 * max(0.0, 1.0 - frac / _EXPLORE_SPLIT) ** 2 if noise0 else 0.0
            z_eval = z + noise * torch.randn(z.shape, generator=g, dtype=DTYPE) if noise else z
            loss = objective(generate(gen, z_eval.unsqueeze(0), cfg).squeeze(0))
            if not torch.isfinite(loss):
                raise NumericError("non-finite inversion objective")
            if noise == 0.0:
                value = float(loss.detach())
                if value < best_v:
                    best_v, best_z = value, z.detach().clone()
            opt.zero_grad()
            loss.backward()
            opt.step()
        final = float(objective(generate(gen, z.detach().unsqueeze(0), cfg).squeeze(0)))
        if final < best_v:
            best_v, best_z = final, z.detach().clone()
        return best_v, best_z

    z0 = torch.zeros(gen.descriptor.latent_dim, dtype=DTYPE)
    if steps == 0:
        return z0
    explore_steps = int(steps * _EXPLORE_SPLIT)
    polish_steps = steps - explore_steps
    best_v, best_z = float("inf"), z0
    if explore_steps:
        best_v, best_z = run_phase(z0, explore_steps, _EXPLORE_LR, _NOISE_SCALE, seed, ramp=True)
    if polish_steps:
        v, z = run_phase(best_z, polish_steps, _POLISH_LR, 0.0, seed + 1, ramp=False)
        if v < best_v:
            best_v, best_z = v, z
    return best_z
