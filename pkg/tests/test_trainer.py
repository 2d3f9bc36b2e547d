from dataclasses import replace

import pytest
import torch

from styledomain import (
    AFFINE,
    FULL,
    MAPPING,
    STYLESPACE,
    SYNT_CONV,
    SamplerConfig,
    affine_plus,
    build_architecture,
    generate,
    random_weights,
    sample_z,
    stylespace_plus,
    transfer,
)
from styledomain.arch import DTYPE
from styledomain.errors import ConfigurationError
from styledomain.losses import (
    AugmentationPolicy,
    OneShotSpec,
    TextDomainSpec,
    adversarial_losses,
    make_discriminator,
)
from styledomain.trainer import (
    Hyperparams,
    TrainableState,
    adapt,
    adapt_adversarial,
    invert,
    mean_color_objective,
    preset,
)
from helpers import adam_ref, weights_hashes

QUICK = Hyperparams(learning_rate=0.05, betas=(0.9, 0.999), batch_size=2, iterations=8, seed=0)


class TestPresets:
    @pytest.mark.parametrize(
        "kind,lr,betas",
        [
            (AFFINE, 0.01, (0.0, 0.999)),
            (STYLESPACE, 0.05, (0.9, 0.999)),
            (FULL, 0.002, (0.0, 0.999)),
            (SYNT_CONV, 0.002, (0.0, 0.999)),
            (MAPPING, 0.3, (0.0, 0.999)),
        ],
    )
    def test_similar_regime_values(self, kind, lr, betas):
        for regime in ("similar_text", "similar_oneshot"):
            hp = preset(kind, regime)
            assert hp.learning_rate == lr
            assert hp.betas == betas
            assert hp.weight_decay == 0.0
            assert hp.batch_size == 4
            assert hp.iterations == 300

    def test_ada_rate_bump(self):
        assert preset(affine_plus(64), "ada").learning_rate == 0.02
        assert preset(STYLESPACE, "ada").learning_rate == 0.02
        assert preset(stylespace_plus(64), "ada").learning_rate == 0.02
        assert preset(FULL, "ada").learning_rate == 0.002
        assert preset(SYNT_CONV, "ada").learning_rate == 0.002
        assert preset(MAPPING, "ada").learning_rate == 0.002

    def test_unknown_combination(self):
        with pytest.raises(ConfigurationError):
            preset(affine_plus(64), "similar_text")
        with pytest.raises(ConfigurationError):
            preset(STYLESPACE, "turbo")

    def test_hyperparams_validation(self):
        with pytest.raises(ConfigurationError):
            Hyperparams(learning_rate=0.0, betas=(0.0, 0.999))
        with pytest.raises(ConfigurationError):
            Hyperparams(learning_rate=0.1, betas=(0.0, 1.0))


class TestAdapt:
    def test_zero_iterations_yields_zero_direction(self, toy32_parent):
        hp = replace(QUICK, iterations=0)
        res = adapt(toy32_parent, STYLESPACE, mean_color_objective([0, 0, 0]), None, hp)
        assert res.loss_trace == ()
        assert res.direction is not None
        for layer in res.direction.delta_styles:
            assert torch.equal(layer, torch.zeros_like(layer))

    def test_same_seed_bit_identical(self, toy32_parent):
        obj = mean_color_objective([0.2, 0.0, -0.1])
        a = adapt(toy32_parent, STYLESPACE, obj, None, QUICK)
        b = adapt(toy32_parent, STYLESPACE, obj, None, QUICK)
        assert a.loss_trace == b.loss_trace
        for x, y in zip(a.direction.delta_styles, b.direction.delta_styles):
            assert torch.equal(x, y)

    def test_mean_color_descends_and_matches_independent_adam(self, toy32_parent):
        """The trainer's trajectory is cross-checked against a textbook ADAM loop."""
        target = [0.5, -0.25, 0.4]
        hp = replace(QUICK, iterations=30, batch_size=2, seed=3)
        res = adapt(toy32_parent, STYLESPACE, mean_color_objective(target), None, hp)
        assert res.loss_trace[-1] < res.loss_trace[0]

        # independent optimizer on the same objective and latent stream
        desc = toy32_parent.descriptor
        tgt = torch.tensor(target, dtype=DTYPE)
        g = torch.Generator().manual_seed(3)

        z_stream = [torch.randn(2, desc.latent_dim, generator=g, dtype=DTYPE) for _ in range(30)]
        step = {"i": 0}

        def grad_fn(params):
            state = TrainableState(toy32_parent, STYLESPACE)
            for (name, _, _), p in zip(state.selection.slots, params):
                state.params[name] = p.detach().clone().requires_grad_(True)
            imgs = state.forward(z_stream[step["i"]], SamplerConfig())
            step["i"] += 1
            loss = (imgs.mean(dim=(0, 2, 3)) - tgt).pow(2).sum()
            loss.backward()
            grads = [state.params[name].grad for name, _, _ in state.selection.slots]
            return float(loss.detach()), grads

        init = [torch.zeros(shape, dtype=DTYPE) for _, shape, _ in TrainableState(toy32_parent, STYLESPACE).selection.slots]
        ref_trace = adam_ref(grad_fn, init, lr=0.05, betas=(0.9, 0.999), steps=30)
        assert abs(ref_trace[0] - res.loss_trace[0]) < 1e-9
        assert abs(ref_trace[-1] - res.loss_trace[-1]) < 1e-6

    def test_parent_tensors_never_touched(self, toy32_parent):
        before = weights_hashes(toy32_parent)
        adapt(toy32_parent, FULL, mean_color_objective([0.1, 0.1, 0.1]), None, QUICK)
        assert weights_hashes(toy32_parent) == before

    @pytest.mark.parametrize(
        "kind",
        [FULL, SYNT_CONV, AFFINE, MAPPING, STYLESPACE, affine_plus(8), stylespace_plus(8)],
        ids=str,
    )
    def test_result_populates_exactly_the_selection(self, toy32_parent, kind):
        res = adapt(toy32_parent, kind, mean_color_objective([0.3, 0.0, 0.0]), None, QUICK)
        from styledomain.paramspace import select

        slot_names = set(select(toy32_parent.descriptor, kind).slot_names)
        if kind.is_stylespace:
            assert res.direction is not None and res.weight_deltas is None
            n = toy32_parent.descriptor.num_style_layers
            assert {f"delta_s.{i}" for i in range(n)} <= slot_names
            assert (res.direction.offsets is not None) == kind.uses_offsets
        else:
            assert res.direction is None
            assert set(res.weight_deltas) == slot_names

    def test_stylespace_does_not_allocate_generator_gradients(self, toy32_parent):
        adapt(toy32_parent, STYLESPACE, mean_color_objective([0.1, 0.2, 0.3]), None, QUICK)
        for name, tensor in toy32_parent.named_tensors().items():
            assert tensor.grad is None, name
            assert not tensor.requires_grad

    def test_directional_text_loss_descends(self, toy32_parent, train_backend):
        spec = TextDomainSpec("a sketch drawing", "a photo portrait")
        hp = replace(QUICK, iterations=40, seed=5)
        res = adapt(toy32_parent, STYLESPACE, spec, train_backend, hp)
        assert res.loss_trace[-1] < res.loss_trace[5]
        assert res.direction is not None

    def test_one_shot_loss_descends(self, toy32_parent, train_backend):
        ref = generate(
            random_weights(toy32_parent.descriptor, seed=9),
            sample_z(toy32_parent.descriptor, 123),
            SamplerConfig(truncation_psi=0.8),
        ).squeeze(0)
        spec = OneShotSpec(reference_image=ref)
        hp = replace(QUICK, iterations=25, seed=6)
        res = adapt(
            toy32_parent, STYLESPACE, spec, train_backend, hp, ref_inversion_steps=40
        )
        assert res.loss_trace[-1] < res.loss_trace[0]

    def test_fixed_pool_mode_reuses_latents(self, toy32_parent):
        hp = replace(QUICK, iterations=6)
        res = adapt(
            toy32_parent, STYLESPACE, mean_color_objective([0.4, 0.4, 0.4]), None, hp,
            latent_mode="fixed_pool",
        )
        # with fixed latents and a deterministic objective the trace is smooth
        assert len(res.loss_trace) == 6

    def test_build_child_applies_deltas(self, toy32_parent):
        res = adapt(toy32_parent, AFFINE, mean_color_objective([0.2, -0.2, 0.0]), None, QUICK)
        child, offsets = res.build_child(toy32_parent)
        assert offsets is None
        named_p = toy32_parent.named_tensors()
        named_c = child.named_tensors()
        assert not torch.equal(named_c["affine.0.weight"], named_p["affine.0.weight"])
        assert torch.equal(named_c["mapping.0.weight"], named_p["mapping.0.weight"])

    def test_backend_required_for_embedding_losses(self, toy32_parent):
        with pytest.raises(ConfigurationError):
            adapt(toy32_parent, STYLESPACE, TextDomainSpec("a", "b"), None, QUICK)


class TestAdaptAdversarial:
    def _toy8(self):
        desc = build_architecture(
            dict(
                name="toy8",
                base_resolution=4,
                output_resolution=8,
                channel_schedule=((4, 32), (8, 16)),
                mapping_layers=2,
                latent_dim=32,
                activation="elu",
            )
        )
        return desc, random_weights(desc, seed=0)

    def _two_color_data(self):
        c1 = torch.tensor([0.8, -0.5, -0.5], dtype=DTYPE)
        c2 = torch.tensor([-0.6, 0.6, 0.7], dtype=DTYPE)
        return torch.stack(
            [c1[:, None, None].expand(3, 8, 8)] * 8 + [c2[:, None, None].expand(3, 8, 8)] * 8
        )

    def test_frozen_zero_discriminator_leaves_generator_unchanged(self, toy32_parent):
        data = torch.zeros(4, 3, 32, 32, dtype=DTYPE)
        disc = make_discriminator(32, seed=0)
        zeroed = {n: torch.zeros_like(t) for n, t in disc.named_tensors().items()}
        from styledomain.trainer import _disc_with

        disc0 = _disc_with(disc, zeroed)
        hp = replace(QUICK, iterations=5)
        res = adapt_adversarial(
            toy32_parent, STYLESPACE, data, AugmentationPolicy(ops=(), p=0.0), hp,
            disc=disc0, train_disc=False,
        )
        for layer in res.direction.delta_styles:
            assert torch.equal(layer, torch.zeros_like(layer))

    def test_first_iteration_d_loss_is_definitional(self, toy32_parent):
        data = torch.randn(6, 3, 32, 32, generator=torch.Generator().manual_seed(1), dtype=DTYPE)
        aug = AugmentationPolicy(ops=("blit",), p=0.5, seed=11)
        hp = replace(QUICK, iterations=1, seed=4)
        res = adapt_adversarial(toy32_parent, STYLESPACE, data, aug, hp, disc_seed=2)

        g = torch.Generator().manual_seed(4)
        idx = torch.randint(0, 6, (hp.batch_size,), generator=g)
        real = data[idx]
        z = torch.randn(hp.batch_size, toy32_parent.descriptor.latent_dim, generator=g, dtype=DTYPE)
        fake = generate(toy32_parent, z, SamplerConfig())  # zero direction at start
        disc = make_discriminator(32, seed=2)
        _, d_loss = adversarial_losses(fake, real, disc, aug.with_seed(11))
        assert abs(res.aux_traces["d_loss"][0] - float(d_loss)) < 1e-9

    def test_two_color_dataset_mean_color(self):
        desc, parent = self._toy8()
        data = self._two_color_data()
        data_mean = data.mean(dim=(0, 2, 3))
        hp = replace(preset(stylespace_plus(8), "ada"), iterations=500, batch_size=4, seed=0)
        res = adapt_adversarial(
            parent, stylespace_plus(8), data,
            AugmentationPolicy(ops=("blit",), p=0.5, seed=0), hp, disc_lr=0.005,
        )
        imgs = transfer(res.direction, parent).generate(
            sample_z(desc, list(range(16))), SamplerConfig()
        )
        gen_mean = imgs.mean(dim=(0, 2, 3))
        assert float((gen_mean - data_mean).abs().max()) < 0.1

    def test_dataset_validation(self, toy32_parent):
        with pytest.raises(ConfigurationError):
            adapt_adversarial(
                toy32_parent, STYLESPACE, torch.zeros(0, 3, 32, 32, dtype=DTYPE),
                AugmentationPolicy(ops=(), p=0.0), QUICK,
            )


class TestInvert:
    def test_zero_steps_returns_initialization(self, toy32_parent):
        target = torch.zeros(3, 32, 32, dtype=DTYPE)
        z = invert(toy32_parent, target, steps=0)
        assert torch.equal(z, torch.zeros(toy32_parent.descriptor.latent_dim, dtype=DTYPE))

    def test_defaults(self):
        import inspect

        sig = inspect.signature(invert)
        assert sig.parameters["steps"].default == 1000
        assert sig.parameters["psi"].default == 0.7

    def test_short_self_inversion_improves(self, toy32_parent):
        cfg = SamplerConfig(truncation_psi=0.7)
        target = generate(toy32_parent, sample_z(toy32_parent.descriptor, 7), cfg).squeeze(0)
        z0_loss = float((generate(toy32_parent, torch.zeros(1, 64, dtype=DTYPE), cfg).squeeze(0) - target).pow(2).mean())
        z = invert(toy32_parent, target, steps=200, psi=0.7)
        rec = generate(toy32_parent, z.unsqueeze(0), cfg).squeeze(0)
        assert float((rec - target).pow(2).mean()) < 0.25 * z0_loss

    def test_deterministic(self, toy32_parent):
        cfg = SamplerConfig(truncation_psi=0.7)
        target = generate(toy32_parent, sample_z(toy32_parent.descriptor, 8), cfg).squeeze(0)
        z1 = invert(toy32_parent, target, steps=60, psi=0.7)
        z2 = invert(toy32_parent, target, steps=60, psi=0.7)
        assert torch.equal(z1, z2)
