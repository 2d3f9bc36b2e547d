"""Command line interface.

Report-producing commands write delimited output (CSV) and a rendered
matplotlib figure side by side when ``--report-dir`` is given.
"""
from __future__ import annotations

import json
from dataclasses import replace as dc_replace
from pathlib import Path

import click
import torch

from . import apps, directions as dirs, metrics, trainer
from .arch import SamplerConfig, build_architecture, random_weights, sample_z, generate
from .checkpoint import load_checkpoint, save_checkpoint
from .losses import OneShotSpec, TextDomainSpec, get_backend
from .paramspace import parse_kind, select
from .reporting import (
    load_png,
    save_image_grid,
    save_loss_curve,
    save_metric_chart,
    save_png,
    save_size_chart,
    write_delimited,
)

_SPACE_ORDER = ("full", "syntconv", "affine", "mapping", "affine+64", "stylespace", "stylespace+64")


def _parse_seeds(spec: str) -> list[int]:
    if ".." in spec:
        lo, hi = spec.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in spec.split(",") if s != ""]


@click.group()
def main():
    """Domain adaptation toolkit for style-based generators."""


@main.command()
@click.option("--arch", default="sg2-512", help="architecture preset or checkpoint path")
@click.option("--block", default=None, type=int, help="offset block resolution override")
@click.option("--report-dir", type=click.Path(), default=None)
def spaces(arch, block, report_dir):
    """Print the trainable-parameter size table for every parameter space."""
    desc = (
        load_checkpoint(arch).descriptor if arch.endswith(".ckpt") else build_architecture(arch)
    )
    rows = []
    for name in _SPACE_ORDER:
        kind = parse_kind(name, default_block=block)
        try:
            total = select(desc, kind).total
        except Exception:
            continue
        rounded = f"{total / 1e6:.1f}M" if total >= 100_000 else f"{total / 1e3:.1f}K"
        rows.append((str(kind), total, rounded))
    click.echo(f"# parameter spaces for {desc.name}")
    click.echo("space\tparameters\trounded")
    for label, total, rounded in rows:
        click.echo(f"{label}\t{total}\t{rounded}")
    if report_dir:
        out = Path(report_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_delimited(
            out / "spaces.csv", ["space", "parameters", "rounded"], rows
        )
        save_size_chart([r[0] for r in rows], [r[1] for r in rows], out / "spaces.png", desc.name)
        click.echo(f"report written to {out}/spaces.csv and spaces.png")


@main.command("make-toy")
@click.option("--preset", default="toy32")
@click.option("--seed", default=0, type=int)
@click.option("--out", required=True, type=click.Path())
def make_toy(preset, seed, out):
    """Create a random desk-scale generator checkpoint."""
    weights = random_weights(build_architecture(preset), seed=seed)
    save_checkpoint(weights, out, source=f"random({preset}, seed={seed})")
    click.echo(f"wrote {out} ({weights.descriptor.fingerprint[:12]}...)")


@main.command()
@click.option("--gen", "gen_path", required=True, type=click.Path(exists=True))
@click.option("--space", default="stylespace")
@click.option("--loss", "loss_kind", default="text", type=click.Choice(["text", "oneshot", "mean-color"]))
@click.option("--target", default=None, help="target text or R,G,B triple")
@click.option("--source", default=None, help="source text")
@click.option("--reference", default=None, type=click.Path(exists=True), help="reference image (one-shot)")
@click.option("--preset", "regime", default="similar_text")
@click.option("--iterations", default=None, type=int)
@click.option("--batch-size", default=None, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--backend", default="stub-train")
@click.option("--psi", default=1.0, type=float)
@click.option("--out", required=True, type=click.Path())
@click.option("--report-dir", type=click.Path(), default=None)
def adapt(gen_path, space, loss_kind, target, source, reference, regime,
          iterations, batch_size, seed, backend, psi, out, report_dir):
    """Run one adaptation and write the resulting direction or child checkpoint."""
    parent = load_checkpoint(gen_path)
    kind = parse_kind(space)
    hp = trainer.preset(kind, regime)
    hp = dc_replace(
        hp,
        iterations=iterations if iterations is not None else hp.iterations,
        batch_size=batch_size if batch_size is not None else hp.batch_size,
        seed=seed,
    )
    backend_obj = None
    label = target or ""
    if loss_kind == "text":
        if not target or not source:
            raise click.UsageError("--loss text needs --target and --source")
        spec = TextDomainSpec(target_text=target, source_text=source)
        backend_obj = get_backend(backend)
    elif loss_kind == "oneshot":
        if not reference:
            raise click.UsageError("--loss oneshot needs --reference")
        spec = OneShotSpec(reference_image=load_png(reference))
        backend_obj = get_backend(backend)
        label = label or Path(reference).stem
    else:
        rgb = [float(v) for v in (target or "0,0,0").split(",")]
        spec = trainer.mean_color_objective(rgb)
        label = label or f"mean-color({target})"
    cfg = SamplerConfig(truncation_psi=psi)
    result = trainer.adapt(parent, kind, spec, backend_obj, hp, cfg=cfg, domain_label=label)
    if result.direction is not None:
        dirs.save(result.direction, out)
    else:
        child, _ = result.build_child(parent)
        save_checkpoint(child, out, source=f"adapt({space}) from {gen_path}")
    click.echo(f"wrote {out}; final loss {result.loss_trace[-1] if result.loss_trace else float('nan'):.5f}")
    if report_dir:
        rpt = Path(report_dir)
        rpt.mkdir(parents=True, exist_ok=True)
        manifest = {
            "generator": str(gen_path),
            "space": str(kind),
            "loss": loss_kind,
            "target": target,
            "source": source,
            "regime": regime,
            "hyperparams": {
                "learning_rate": hp.learning_rate,
                "betas": list(hp.betas),
                "weight_decay": hp.weight_decay,
                "batch_size": hp.batch_size,
                "iterations": hp.iterations,
                "seed": hp.seed,
            },
            "parent_fingerprint": result.parent_fingerprint,
        }
        (rpt / "run_manifest.json").write_text(json.dumps(manifest, indent=2))
        write_delimited(
            rpt / "loss_trace.csv",
            ["iteration", "loss"],
            list(enumerate(result.loss_trace)),
        )
        save_loss_curve(result.loss_trace, rpt / "loss_trace.png", title=f"{kind} / {loss_kind}")
        click.echo(f"report written to {rpt}")


@main.group("dir")
def dir_group():
    """Direction file operations."""


@dir_group.command("mix")
@click.option("--in", "terms", multiple=True, required=True, help="path.sdir:coeff")
@click.option("--out", required=True, type=click.Path())
def dir_mix(terms, out):
    """Linearly combine direction files."""
    parsed = []
    for term in terms:
        path, _, coeff = term.rpartition(":")
        if not path:
            path, coeff = coeff, "1.0"
        parsed.append((dirs.load(path), float(coeff)))
    mixed = dirs.mix(parsed)
    dirs.save(mixed, out)
    click.echo(f"wrote {out} ({mixed.domain_label})")


@dir_group.command("apply")
@click.option("--gen", "gen_path", required=True, type=click.Path(exists=True))
@click.option("--dir", "dir_path", required=True, type=click.Path(exists=True))
@click.option("--strength", default=1.0, type=float)
@click.option("--seeds", default="0..15")
@click.option("--psi", default=0.7, type=float)
@click.option("--grid", default=None, type=click.Path(), help="write a gallery figure")
@click.option("--out-dir", default=None, type=click.Path(), help="write per-seed PNGs")
def dir_apply(gen_path, dir_path, strength, seeds, psi, grid, out_dir):
    """Apply a direction to sampled images."""
    weights = load_checkpoint(gen_path)
    direction = dirs.load(dir_path)
    binding = dirs.transfer(direction, weights)
    if binding.warning:
        click.echo(f"warning: {binding.warning}", err=True)
    images = []
    seed_list = _parse_seeds(seeds)
    for seed in seed_list:
        cfg = SamplerConfig(truncation_psi=psi, seed=seed)
        z = sample_z(weights.descriptor, seed)
        images.append(binding.generate(z, cfg, strength=strength).squeeze(0))
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for seed, img in zip(seed_list, images):
            save_png(img, out / f"seed_{seed:05d}.png")
        click.echo(f"wrote {len(images)} images to {out}")
    if grid:
        save_image_grid(images, grid, title=direction.domain_label)
        click.echo(f"wrote {grid}")


@main.command("eval")
@click.option("--metric", "metric_name", default="quality", type=click.Choice(["quality", "diversity"]))
@click.option("--gen", "gen_path", required=True, type=click.Path(exists=True))
@click.option("--dir", "dir_path", default=None, type=click.Path(exists=True))
@click.option("--text", default=None, help="target description (quality)")
@click.option("--n", default=metrics.SIMILAR_EVAL_IMAGES, type=int)
@click.option("--repeats", default=metrics.EVAL_REPEATS, type=int)
@click.option("--backend", default="stub-eval")
@click.option("--psi", default=0.7, type=float)
@click.option("--seed", default=0, type=int)
@click.option("--out", default=None, type=click.Path(), help="machine-readable JSON report")
@click.option("--report-dir", default=None, type=click.Path())
def eval_cmd(metric_name, gen_path, dir_path, text, n, repeats, backend, psi, seed, out, report_dir):
    """Evaluate a generator (optionally with a direction applied)."""
    weights = load_checkpoint(gen_path)
    backend_obj = get_backend(backend)
    direction = dirs.load(dir_path) if dir_path else None
    if metric_name == "quality" and not text and direction is None:
        raise click.UsageError("quality needs --text or --dir with a labeled direction")
    target_text = text or (direction.domain_label if direction else "")
    target_emb = backend_obj.text_encode(target_text) if metric_name == "quality" else None

    def _sample_batch(repeat: int) -> torch.Tensor:
        base = seed + repeat * n
        z = torch.cat([sample_z(weights.descriptor, base + i) for i in range(n)])
        cfg = SamplerConfig(truncation_psi=psi, seed=base)
        if direction is not None:
            return dirs.transfer(direction, weights).generate(z, cfg)
        return generate(weights, z, cfg)

    reports = []
    for r in range(repeats):
        images = _sample_batch(r)
        if metric_name == "quality":
            reports.append(metrics.quality(images, target_emb, backend_obj))
        else:
            reports.append(metrics.diversity(images, backend_obj))
    final = metrics.aggregate_repeats(reports)
    click.echo(json.dumps(final.to_dict(), indent=2))
    if out:
        Path(out).write_text(json.dumps(final.to_dict(), indent=2))
    if report_dir:
        rpt = Path(report_dir)
        rpt.mkdir(parents=True, exist_ok=True)
        write_delimited(
            rpt / f"{metric_name}.csv",
            ["repeat", "value"],
            list(enumerate(final.per_repeat_values, start=1)),
        )
        save_metric_chart([final.to_dict()], rpt / f"{metric_name}.png")
        click.echo(f"report written to {rpt}")


@main.command()
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=0, type=int)
@click.option("--psi", default=0.7, type=float)
@click.option("--out", "out_dir", required=True, type=click.Path())
def morph(plan_path, seed, psi, out_dir):
    """Render a morph plan to a PNG frame sequence plus a contact sheet."""
    doc = json.loads(Path(plan_path).read_text())
    plan = apps.plan_from_document(
        doc,
        resolve_generator=load_checkpoint,
        resolve_direction=dirs.load,
    )
    gen0 = plan.stages[0].state_at(0.0)[0]
    z = sample_z(gen0.descriptor, seed)
    cfg = SamplerConfig(truncation_psi=psi, seed=seed)
    frames = apps.render_morph(plan, z, cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        save_png(frame.squeeze(0), out / f"frame_{i:05d}.png")
    write_delimited(
        out / "schedule.csv",
        ["frame", "stage", "t"],
        [
            (i, i // plan.frames_per_stage, (i % plan.frames_per_stage) / (plan.frames_per_stage - 1))
            for i in range(len(frames))
        ],
    )
    save_image_grid(
        [f.squeeze(0) for f in frames], out / "contact_sheet.png", cols=plan.frames_per_stage
    )
    click.echo(f"wrote {len(frames)} frames to {out}")


@main.command()
@click.option("--source", required=True, type=click.Path(exists=True))
@click.option("--src-gen", required=True, type=click.Path(exists=True))
@click.option("--tgt-gen", required=True, type=click.Path(exists=True))
@click.option("--reference", default=None, type=click.Path(exists=True))
@click.option("--steps", default=apps.DEFAULT_TRANSLATION_STEPS, type=int)
@click.option("--psi-opt", default=apps.DEFAULT_PSI_OPT, type=float)
@click.option("--psi-infer", default=apps.DEFAULT_PSI_INFER, type=float)
@click.option("--split", default=apps.DEFAULT_STYLE_SPLIT, type=int)
@click.option("--out", required=True, type=click.Path())
def translate(source, src_gen, tgt_gen, reference, steps, psi_opt, psi_infer, split, out):
    """Cross-domain translation (reference-based when --reference is given)."""
    cfg = apps.TranslationConfig(
        steps=steps, psi_opt=psi_opt, psi_infer=psi_infer, style_split_index=split
    )
    src_w = load_checkpoint(src_gen)
    tgt_w = load_checkpoint(tgt_gen)
    src_img = load_png(source)
    if reference:
        img = apps.translate_ref(src_img, load_png(reference), src_w, tgt_w, cfg)
    else:
        img = apps.translate(src_img, src_w, tgt_w, cfg)
    save_png(img, out)
    click.echo(f"wrote {out}")


@main.command()
@click.option("--port", default=8000, type=int)
@click.option("--host", default="127.0.0.1")
@click.option("--registry-dir", required=True, type=click.Path())
@click.option("--ui-dir", default=None, type=click.Path(exists=True), help="serve a built web console at /ui")
def serve(port, host, registry_dir, ui_dir):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(registry_dir, ui_dir=ui_dir), host=host, port=port)


if __name__ == "__main__":
    main()
