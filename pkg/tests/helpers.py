"""Independent oracles used to derive expected values.

Everything here deliberately re-implements the math with a different code
path (explicit loops, per-sample convolutions, textbook update rules) so
the library is checked against straight-line reference computations rather
than against itself.
"""
from __future__ import annotations

import math
import random

import numpy as np
import torch
import torch.nn.functional as F

from styledomain.arch import DTYPE, GeneratorWeights


def activate_ref(x: torch.Tensor, kind: str) -> torch.Tensor:
    if kind == "elu":
        return torch.where(x > 0, x, torch.exp(x) - 1.0)
    return torch.where(x > 0, x, 0.2 * x) * math.sqrt(2.0)


def mapping_ref(weights: GeneratorWeights, z: torch.Tensor, psi: float) -> torch.Tensor:
    x = z / torch.sqrt((z * z).mean() + 1e-8)
    for w, b in weights.mapping:
        x = activate_ref(x @ w.T + b, weights.descriptor.activation)
    return weights.w_mean + psi * (x - weights.w_mean)


def affine_ref(weights: GeneratorWeights, w: torch.Tensor) -> list[torch.Tensor]:
    out = []
    for aw, ab in weights.affine:
        rows = []
        for r in range(aw.shape[0]):
            rows.append(float(sum(aw[r, c] * w[c] for c in range(aw.shape[1])) + ab[r]))
        out.append(torch.tensor(rows, dtype=DTYPE))
    return out


def modconv_ref(
    x: torch.Tensor, kernel: torch.Tensor, style: torch.Tensor, demod: bool, eps: float = 1e-8
) -> torch.Tensor:
    """Single-sample modulated convolution via plain conv2d on a scaled kernel."""
    w = kernel * style[None, :, None, None]
    if demod:
        norm = torch.rsqrt(w.pow(2).sum(dim=(1, 2, 3)) + eps)
        w = w * norm[:, None, None, None]
    return F.conv2d(x.unsqueeze(0), w, padding=kernel.shape[-1] // 2).squeeze(0)


def forward_ref(
    weights: GeneratorWeights, z: torch.Tensor, psi: float, offsets=None
) -> torch.Tensor:
    """Monolithic single-sample end-to-end forward pass (no noise)."""
    desc = weights.descriptor
    w = mapping_ref(weights, z, psi)
    styles = [w @ aw.T + ab for aw, ab in weights.affine]

    conv_kernels = list(weights.conv_kernels)
    trgb_kernels = list(weights.trgb_kernels)
    if offsets is not None:
        c1, c2 = desc.block_conv_indices(offsets.block_resolution)
        conv_kernels[c1] = conv_kernels[c1] + offsets.delta_theta_1
        conv_kernels[c2] = conv_kernels[c2] + offsets.delta_theta_2
        ti = desc.trgb_index(offsets.block_resolution)
        trgb_kernels[ti] = trgb_kernels[ti] + offsets.delta_trgb

    act = desc.activation
    x = weights.const_input
    style_i = conv_i = trgb_i = 0
    rgb = None
    for block, (res, _) in enumerate(desc.channel_schedule):
        n_convs = 1 if block == 0 else 2
        for c in range(n_convs):
            if block > 0 and c == 0:
                x = F.interpolate(x.unsqueeze(0), scale_factor=2, mode="nearest").squeeze(0)
            x = modconv_ref(x, conv_kernels[conv_i], styles[style_i], demod=True)
            x = activate_ref(x + weights.conv_biases[conv_i][:, None, None], act)
            conv_i += 1
            style_i += 1
        y = modconv_ref(x, trgb_kernels[trgb_i], styles[style_i], demod=False)
        y = y + weights.trgb_biases[trgb_i][:, None, None]
        if rgb is None:
            rgb = y
        else:
            up = F.interpolate(
                rgb.unsqueeze(0), scale_factor=2, mode="bilinear", align_corners=False
            ).squeeze(0)
            rgb = up + y
        trgb_i += 1
        style_i += 1
    return rgb


def count_ref(preset_name: str, kind_name: str, block: int | None = None) -> int:
    """First-principles parameter counting from the preset definition alone."""
    from styledomain.arch import PRESETS

    cfg = PRESETS[preset_name]
    sched = list(cfg["channel_schedule"])
    latent = cfg["latent_dim"]
    n_map = cfg["mapping_layers"]

    convs: list[tuple[int, int]] = []  # (in, out), 3x3 each
    trgbs: list[int] = []
    prev = sched[0][1]
    for i, (_, ch) in enumerate(sched):
        if i == 0:
            convs.append((ch, ch))
        else:
            convs.append((prev, ch))
            convs.append((ch, ch))
        trgbs.append(ch)
        prev = ch
    style_dims = [cin for cin, _ in convs] + trgbs

    mapping = n_map * (latent * latent + latent)
    affine = sum(latent * d + d for d in style_dims)
    syntconv = (
        sum(o * i * 9 + o + 1 for i, o in convs)  # kernel + bias + noise gain
        + sched[0][1] * sched[0][0] * sched[0][0]  # constant input
        + sum(3 * c + 3 for c in trgbs)
    )
    if block is not None:
        bi = [r for r, _ in sched].index(block)
        off = (
            sched[bi][1] * sched[bi - 1][1]
            + sched[bi][1] * sched[bi][1]
            + 3 * sched[bi][1]
        )
    totals = {
        "Full": mapping + affine + syntconv,
        "SyntConv": syntconv,
        "Affine": affine,
        "Mapping": mapping,
        "StyleSpace": sum(style_dims),
    }
    if kind_name in totals:
        return totals[kind_name]
    if kind_name == "AffinePlus":
        return affine + off
    if kind_name == "StyleSpacePlus":
        return sum(style_dims) + off
    raise ValueError(kind_name)


def fd_gradcheck(params: dict[str, torch.Tensor], loss_fn, n_probe: int, seed: int = 0,
                 h: float = 1e-4) -> float:
    """Worst relative error between autograd and central differences."""
    for p in params.values():
        if p.grad is not None:
            p.grad = None
    loss = loss_fn()
    loss.backward()
    grads = {
        n: (p.grad.clone() if p.grad is not None else torch.zeros_like(p))
        for n, p in params.items()
    }
    rng = random.Random(seed)
    flat = [(n, i) for n, p in params.items() for i in range(p.numel())]
    worst = 0.0
    for name, idx in rng.sample(flat, min(n_probe, len(flat))):
        p = params[name]
        with torch.no_grad():
            orig = p.view(-1)[idx].item()
            p.view(-1)[idx] = orig + h
            lp = float(loss_fn().detach())
            p.view(-1)[idx] = orig - h
            lm = float(loss_fn().detach())
            p.view(-1)[idx] = orig
        numeric = (lp - lm) / (2 * h)
        analytic = grads[name].view(-1)[idx].item()
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, rel)
    return worst


def adam_ref(grad_fn, params: list[torch.Tensor], lr: float, betas: tuple[float, float],
             steps: int) -> list[float]:
    """Textbook ADAM loop (bias-corrected), independent of torch.optim."""
    b1, b2 = betas
    eps = 1e-8
    m = [torch.zeros_like(p) for p in params]
    v = [torch.zeros_like(p) for p in params]
    trace = []
    for t in range(1, steps + 1):
        loss, grads = grad_fn(params)
        trace.append(loss)
        for i, gr in enumerate(grads):
            m[i] = b1 * m[i] + (1 - b1) * gr
            v[i] = b2 * v[i] + (1 - b2) * gr * gr
            m_hat = m[i] / (1 - b1**t)
            v_hat = v[i] / (1 - b2**t)
            params[i] = params[i] - lr * m_hat / (torch.sqrt(v_hat) + eps)
    return trace


def mmd2_ref(a: np.ndarray, b: np.ndarray) -> float:
    """Direct-summation unbiased MMD^2 with the degree-3 polynomial kernel."""
    d = a.shape[1]

    def k(x, y):
        return (float(np.dot(x, y)) / d + 1.0) ** 3

    m, n = len(a), len(b)
    saa = sum(k(a[i], a[j]) for i in range(m) for j in range(m) if i != j)
    sbb = sum(k(b[i], b[j]) for i in range(n) for j in range(n) if i != j)
    if m == n:
        sab = sum(k(a[i], b[j]) for i in range(m) for j in range(n) if i != j)
        return saa / (m * (m - 1)) + sbb / (n * (n - 1)) - 2 * sab / (m * (m - 1))
    sab = sum(k(a[i], b[j]) for i in range(m) for j in range(n))
    return saa / (m * (m - 1)) + sbb / (n * (n - 1)) - 2 * sab / (m * n)


def frechet_ref(mu1, cov1, mu2, cov2) -> float:
    """Frechet distance via scipy's dense matrix square root."""
    import scipy.linalg

    covmean = scipy.linalg.sqrtm(np.asarray(cov1) @ np.asarray(cov2))
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    gap = float(((np.asarray(mu1) - np.asarray(mu2)) ** 2).sum())
    return gap + float(np.trace(cov1) + np.trace(cov2) - 2.0 * np.trace(covmean))


def tensor_hash(t: torch.Tensor) -> bytes:
    import hashlib

    return hashlib.sha256(t.detach().contiguous().numpy().tobytes()).digest()


def weights_hashes(weights: GeneratorWeights) -> dict[str, bytes]:
    return {n: tensor_hash(t) for n, t in weights.named_tensors().items()}
