"""Report rendering: PNG encoding, delimited tables, matplotlib figures.

Every CLI report path writes machine-readable delimited output and a
rendered figure side by side.  PNG bytes are a pure function of the pixel
tensor, so payload hashes are reproducible.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import torch
from PIL import Image


def tensor_to_uint8(img: torch.Tensor) -> np.ndarray:
    """Map a (3, H, W) tensor in roughly [-1, 1] to an (H, W, 3) uint8 array."""
    arr = img.detach().to(torch.float64).clamp(-1.0, 1.0).numpy()
    arr = ((arr + 1.0) * 127.5).round().astype(np.uint8)
    return np.transpose(arr, (1, 2, 0))


def to_png_bytes(img: torch.Tensor) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(tensor_to_uint8(img)).save(buf, format="PNG")
    return buf.getvalue()


def save_png(img: torch.Tensor, path: str | Path) -> None:
    Path(path).write_bytes(to_png_bytes(img))


def load_png(path: str | Path) -> torch.Tensor:
    arr = np.asarray(Image.open(path).convert("RGB"), dtype=np.float64)
    return torch.from_numpy(np.transpose(arr, (2, 0, 1)) / 127.5 - 1.0)


def write_delimited(path: str | Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def save_loss_curve(trace: Sequence[float], path: str | Path, title: str = "loss") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(trace)), trace, lw=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_image_grid(
    images: Sequence[torch.Tensor], path: str | Path, title: str = "", cols: int = 4
) -> None:
    n = len(images)
    cols = max(1, min(cols, n))
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(2.2 * cols, 2.2 * rows), squeeze=False)
    for i in range(rows * cols):
        ax = axes[i // cols][i % cols]
        ax.axis("off")
        if i < n:
            ax.imshow(tensor_to_uint8(images[i]))
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_size_chart(
    labels: Sequence[str], totals: Sequence[int], path: str | Path, arch: str
) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(range(len(labels)), [t / 1e6 for t in totals], color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("trainable parameters (M)")
    ax.set_yscale("log")
    ax.set_title(f"parameter spaces: {arch}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_metric_chart(report_dicts: Sequence[dict], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for rep in report_dicts:
        ax.plot(
            range(1, rep["repeats"] + 1), rep["per_repeat"], marker="o", label=rep["metric"]
        )
    ax.set_xlabel("repeat")
    ax.set_ylabel("value")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
