"""Generator checkpoint archive: descriptor + named tensors + lineage.

See ``docs/formats.md`` for the byte layout.  Loading validates the
checksum, rebuilds the descriptor from its canonical serialization, and
cross-checks every tensor shape; any disagreement is fatal.
"""
from __future__ import annotations

from pathlib import Path

from .arch import (
    GeneratorWeights,
    _weights_from_named,
    descriptor_from_dict,
    descriptor_to_dict,
    expected_shapes,
)
from .container import read_container, write_container
from .errors import SerializationError, ShapeError

MAGIC = b"SDCKPT01"


def save_checkpoint(
    weights: GeneratorWeights, path: str | Path, source: str = ""
) -> None:
    header = {
        "kind": "generator-checkpoint",
        "descriptor": descriptor_to_dict(weights.descriptor),
        "fingerprint": weights.descriptor.fingerprint,
        "lineage": list(weights.lineage),
        "source": source,
    }
    write_container(path, MAGIC, header, weights.named_tensors())


def load_checkpoint(path: str | Path) -> GeneratorWeights:
    header, tensors = read_container(path, MAGIC)
    if header.get("kind") != "generator-checkpoint":
        raise SerializationError(f"{path}: not a generator checkpoint")
    desc = descriptor_from_dict(header["descriptor"])
    if desc.fingerprint != header["fingerprint"]:
        raise SerializationError(f"{path}: stored fingerprint does not match descriptor")
    shapes = expected_shapes(desc)
    for slot, shape in shapes.items():
        if slot not in tensors:
            raise SerializationError(f"{path}: missing tensor {slot!r}")
        if tuple(tensors[slot].shape) != shape:
            raise ShapeError(f"{path}: tensor {slot!r} has shape {tuple(tensors[slot].shape)}, expected {shape}")
    return _weights_from_named(desc, tensors, tuple(header.get("lineage", ())))
