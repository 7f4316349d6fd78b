"""Checkpoint file: text manifest followed by little-endian float64 payload.

    TCNSEP-CHECKPOINT 1
    config {...json...}
    seed <int>
    params <count>
    <name> <d1>x<d2>...      (one line per parameter, payload order)
    data
    <raw bytes>
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .tasnet import SeparationModel

MAGIC = "TCNSEP-CHECKPOINT 1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(model: SeparationModel, path: str | Path) -> None:
    lines = [MAGIC, "config " + json.dumps(dataclasses.asdict(model.config), sort_keys=True),
             f"seed {model.seed}", f"params {len(model.params)}"]
    for name, p in model.params.items():
        lines.append(f"{name} {'x'.join(str(d) for d in p.shape)}")
    lines.append("data")
    payload = b"".join(p.data.astype("<f8").tobytes() for p in model.params.values())
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8") + payload)


def _take_line(buf: bytes, pos: int) -> tuple[str, int]:
    end = buf.find(b"\n", pos)
    if end < 0:
        raise CheckpointError("truncated checkpoint header")
    return buf[pos:end].decode("utf-8"), end + 1


def load_checkpoint(path: str | Path, model: SeparationModel | None = None) -> SeparationModel:
    """Restore parameters bit for bit; builds the model from the stored config unless one is given."""
    buf = Path(path).read_bytes()
    magic, pos = _take_line(buf, 0)
    if magic != MAGIC:
        raise CheckpointError(f"not a checkpoint (bad magic {magic[:40]!r})")
    line, pos = _take_line(buf, pos)
    if not line.startswith("config "):
        raise CheckpointError("missing config line")
    try:
        config = ModelConfig(**json.loads(line[len("config "):]))
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"invalid stored config: {exc}") from exc
    line, pos = _take_line(buf, pos)
    seed = int(line.split()[1])
    line, pos = _take_line(buf, pos)
    count = int(line.split()[1])
    manifest = []
    for _ in range(count):
        line, pos = _take_line(buf, pos)
        name, shape = line.rsplit(" ", 1)
        manifest.append((name, tuple(int(d) for d in shape.split("x"))))
    line, pos = _take_line(buf, pos)
    if line != "data":
        raise CheckpointError("manifest is not followed by the data marker")
    if model is None:
        model = SeparationModel(config, seed)
    elif model.config != config:
        raise CheckpointError("checkpoint config differs from the target model's config")
    if [n for n, _ in manifest] != list(model.params):
        raise CheckpointError("manifest parameter names do not match the model")
    state = {}
    for name, shape in manifest:
        want = model.params[name].shape
        if shape != want:
            raise CheckpointError(f"manifest shape mismatch for {name}: {shape} vs model {want}")
        n = int(np.prod(shape))
        if pos + 8 * n > len(buf):
            raise CheckpointError("checkpoint payload is truncated")
        state[name] = np.frombuffer(buf, dtype="<f8", count=n, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * n
    if pos != len(buf):
        raise CheckpointError("unexpected trailing bytes in checkpoint")
    model.load_state(state)
    return model
