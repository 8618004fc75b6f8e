"""Training, prediction emission, and checkpoints.

The loss is the sum of the per-set softmax cross entropies, optimized by
seeded mini-batch SGD with the learning rate halved on a fixed iteration
interval.  Predictions are emitted sequentially in image-list order so a
rerun with the same seed produces the same file.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .formats import Manifest, Sample, write_predictions
from .model import DESIGN_NOTES, AttributeNet, init_xavier


class TrainerError(ValueError):
    pass


@dataclass
class DeepConfig:
    blocks_per_stage: tuple = (1, 1, 1, 1)
    base_maps: int = 16
    initial_lr: float = 1e-4
    lr_halving_interval: int = 10_000
    batch_size: int = 200
    iterations: int = 2_000
    seed: int = 0

    def validate(self) -> None:
        counts = {
            "base_maps": self.base_maps,
            "lr_halving_interval": self.lr_halving_interval,
            "batch_size": self.batch_size,
            "iterations": self.iterations,
        }
        for name, value in counts.items():
            if int(value) < 1:
                raise TrainerError(f"{name} must be positive, got {value}")
        if not self.blocks_per_stage or any(int(b) < 1 for b in self.blocks_per_stage):
            raise TrainerError(f"blocks_per_stage must be positive, got {self.blocks_per_stage}")
        if not self.initial_lr > 0:
            raise TrainerError(f"initial_lr must be positive, got {self.initial_lr}")


@dataclass
class DeepResult:
    model: AttributeNet
    schema_id: str
    loss_trace: np.ndarray
    sample_count: int
    config: DeepConfig = field(repr=False, default=None)


def _check_schema(samples, manifest: Manifest) -> None:
    sizes = manifest.sizes
    for s in samples:
        if len(s.targets) != len(manifest):
            raise TrainerError(
                f"schema mismatch: sample {s.image_id!r} has {len(s.targets)} targets "
                f"for {len(manifest)} attribute sets"
            )
        for t, k in zip(s.targets, sizes):
            if not 0 <= int(t) < k:
                raise TrainerError(f"schema mismatch: sample {s.image_id!r} target {t} out of range")


def _to_tensors(samples) -> tuple[torch.Tensor, torch.Tensor]:
    images = np.stack([s.image for s in samples]).astype(np.float32) / 255.0
    targets = np.array([s.targets for s in samples], dtype=np.int64)
    return torch.from_numpy(images).unsqueeze(1), torch.from_numpy(targets)


def train_deep(samples: list[Sample], manifest: Manifest, cfg: DeepConfig) -> DeepResult:
    """Train the shared-backbone multi-head network on the summed loss."""
    cfg.validate()
    if not samples:
        raise TrainerError("no training samples")
    _check_schema(samples, manifest)

    torch.manual_seed(cfg.seed)
    model = AttributeNet(manifest.sizes, cfg.blocks_per_stage, cfg.base_maps)
    init_xavier(model)

    images, targets = _to_tensors(samples)
    n = images.shape[0]
    sampler = torch.Generator().manual_seed(cfg.seed)
    opt = torch.optim.SGD(model.parameters(), lr=cfg.initial_lr)

    trace = np.zeros(cfg.iterations)
    model.train()
    for it in range(cfg.iterations):
        lr = cfg.initial_lr * 0.5 ** (it // cfg.lr_halving_interval)
        for group in opt.param_groups:
            group["lr"] = lr
        if cfg.batch_size >= n:
            idx = torch.arange(n)   # full store, exact gradient
        else:
            idx = torch.randint(n, (cfg.batch_size,), generator=sampler)
        logits = model(images[idx])
        loss = sum(F.cross_entropy(lg, targets[idx, i]) for i, lg in enumerate(logits))
        opt.zero_grad()
        loss.backward()
        opt.step()
        trace[it] = loss.item()

    model.eval()
    return DeepResult(model, manifest.schema_id, trace, n, cfg)


def predict_probs(model: AttributeNet, images: np.ndarray, batch_size: int = 256) -> list[list[np.ndarray]]:
    """Per-image, per-set softmax probabilities. images: (N, H, W) uint8."""
    model.eval()
    x = torch.from_numpy(np.asarray(images, dtype=np.float32) / 255.0).unsqueeze(1)
    out: list[list[np.ndarray]] = []
    with torch.no_grad():
        for start in range(0, x.shape[0], batch_size):
            logits = model(x[start:start + batch_size])
            probs = [F.softmax(lg, dim=1).numpy() for lg in logits]
            for row in range(probs[0].shape[0]):
                out.append([p[row].astype(np.float64) for p in probs])
    return out


def emit_predictions(model: AttributeNet, ids, images, manifest: Manifest, path,
                     hard: bool = False, header: str | None = None) -> None:
    """Write interchange predictions for ``ids``/``images`` in the given order."""
    if len(ids) != len(images):
        raise TrainerError(f"{len(ids)} ids for {len(images)} images")
    probs = predict_probs(model, np.stack(images)) if len(ids) else []
    rows = []
    for image_id, per_set in zip(ids, probs):
        values = [int(np.argmax(p)) for p in per_set] if hard else per_set
        rows.append((image_id, values))
    write_predictions(rows, path, manifest, header=header)


def save_checkpoint(path, result: DeepResult, manifest: Manifest, extra: dict | None = None) -> None:
    cfg = result.config
    meta = {
        "design_notes": list(DESIGN_NOTES),
        "final_loss": float(result.loss_trace[-1]) if result.loss_trace.size else None,
        "iterations": int(cfg.iterations),
        "sample_count": int(result.sample_count),
    }
    if extra:
        meta.update(extra)
    torch.save({
        "state_dict": result.model.state_dict(),
        "config": asdict(cfg),
        "schema_id": manifest.schema_id,
        "set_names": list(manifest.names),
        "head_sizes": list(manifest.sizes),
        "metadata": meta,
    }, path)


def load_checkpoint(path, manifest: Manifest) -> AttributeNet:
    """Rebuild the trained network; the manifest must match the training one."""
    blob = torch.load(path, map_location="cpu", weights_only=True)
    if blob.get("schema_id") != manifest.schema_id:
        raise TrainerError(
            f"schema mismatch: checkpoint was trained under schema {blob.get('schema_id')!r}, "
            f"manifest is {manifest.schema_id!r}"
        )
    cfg = blob["config"]
    model = AttributeNet(blob["head_sizes"], tuple(cfg["blocks_per_stage"]), cfg["base_maps"])
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model
