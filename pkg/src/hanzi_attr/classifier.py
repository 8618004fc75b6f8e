"""Native attribute classifier: directional features and 23 linear softmax heads.

Features are 8-bin gradient-orientation magnitude maps pooled by summation on
an 8x8 grid of a 64x64 glyph (512 values, all non-negative).  Every attribute
set gets its own linear softmax head over those shared features; the training
loss is the sum of the per-set cross-entropies (natural log).  Optimization
is plain seeded mini-batch SGD with a halving learning-rate schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .configio import coerce, read_kv
from .errors import ValidationError
from .matcher import PredictionSet
from .schema import AttributeSchema

FEATURE_WIDTH = 512
GLYPH_SIZE = 64
_POOL = 8          # pooling grid is _POOL x _POOL cells
_ORIENTS = 8
JITTER_PX = 2      # translation augmentation range when enabled

_MODEL_MAGIC = "hanzi-attr-model 1"


class ClassifierError(ValidationError):
    pass


def _check_glyph(image: np.ndarray) -> None:
    if image.ndim != 2 or image.shape != (GLYPH_SIZE, GLYPH_SIZE):
        raise ClassifierError(f"classifier input must be {GLYPH_SIZE}x{GLYPH_SIZE}, got {image.shape}")


def extract_features(image: np.ndarray) -> np.ndarray:
    """512 directional features of one 64x64 grayscale glyph."""
    _check_glyph(np.asarray(image))
    return extract_features_batch(np.asarray(image)[None])[0]


def extract_features_batch(images: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Feature matrix (n, 512) for a stack of 64x64 glyphs."""
    images = np.asarray(images)
    if images.ndim != 3 or images.shape[1:] != (GLYPH_SIZE, GLYPH_SIZE):
        raise ClassifierError(f"expected (n, {GLYPH_SIZE}, {GLYPH_SIZE}) image stack, got {images.shape}")
    out = np.empty((images.shape[0], FEATURE_WIDTH), dtype=np.float64)
    cell = GLYPH_SIZE // _POOL
    for lo in range(0, images.shape[0], chunk):
        imgs = images[lo:lo + chunk].astype(np.float64) / 255.0
        gy = np.gradient(imgs, axis=1)
        gx = np.gradient(imgs, axis=2)
        mag = np.hypot(gx, gy)
        # Bins centered on k*45deg so axis-aligned and diagonal gradients sit
        # mid-bin, never on a boundary.
        bins = np.floor(((np.arctan2(gy, gx) + np.pi / _ORIENTS) % (2 * np.pi)) / (2 * np.pi / _ORIENTS)).astype(np.intp) % _ORIENTS
        pooled = np.zeros((imgs.shape[0], _ORIENTS, _POOL, _POOL))
        for b in range(_ORIENTS):
            m = np.where(bins == b, mag, 0.0)
            pooled[:, b] = m.reshape(-1, _POOL, cell, _POOL, cell).sum(axis=(2, 4))
        out[lo:lo + chunk] = pooled.reshape(-1, FEATURE_WIDTH)
    return out


@dataclass
class TrainConfig:
    initial_lr: float = 1e-4
    lr_halving_interval: int = 10_000
    batch_size: int = 200
    iterations: int = 10_000
    seed: int = 0
    translation_jitter: bool = False
    augment_corpus: str | None = None

    def __post_init__(self):
        if self.initial_lr <= 0:
            raise ClassifierError("initial_lr must be positive")
        if self.lr_halving_interval < 1 or self.batch_size < 1 or self.iterations < 1:
            raise ClassifierError("lr_halving_interval, batch_size and iterations must be >= 1")

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        kv = read_kv(path)
        unknown = set(kv) - set(cls.__dataclass_fields__)
        if unknown:
            raise ClassifierError(f"unknown training config keys: {', '.join(sorted(unknown))}")
        base = cls()
        return cls(
            initial_lr=coerce(kv, "initial_lr", float, base.initial_lr),
            lr_halving_interval=coerce(kv, "lr_halving_interval", int, base.lr_halving_interval),
            batch_size=coerce(kv, "batch_size", int, base.batch_size),
            iterations=coerce(kv, "iterations", int, base.iterations),
            seed=coerce(kv, "seed", int, base.seed),
            translation_jitter=coerce(kv, "translation_jitter", bool, base.translation_jitter),
            augment_corpus=kv.get("augment_corpus") or base.augment_corpus,
        )


@dataclass
class Sample:
    """One training example: glyph image, character label, per-set targets."""

    image: np.ndarray
    label: str
    targets: np.ndarray  # (len(schema),) int target index per attribute set


def targets_from_entry(entry, schema: AttributeSchema) -> np.ndarray:
    from .codec import entry_symbols

    symbols = entry_symbols(entry, schema)
    return np.array([aset.index_of(sym) for aset, sym in zip(schema.sets, symbols)], dtype=np.intp)


class MultiHeadModel:
    """Shared features, one linear softmax head per attribute set."""

    def __init__(self, schema_id: str, feature_width: int, head_names, head_widths, weights, biases):
        self.schema_id = schema_id
        self.feature_width = int(feature_width)
        self.head_names = tuple(head_names)
        self.head_widths = tuple(int(w) for w in head_widths)
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)   # (F, sum widths)
        self.biases = np.ascontiguousarray(biases, dtype=np.float64)     # (sum widths,)
        total = sum(self.head_widths)
        if self.weights.shape != (self.feature_width, total) or self.biases.shape != (total,):
            raise ClassifierError("model parameter shapes do not match the declared heads")
        self.offsets = np.concatenate(([0], np.cumsum(self.head_widths))).astype(np.intp)

    def head_slice(self, i: int) -> slice:
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))


def init_model(schema: AttributeSchema, seed: int = 0, feature_width: int = FEATURE_WIDTH) -> MultiHeadModel:
    """Fresh model with fan-in/fan-out-balanced uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    widths = [s.size for s in schema.sets]
    blocks = []
    for k in widths:
        bound = math.sqrt(6.0 / (feature_width + k))
        blocks.append(rng.uniform(-bound, bound, size=(feature_width, k)))
    return MultiHeadModel(schema.schema_id, feature_width, schema.set_names, widths,
                          np.concatenate(blocks, axis=1), np.zeros(sum(widths)))


def _softmax_blocks(logits: np.ndarray, model: MultiHeadModel) -> np.ndarray:
    probs = np.empty_like(logits)
    for i in range(len(model.head_widths)):
        sl = model.head_slice(i)
        z = logits[:, sl]
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        probs[:, sl] = e / e.sum(axis=1, keepdims=True)
    return probs


def probabilities(model: MultiHeadModel, features: np.ndarray) -> np.ndarray:
    """Concatenated per-head probabilities for a feature matrix (n, F)."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.feature_width:
        raise ClassifierError(f"features must be (n, {model.feature_width}), got {features.shape}")
    return _softmax_blocks(features @ model.weights + model.biases, model)


def forward(model: MultiHeadModel, features: np.ndarray, image_id: str = "") -> PredictionSet:
    """Per-set probability vectors for one feature vector."""
    probs = probabilities(model, np.asarray(features, dtype=np.float64)[None])[0]
    by_set = {name: probs[model.head_slice(i)].copy() for i, name in enumerate(model.head_names)}
    return PredictionSet(image_id, by_set)


def total_loss(pred: PredictionSet, targets) -> float:
    """Summed per-set cross-entropy (natural log) of one soft prediction."""
    loss = 0.0
    for name, value in pred.by_set.items():
        probs = np.asarray(value, dtype=np.float64)
        if probs.ndim != 1:
            raise ClassifierError(f"total_loss needs probability vectors; set {name!r} is hardened")
        t = int(targets[name])
        if not 0 <= t < probs.size:
            raise ClassifierError(f"target {t} out of range for set {name!r}")
        with np.errstate(divide="ignore"):
            loss -= float(np.log(probs[t]))
    return loss


def _loss_and_grad(model: MultiHeadModel, features: np.ndarray, targets: np.ndarray):
    """Mean-over-batch Eq-style loss and analytic parameter gradients."""
    n = features.shape[0]
    probs = probabilities(model, features)
    flat = targets + model.offsets[:-1][None, :]
    picked = probs[np.arange(n)[:, None], flat]
    with np.errstate(divide="ignore"):
        loss = float(-np.log(picked).sum() / n)
    dlogits = probs.copy()
    np.subtract.at(dlogits, (np.arange(n)[:, None], flat), 1.0)
    dlogits /= n
    return loss, features.T @ dlogits, dlogits.sum(axis=0)


def _shift_image(image: np.ndarray, dy: int, dx: int, fill: int = 255) -> np.ndarray:
    out = np.full_like(image, fill)
    h, w = image.shape
    ys, yd = (dy, 0) if dy >= 0 else (0, -dy)
    xs, xd = (dx, 0) if dx >= 0 else (0, -dx)
    out[ys:h - yd, xs:w - xd] = image[yd:h - ys, xd:w - xs]
    return out


@dataclass
class TrainResult:
    model: MultiHeadModel
    loss_trace: np.ndarray
    coverage: dict          # set name -> (symbols seen in training, alphabet size)
    sample_count: int

    @property
    def untrained_symbols(self) -> int:
        return sum(size - seen for seen, size in self.coverage.values())


def load_sample_store(images_dir, labels_path, schema: AttributeSchema, dictionary) -> list[Sample]:
    """Read a sample store: PGM glyphs plus an image_id<TAB>codepoint labels file.

    ``dictionary`` maps labels (hex codepoints) to entries providing targets.
    """
    from pathlib import Path

    from .pgm import read_pgm, resize_nearest

    samples = []
    with open(labels_path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ClassifierError(f"labels line {lineno}: expected image_id<TAB>codepoint")
            image_id, label = fields[0], fields[1].lower()
            if label not in dictionary:
                raise ClassifierError(f"labels line {lineno}: label {label!r} has no dictionary entry")
            img = read_pgm(Path(images_dir) / f"{image_id}.pgm")
            if img.shape != (GLYPH_SIZE, GLYPH_SIZE):
                img = resize_nearest(img, GLYPH_SIZE, GLYPH_SIZE)
            samples.append(Sample(img, label, targets_from_entry(dictionary[label], schema)))
    return samples


def train(samples: list[Sample], cfg: TrainConfig, schema: AttributeSchema, dictionary=None) -> TrainResult:
    """Seeded mini-batch SGD over the summed per-set cross-entropy."""
    if cfg.augment_corpus:
        if dictionary is None:
            raise ClassifierError("augment_corpus requires a dictionary to derive targets")
        from pathlib import Path

        extra_dir = Path(cfg.augment_corpus)
        samples = list(samples) + load_sample_store(extra_dir, extra_dir / "labels.tsv", schema, dictionary)
    if not samples:
        raise ClassifierError("cannot train on zero samples")
    for s in samples:
        _check_glyph(s.image)

    images = np.stack([s.image for s in samples])
    targets = np.stack([s.targets for s in samples])
    rng = np.random.default_rng(cfg.seed)
    model = init_model(schema, seed=cfg.seed)
    feats_all = None if cfg.translation_jitter else extract_features_batch(images)

    trace = np.empty(cfg.iterations)
    for it in range(cfg.iterations):
        lr = cfg.initial_lr * 0.5 ** (it // cfg.lr_halving_interval)
        idx = rng.integers(0, len(samples), size=cfg.batch_size)
        if cfg.translation_jitter:
            shifts = rng.integers(-JITTER_PX, JITTER_PX + 1, size=(cfg.batch_size, 2))
            batch = np.stack([_shift_image(images[i], int(dy), int(dx))
                              for i, (dy, dx) in zip(idx, shifts)])
            feats = extract_features_batch(batch)
        else:
            feats = feats_all[idx]
        loss, grad_w, grad_b = _loss_and_grad(model, feats, targets[idx])
        model.weights -= lr * grad_w
        model.biases -= lr * grad_b
        trace[it] = loss

    coverage = {name: (int(np.unique(targets[:, i]).size), schema.sets[i].size)
                for i, name in enumerate(schema.set_names)}
    return TrainResult(model, trace, coverage, len(samples))


def predict(model: MultiHeadModel, images, image_ids=None) -> list[PredictionSet]:
    """Soft predictions, one PredictionSet per image, input order preserved."""
    images = np.asarray(images)
    if images.ndim == 2:
        images = images[None]
    ids = list(image_ids) if image_ids is not None else [str(i) for i in range(images.shape[0])]
    if len(ids) != images.shape[0]:
        raise ClassifierError("image_ids length does not match image count")
    probs = probabilities(model, extract_features_batch(images))
    out = []
    for row, image_id in zip(probs, ids):
        by_set = {name: row[model.head_slice(i)].copy() for i, name in enumerate(model.head_names)}
        out.append(PredictionSet(image_id, by_set))
    return out


def save_model(model: MultiHeadModel, path) -> None:
    """Two text header lines, then per-head W and b as little-endian float64."""
    parts = []
    for i in range(len(model.head_widths)):
        sl = model.head_slice(i)
        parts.append(model.weights[:, sl].reshape(-1))
        parts.append(model.biases[sl])
    payload = np.concatenate(parts).astype("<f8")
    header = (
        f"{_MODEL_MAGIC}\n"
        f"{model.schema_id}\t{model.feature_width}\t"
        f"{','.join(model.head_names)}\t{','.join(str(w) for w in model.head_widths)}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(payload.tobytes())


def load_model(path) -> MultiHeadModel:
    with open(path, "rb") as fh:
        data = fh.read()
    first = data.find(b"\n")
    second = data.find(b"\n", first + 1)
    if first < 0 or second < 0 or data[:first].decode("utf-8", "replace") != _MODEL_MAGIC:
        raise ClassifierError("not a recognizable model file")
    fields = data[first + 1:second].decode("utf-8").split("\t")
    if len(fields) != 4:
        raise ClassifierError("malformed model header")
    schema_id, width_s, names_s, widths_s = fields
    feature_width = int(width_s)
    names = names_s.split(",")
    widths = [int(w) for w in widths_s.split(",")]
    params = np.frombuffer(data[second + 1:], dtype="<f8")
    expected = sum(feature_width * k + k for k in widths)
    if params.size != expected:
        raise ClassifierError(f"model payload holds {params.size} values, expected {expected}")
    weights = np.empty((feature_width, sum(widths)))
    biases = np.empty(sum(widths))
    pos = off = 0
    for k in widths:
        weights[:, off:off + k] = params[pos:pos + feature_width * k].reshape(feature_width, k)
        pos += feature_width * k
        biases[off:off + k] = params[pos:pos + k]
        pos += k
        off += k
    return MultiHeadModel(schema_id, feature_width, names, widths, weights, biases)
