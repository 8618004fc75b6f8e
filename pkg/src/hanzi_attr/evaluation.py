"""Evaluation protocols: frequency splits, k-shot transfer, accuracy metrics,
word-spotting mAP, and the attribute-subset ablation report."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codec import Lexicon, decode_vector, project_subset
from .configio import coerce, read_kv
from .errors import ValidationError
from .matcher import PredictionSet, argmax_onehot, recognize
from .schema import AttributeSchema

# Report rows: subset shorthand -> groups it projects onto.
CANONICAL_SUBSETS = (
    ("pinyin+struct+stroke", ("pinyin", "structure", "stroke")),
    ("cj", ("cangjie",)),
    ("zm", ("zhengma",)),
    ("wb", ("wubi",)),
    ("fc", ("fourcorner",)),
    ("cj+zm+wb", ("cangjie", "zhengma", "wubi")),
    ("cj+zm+wb+fc", ("cangjie", "zhengma", "wubi", "fourcorner")),
    ("all", None),
)

GROUP_ALIASES = {
    "cj": "cangjie", "zm": "zhengma", "wb": "wubi", "fc": "fourcorner",
    "py": "pinyin", "struct": "structure",
}


class EvalError(ValidationError):
    pass


def resolve_groups(tokens, schema: AttributeSchema) -> tuple[str, ...]:
    """Map shorthand/full group names onto schema groups."""
    out = []
    for tok in tokens:
        name = GROUP_ALIASES.get(tok, tok)
        if name not in schema.groups():
            raise EvalError(f"unknown attribute group {tok!r}")
        if name not in out:
            out.append(name)
    if not out:
        raise EvalError("empty group selection")
    return tuple(out)


@dataclass(frozen=True)
class SplitSpec:
    frequency_threshold: int = 20
    train_fraction: float = 0.8
    k: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.frequency_threshold < 0:
            raise EvalError("frequency_threshold must be >= 0")
        if not 0 < self.train_fraction < 1:
            raise EvalError("train_fraction must be in (0, 1)")
        if self.k < 0:
            raise EvalError("k must be >= 0")

    @classmethod
    def from_file(cls, path) -> "SplitSpec":
        kv = read_kv(path)
        unknown = set(kv) - set(cls.__dataclass_fields__)
        if unknown:
            raise EvalError(f"unknown split spec keys: {', '.join(sorted(unknown))}")
        base = cls()
        return cls(
            frequency_threshold=coerce(kv, "frequency_threshold", int, base.frequency_threshold),
            train_fraction=coerce(kv, "train_fraction", float, base.train_fraction),
            k=coerce(kv, "k", int, base.k),
            seed=coerce(kv, "seed", int, base.seed),
        )


@dataclass
class SplitResult:
    hifreq_train: list
    hifreq_test: list
    lofreq: list


def _pairs(labels_by_id) -> list[tuple[str, str]]:
    if hasattr(labels_by_id, "items"):
        return list(labels_by_id.items())
    return list(labels_by_id)


def frequency_split(labels_by_id, spec: SplitSpec) -> SplitResult:
    """Partition sample ids by label frequency.

    Labels strictly above the threshold go to the high-frequency pool and are
    split per label with a seeded shuffle, floor(train_fraction * n) samples
    to train.  Everything else is the low-frequency pool.
    """
    pairs = _pairs(labels_by_id)
    if not pairs:
        raise EvalError("cannot split zero samples")
    by_label: dict[str, list[str]] = {}
    for image_id, label in pairs:
        by_label.setdefault(label, []).append(image_id)
    rng = np.random.default_rng(spec.seed)
    train, test, lofreq = [], [], []
    for label in sorted(by_label):
        ids = sorted(by_label[label])
        if len(ids) > spec.frequency_threshold:
            perm = rng.permutation(len(ids))
            n_train = math.floor(spec.train_fraction * len(ids))
            train.extend(ids[i] for i in perm[:n_train])
            test.extend(ids[i] for i in perm[n_train:])
        else:
            lofreq.extend(ids)
    return SplitResult(train, test, lofreq)


def kshot_augment(split: SplitResult, labels_by_id, k: int, seed: int = 0) -> tuple[list, list]:
    """Move up to k seeded samples of each low-frequency label into training.

    A label never loses its last sample, so every lofreq label keeps at least
    one test instance.  Returns (train_ids, lofreq_test_ids).
    """
    if k < 0:
        raise EvalError("k must be >= 0")
    labels = dict(_pairs(labels_by_id))
    by_label: dict[str, list[str]] = {}
    for image_id in split.lofreq:
        if image_id not in labels:
            raise EvalError(f"lofreq id {image_id!r} has no label")
        by_label.setdefault(labels[image_id], []).append(image_id)
    rng = np.random.default_rng(seed)
    train = list(split.hifreq_train)
    test = []
    for label in sorted(by_label):
        ids = sorted(by_label[label])
        perm = rng.permutation(len(ids))
        move = min(k, len(ids) - 1)
        train.extend(ids[i] for i in perm[:move])
        test.extend(ids[i] for i in perm[move:])
    return train, test


def _hard_index(value) -> int:
    if isinstance(value, (int, np.integer)):
        return int(value)
    return int(np.argmax(np.asarray(value)))


def attribute_accuracy(preds: list[PredictionSet], truth_targets, schema: AttributeSchema) -> dict:
    """Per-set accuracy of hardened predictions against target indices.

    ``truth_targets`` maps image_id to a per-set index array in schema order.
    """
    if not preds:
        raise EvalError("no predictions to score")
    hits = np.zeros(len(schema.sets), dtype=np.int64)
    for pred in preds:
        if pred.image_id not in truth_targets:
            raise EvalError(f"prediction {pred.image_id!r} has no ground truth")
        t = np.asarray(truth_targets[pred.image_id])
        for i, aset in enumerate(schema.sets):
            if aset.name not in pred.by_set:
                raise EvalError(f"prediction {pred.image_id!r} lacks set {aset.name!r}")
            hits[i] += _hard_index(pred.by_set[aset.name]) == int(t[i])
    return {name: float(hits[i] / len(preds)) for i, name in enumerate(schema.set_names)}


def targets_from_lexicon(lexicon: Lexicon, schema: AttributeSchema) -> dict:
    """Per-set target indices for every lexicon label (lexicon vectors are one-hot)."""
    out = {}
    for i, label in enumerate(lexicon.labels):
        dec = decode_vector(lexicon.vector(i), schema)
        if dec.not_onehot:
            raise EvalError(f"lexicon entry {label!r} is not one-hot in {', '.join(dec.not_onehot)}")
        out[label] = np.array([schema.get(n).index_of(dec.symbols[n]) for n in schema.set_names], dtype=np.intp)
    return out


def character_accuracy(preds: list[PredictionSet], lexicon: Lexicon, truth_labels,
                       schema: AttributeSchema, groups=None) -> float:
    """Rank-1 recognition accuracy, optionally under a group projection."""
    if not preds:
        raise EvalError("no predictions to score")
    target = project_subset(lexicon, groups, schema) if groups else lexicon
    known = set(target.labels)
    hits = 0
    for pred in preds:
        if pred.image_id not in truth_labels:
            raise EvalError(f"prediction {pred.image_id!r} has no ground truth")
        truth = truth_labels[pred.image_id]
        if truth not in known:
            raise EvalError(f"truth label {truth!r} not present in the lexicon")
        query = argmax_onehot(pred, schema)
        if groups:
            query = project_subset(query, groups, schema)
        hits += recognize(query, target, k=1)[0].label == truth
    return hits / len(preds)


@dataclass
class MapResult:
    map: float
    queries: int
    skipped: int
    per_query: dict


def word_spotting_map(features, labels) -> MapResult:
    """Mean average precision of leave-one-out retrieval by Euclidean distance.

    Every image queries all others; ranking ties break on ascending image id;
    ranks are 1-based.  Queries whose label has no second instance are
    skipped but counted.
    """
    ids = sorted(features)
    if not ids:
        raise EvalError("no feature vectors")
    missing = [i for i in ids if i not in labels]
    if missing:
        raise EvalError(f"ids lack labels: {', '.join(missing[:5])}")
    mat = np.stack([np.asarray(features[i], dtype=np.float64) for i in ids])
    if mat.ndim != 2:
        raise EvalError("feature vectors must share one dimension")
    per_query, skipped = {}, 0
    for qi, qid in enumerate(ids):
        relevant = {i for i in ids if i != qid and labels[i] == labels[qid]}
        if not relevant:
            skipped += 1
            continue
        dist = np.sqrt(((mat - mat[qi]) ** 2).sum(axis=1))
        order = sorted((i for i in range(len(ids)) if i != qi), key=lambda i: (dist[i], ids[i]))
        hits, ap = 0, 0.0
        for rank, i in enumerate(order, start=1):
            if ids[i] in relevant:
                hits += 1
                ap += hits / rank
        per_query[qid] = ap / len(relevant)
    if not per_query:
        raise EvalError("every query was single-instance; mAP undefined")
    return MapResult(float(np.mean(list(per_query.values()))), len(per_query), skipped, per_query)


def features_from_predictions(preds: list[PredictionSet], schema: AttributeSchema) -> dict:
    """Hardened attribute bits as float vectors, a spotting feature source."""
    return {p.image_id: argmax_onehot(p, schema).bits().astype(np.float64) for p in preds}


@dataclass
class EvalReport:
    attr_acc: dict                       # set name -> accuracy
    char_acc: list                       # (subset name, dims, accuracy)
    counts: dict                         # partition/sample counts
    map_value: float | None = None

    def to_tsv(self) -> str:
        rows = ["metric\tvalue\tdims"]
        for name, acc in self.attr_acc.items():
            rows.append(f"attr_acc.{name}\t{acc:.6f}\t")
        for name, dims, acc in self.char_acc:
            rows.append(f"char_acc.{name}\t{acc:.6f}\t{dims}")
        if self.map_value is not None:
            rows.append(f"map\t{self.map_value:.6f}\t")
        for name, value in self.counts.items():
            rows.append(f"count.{name}\t{value}\t")
        return "\n".join(rows) + "\n"


def ablation_report(preds: list[PredictionSet], lexicon: Lexicon, truth_labels,
                    schema: AttributeSchema, counts=None) -> EvalReport:
    """Attribute accuracies plus character accuracy per canonical subset."""
    truth_targets = targets_from_lexicon(lexicon, schema)
    per_image = {}
    for p in preds:
        if p.image_id not in truth_labels:
            raise EvalError(f"prediction {p.image_id!r} has no ground truth")
        per_image[p.image_id] = truth_targets[truth_labels[p.image_id]] if truth_labels[p.image_id] in truth_targets else None
        if per_image[p.image_id] is None:
            raise EvalError(f"truth label {truth_labels[p.image_id]!r} not present in the lexicon")
    attr = attribute_accuracy(preds, per_image, schema)
    group_dims = schema.group_dims()
    rows = []
    for name, groups in CANONICAL_SUBSETS:
        use = groups if groups is not None else schema.groups()
        if any(g not in group_dims for g in use):
            continue
        acc = character_accuracy(preds, lexicon, truth_labels, schema, groups=use)
        rows.append((name, sum(group_dims[g] for g in use), acc))
    return EvalReport(attr, rows, dict(counts or {}))
