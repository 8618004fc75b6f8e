"""Independent oracles and small builders shared by the test modules.

Everything here is deliberately naive: per-bit loops, exhaustive sorts,
run-list simulations.  The library must agree with these, not the other
way around.
"""

import numpy as np

from hanzi_attr.codec import AttributeVector, Lexicon
from hanzi_attr.matcher import PredictionSet


def random_onehot_bits(rng, schema):
    """A random valid (one bit per set) attribute bit array."""
    bits = np.zeros(schema.dim, dtype=np.uint8)
    for aset, off in zip(schema.sets, schema.offsets()):
        bits[off + int(rng.integers(0, aset.size))] = 1
    return bits


def random_onehot_vector(rng, schema):
    return AttributeVector.from_bits(random_onehot_bits(rng, schema), schema.schema_id)


def lexicon_from_bits(rows, schema, labels=None):
    vecs = [AttributeVector.from_bits(r, schema.schema_id) for r in rows]
    labels = labels or [format(0x4E00 + i, "x") for i in range(len(rows))]
    return Lexicon.from_vectors(labels, [v for v in vecs])


def corrupt_sets(bits, schema, count, rng):
    """Re-randomize ``count`` distinct attribute sets of a one-hot bit array."""
    out = bits.copy()
    chosen = rng.choice(len(schema.sets), size=count, replace=False)
    for i in chosen:
        aset = schema.sets[i]
        off = schema.offsets()[i]
        out[off:off + aset.size] = 0
        out[off + int(rng.integers(0, aset.size))] = 1
    return out


def hamming_loop(a_bits, b_bits):
    """Per-bit Hamming distance, plain Python."""
    assert len(a_bits) == len(b_bits)
    return sum(1 for x, y in zip(a_bits, b_bits) if int(x) != int(y))


def full_sort_oracle(query_bits, lexicon_rows):
    """All (distance, index) pairs sorted the way recognize must sort them."""
    dists = [hamming_loop(query_bits, row) for row in lexicon_rows]
    return sorted(range(len(dists)), key=lambda i: (dists[i], i)), dists


def runs_of_background(column):
    """Maximal background (0) runs of one binary column, as lengths."""
    runs, n = [], 0
    for v in column:
        if v == 0:
            n += 1
        elif n:
            runs.append(n)
            n = 0
    if n:
        runs.append(n)
    return runs


def mean_runlength_oracle(column, min_count, height):
    """The per-column statistic: mean background run length, or the page
    height when fewer than ``min_count`` runs exist."""
    runs = runs_of_background(column)
    if len(runs) < min_count:
        return float(height)
    return sum(runs) / len(runs)


def ap_oracle(query_id, ids, labels, dist_by_id):
    """Average precision by exhaustive rank enumeration (1-based ranks)."""
    others = sorted((i for i in ids if i != query_id), key=lambda i: (dist_by_id[i], i))
    relevant = {i for i in others if labels[i] == labels[query_id]}
    if not relevant:
        return None
    hits, total = 0, 0.0
    for rank, i in enumerate(others, start=1):
        if i in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def box_iou(a, b):
    """Intersection over union of two (x, y, w, h) boxes."""
    ax0, ay0, ax1, ay1 = a[0], a[1], a[0] + a[2], a[1] + a[3]
    bx0, by0, bx1, by1 = b[0], b[1], b[0] + b[2], b[1] + b[3]
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a[2] * a[3] + b[2] * b[3] - inter)


def soft_prediction_for(entry, schema, rng, sharpness=6.0):
    """A soft PredictionSet whose per-set argmax matches the entry's encoding."""
    from hanzi_attr.classifier import targets_from_entry

    targets = targets_from_entry(entry, schema)
    by_set = {}
    for aset, t in zip(schema.sets, targets):
        logits = rng.normal(0.0, 1.0, aset.size)
        logits[int(t)] += sharpness
        e = np.exp(logits - logits.max())
        by_set[aset.name] = e / e.sum()
    return PredictionSet(entry.label, by_set)


def hard_prediction_for(entry, schema, image_id=None):
    from hanzi_attr.classifier import targets_from_entry

    targets = targets_from_entry(entry, schema)
    by_set = {aset.name: int(t) for aset, t in zip(schema.sets, targets)}
    return PredictionSet(image_id or entry.label, by_set)
