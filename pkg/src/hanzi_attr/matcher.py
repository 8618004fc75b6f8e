"""Nearest-neighbor character recognition in Hamming space.

Soft per-set predictions are hardened to a one-hot vector by per-set argmax,
then matched against a lexicon by Hamming distance over the packed bits.
Ties, both inside an argmax and between equidistant lexicon entries, resolve
to the lowest index, which keeps results reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import AttributeVector, Lexicon
from .errors import ValidationError
from .schema import AttributeSchema

# Bits set per byte value; XOR + lookup gives Hamming distance on packed rows.
_POPCOUNT = np.unpackbits(np.arange(256, dtype=np.uint8)[:, None], axis=1).sum(axis=1).astype(np.uint16)


class MatchError(ValidationError):
    pass


@dataclass
class PredictionSet:
    """Per-image classifier output: one entry per attribute set.

    Values are either an int (already-hardened argmax index) or a 1-D float
    array of per-symbol probabilities.
    """

    image_id: str
    by_set: dict

    def is_hard(self) -> bool:
        return all(isinstance(v, (int, np.integer)) for v in self.by_set.values())


@dataclass(frozen=True)
class Candidate:
    """One ranked lexicon hit."""

    label: str
    distance: int
    index: int


def argmax_onehot(pred: PredictionSet, schema: AttributeSchema) -> AttributeVector:
    """Harden a prediction to a one-hot vector (ties go to the lowest index)."""
    bits = np.zeros(schema.dim, dtype=np.uint8)
    for aset, off in zip(schema.sets, schema.offsets()):
        if aset.name not in pred.by_set:
            raise MatchError(f"prediction {pred.image_id!r} lacks set {aset.name!r}")
        value = pred.by_set[aset.name]
        if isinstance(value, (int, np.integer)):
            idx = int(value)
            if not 0 <= idx < aset.size:
                raise MatchError(f"index {idx} out of range for set {aset.name!r} (size {aset.size})")
        else:
            probs = np.asarray(value, dtype=np.float64)
            if probs.ndim != 1 or probs.size != aset.size:
                raise MatchError(f"set {aset.name!r} expects {aset.size} probabilities, got shape {probs.shape}")
            idx = int(np.argmax(probs))
        bits[off + idx] = 1
    return AttributeVector.from_bits(bits, schema.schema_id)


def _check_compatible(query: AttributeVector, lexicon: Lexicon) -> None:
    if query.schema_id != lexicon.schema_id:
        raise MatchError(f"schema mismatch: query {query.schema_id!r} vs lexicon {lexicon.schema_id!r}")
    if query.dim != lexicon.dim:
        raise MatchError(f"dimension mismatch: query {query.dim} vs lexicon {lexicon.dim}")


def hamming(a: AttributeVector, b: AttributeVector) -> int:
    """Number of differing bits between two vectors of the same layout."""
    if a.dim != b.dim or a.schema_id != b.schema_id:
        raise MatchError("hamming distance requires vectors with one layout")
    return int(_POPCOUNT[np.bitwise_xor(a.packed, b.packed)].sum())


def distances(query: AttributeVector, lexicon: Lexicon) -> np.ndarray:
    """Hamming distance from the query to every lexicon entry, in order."""
    _check_compatible(query, lexicon)
    return _POPCOUNT[np.bitwise_xor(lexicon.packed, query.packed)].sum(axis=1).astype(np.int64)


def recognize(query: AttributeVector, lexicon: Lexicon, k: int = 1) -> list[Candidate]:
    """Top-k lexicon entries by Hamming distance, equidistant ties by index."""
    if len(lexicon) == 0:
        raise MatchError("cannot recognize against an empty lexicon")
    if not 1 <= k <= len(lexicon):
        raise MatchError(f"k must be in 1..{len(lexicon)}, got {k}")
    dist = distances(query, lexicon)
    order = np.argsort(dist, kind="stable")[:k]
    return [Candidate(lexicon.labels[i], int(dist[i]), int(i)) for i in order]
