"""Prediction interchange files.

One image per line:

    image_id<TAB>set=value;set=value;...

A value is either a bare integer (hardened argmax index) or a comma-separated
probability vector printed with 6 decimals.  A lone float (contains ``.``)
is a one-symbol probability vector, so the two forms never collide.  Forms
may be mixed across sets.  Every schema set must appear exactly once per
line; offending lines are rejected with a diagnostic rather than an error,
so a reader can report conformance of a whole file in one pass.
"""

from __future__ import annotations

import numpy as np

from .errors import Diagnostic
from .matcher import PredictionSet
from .schema import AttributeSchema


def format_prediction(pred: PredictionSet, schema: AttributeSchema, soft: bool | None = None) -> str:
    """Render one line. soft=None keeps each set's native form."""
    parts = []
    for aset in schema.sets:
        if aset.name not in pred.by_set:
            raise KeyError(f"prediction {pred.image_id!r} lacks set {aset.name!r}")
        value = pred.by_set[aset.name]
        hard = isinstance(value, (int, np.integer))
        if soft is True or (soft is None and not hard):
            probs = np.asarray(value, dtype=np.float64)
            if hard:
                probs = np.zeros(aset.size)
                probs[int(value)] = 1.0
            parts.append(f"{aset.name}=" + ",".join(f"{p:.6f}" for p in probs))
        else:
            idx = int(value) if hard else int(np.argmax(np.asarray(value)))
            parts.append(f"{aset.name}={idx}")
    return f"{pred.image_id}\t" + ";".join(parts)


def write_predictions(preds, path, schema: AttributeSchema, soft: bool | None = None, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        for pred in preds:
            fh.write(format_prediction(pred, schema, soft) + "\n")


def _parse_value(token: str, size: int):
    if "." in token or "," in token:
        probs = np.array([float(t) for t in token.split(",")], dtype=np.float64)
        if probs.size != size:
            raise ValueError(f"expected {size} probabilities, got {probs.size}")
        return probs
    idx = int(token)
    if not 0 <= idx < size:
        raise ValueError(f"index {idx} out of range 0..{size - 1}")
    return idx


def parse_predictions(text: str, schema: AttributeSchema) -> tuple[list[PredictionSet], list[Diagnostic]]:
    """Parse interchange text; malformed lines become diagnostics."""
    preds: list[PredictionSet] = []
    diagnostics: list[Diagnostic] = []
    names = set(schema.set_names)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        try:
            image_id, payload = line.split("\t", 1)
            if not image_id:
                raise ValueError("empty image id")
            by_set: dict = {}
            for item in payload.split(";"):
                name, _, token = item.partition("=")
                if not _:
                    raise ValueError(f"missing '=' in {item!r}")
                if name not in names:
                    raise ValueError(f"unknown set name {name!r}")
                if name in by_set:
                    raise ValueError(f"duplicate set {name!r}")
                by_set[name] = _parse_value(token, schema.get(name).size)
            missing = names - by_set.keys()
            if missing:
                raise ValueError(f"missing sets: {', '.join(sorted(missing))}")
        except ValueError as exc:
            diagnostics.append(Diagnostic(lineno, str(exc)))
            continue
        preds.append(PredictionSet(image_id, by_set))
    return preds, diagnostics


def read_predictions(path, schema: AttributeSchema) -> tuple[list[PredictionSet], list[Diagnostic]]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_predictions(fh.read(), schema)
