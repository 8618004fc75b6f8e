"""File formats shared with the attribute recognition toolkit.

This module re-reads the on-disk formats (schema manifest, PGM sample
store, attribute dictionary) and writes the prediction interchange format,
so the trainer interoperates with the core package purely through files:

    manifest     name<TAB>group<TAB>symbol,symbol,...   (# comments)
    labels.tsv   image_id<TAB>codepoint                 (# comments)
    dictionary   11 tab-separated columns per entry
    predictions  image_id<TAB>set=value;set=value;...

A prediction value is either a bare argmax index or a comma-separated
probability vector with 6 decimals.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GLYPH_SIZE = 64
FILLER = "*"

GROUPS = ("pinyin", "structure", "stroke", "cangjie", "zhengma", "wubi", "fourcorner")

DICT_COLUMNS = (
    "label", "glyph", "pinyin_initial", "pinyin_final", "tone", "structure_id",
    "stroke_count", "cangjie", "zhengma", "wubi", "fourcorner",
)


class FormatError(ValueError):
    pass


@dataclass(frozen=True)
class Manifest:
    """Ordered attribute sets: names, groups, and per-set alphabets."""

    names: tuple[str, ...]
    groups: tuple[str, ...]
    alphabets: tuple[tuple[str, ...], ...]
    schema_id: str

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.alphabets)

    def __len__(self) -> int:
        return len(self.names)

    def sets_in_group(self, group: str) -> list[int]:
        return [i for i, g in enumerate(self.groups) if g == group]

    def group_order(self) -> list[str]:
        seen = []
        for g in self.groups:
            if g not in seen:
                seen.append(g)
        return seen


def parse_manifest(text: str) -> Manifest:
    names: list[str] = []
    groups: list[str] = []
    alphabets: list[tuple[str, ...]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise FormatError(f"manifest line {lineno}: expected 3 tab-separated fields, got {len(fields)}")
        name, group, alphabet = fields
        if not name or name in names:
            raise FormatError(f"manifest line {lineno}: missing or duplicate set name {name!r}")
        if group not in GROUPS:
            raise FormatError(f"manifest line {lineno}: unknown group {group!r}")
        symbols = alphabet.split(",") if alphabet else []
        if not symbols or any(not s for s in symbols) or len(set(symbols)) != len(symbols):
            raise FormatError(f"manifest line {lineno}: bad alphabet for set {name!r}")
        names.append(name)
        groups.append(group)
        alphabets.append(tuple(symbols))
    if not names:
        raise FormatError("manifest defines no attribute sets")
    canonical = "\n".join(
        f"{n}\t{g}\t{','.join(a)}" for n, g, a in zip(names, groups, alphabets)
    ) + "\n"
    schema_id = hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]
    return Manifest(tuple(names), tuple(groups), tuple(alphabets), schema_id)


def load_manifest(path) -> Manifest:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_manifest(fh.read())


def read_pgm(path) -> np.ndarray:
    """Binary (P5) PGM with # comments honored in the header."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, i, n = [], 0, len(data)
    while len(tokens) < 4 and i < n:
        c = data[i:i + 1]
        if c == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise FormatError(f"{path}: non-numeric PGM header field") from None
    if w < 1 or h < 1 or not 0 < maxval < 256:
        raise FormatError(f"{path}: bad PGM header")
    pixels = data[i + 1: i + 1 + w * h]
    if len(pixels) != w * h:
        raise FormatError(f"{path}: PGM payload shorter than width*height")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w).copy()


def _resize_nearest(image: np.ndarray, height: int, width: int) -> np.ndarray:
    h, w = image.shape
    if (h, w) == (height, width):
        return image
    rows = np.minimum((np.arange(height) * h) // height, h - 1)
    cols = np.minimum((np.arange(width) * w) // width, w - 1)
    return image[np.ix_(rows, cols)]


def _code_targets(code: str, set_ids: list[int], manifest: Manifest, group: str) -> list[int]:
    # spread one symbol per position, filler-padding the unused tail
    if len(code) > len(set_ids):
        raise FormatError(f"{group} code {code!r} longer than {len(set_ids)} positions")
    out = []
    for pos, si in enumerate(set_ids):
        alphabet = manifest.alphabets[si]
        symbol = code[pos] if pos < len(code) else FILLER
        try:
            out.append(alphabet.index(symbol))
        except ValueError:
            raise FormatError(
                f"symbol {symbol!r} not in attribute set {manifest.names[si]!r}"
            ) from None
    return out


def targets_from_row(fields: list[str], manifest: Manifest) -> list[int]:
    """Per-set target indices for one dictionary row, in manifest order."""
    if len(fields) != len(DICT_COLUMNS):
        raise FormatError(f"expected {len(DICT_COLUMNS)} fields, got {len(fields)}")
    row = dict(zip(DICT_COLUMNS, fields))
    targets = [0] * len(manifest)
    for group in manifest.group_order():
        set_ids = manifest.sets_in_group(group)
        if group == "pinyin":
            symbols = [row["pinyin_initial"], row["pinyin_final"], row["tone"]]
        elif group == "structure":
            symbols = [row["structure_id"]]
        elif group == "stroke":
            numeric = [int(s) for s in manifest.alphabets[set_ids[0]] if s.isdigit()]
            count = int(row["stroke_count"])
            symbols = [str(min(count, max(numeric))) if numeric else str(count)]
        else:
            code = row[group]
            for si, t in zip(set_ids, _code_targets(code, set_ids, manifest, group)):
                targets[si] = t
            continue
        if len(symbols) != len(set_ids):
            raise FormatError(f"group {group!r} holds {len(set_ids)} sets, expected {len(symbols)}")
        for si, symbol in zip(set_ids, symbols):
            try:
                targets[si] = manifest.alphabets[si].index(symbol)
            except ValueError:
                raise FormatError(
                    f"symbol {symbol!r} not in attribute set {manifest.names[si]!r}"
                ) from None
    return targets


def load_dictionary_targets(path, manifest: Manifest) -> dict[str, list[int]]:
    """Map label (hex codepoint) to per-set target indices."""
    out: dict[str, list[int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            try:
                targets = targets_from_row(fields, manifest)
            except FormatError as exc:
                raise FormatError(f"dictionary line {lineno}: {exc}") from None
            label = fields[0].lower()
            if label in out:
                raise FormatError(f"dictionary line {lineno}: duplicate label {label!r}")
            out[label] = targets
    if not out:
        raise FormatError(f"{path}: dictionary holds no entries")
    return out


@dataclass
class Sample:
    image_id: str
    label: str
    image: np.ndarray       # uint8, GLYPH_SIZE x GLYPH_SIZE
    targets: list[int]


def load_samples(images_dir, labels_path, targets_by_label: dict[str, list[int]]) -> list[Sample]:
    """Read a sample store in labels-file order."""
    images_dir = Path(images_dir)
    samples = []
    with open(labels_path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise FormatError(f"labels line {lineno}: expected image_id<TAB>codepoint")
            image_id, label = fields[0], fields[1].lower()
            if label not in targets_by_label:
                raise FormatError(f"labels line {lineno}: label {label!r} has no dictionary entry")
            img = read_pgm(images_dir / f"{image_id}.pgm")
            if img.shape != (GLYPH_SIZE, GLYPH_SIZE):
                img = _resize_nearest(img, GLYPH_SIZE, GLYPH_SIZE)
            samples.append(Sample(image_id, label, img, targets_by_label[label]))
    return samples


def read_image_list(path) -> list[str]:
    ids = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if line and not line.startswith("#"):
                ids.append(line)
    return ids


def format_prediction_line(image_id: str, values, manifest: Manifest) -> str:
    """One interchange line; values are per-set ints or probability vectors."""
    if len(values) != len(manifest):
        raise FormatError(f"{image_id}: {len(values)} values for {len(manifest)} sets")
    parts = []
    for name, size, value in zip(manifest.names, manifest.sizes, values):
        if isinstance(value, (int, np.integer)):
            idx = int(value)
            if not 0 <= idx < size:
                raise FormatError(f"{name}: index {idx} out of range 0..{size - 1}")
            parts.append(f"{name}={idx}")
        else:
            probs = np.asarray(value, dtype=np.float64)
            if probs.shape != (size,):
                raise FormatError(f"{name}: expected {size} probabilities, got {probs.shape}")
            parts.append(f"{name}=" + ",".join(f"{p:.6f}" for p in probs))
    return f"{image_id}\t" + ";".join(parts)


def write_predictions(rows, path, manifest: Manifest, header: str | None = None) -> None:
    """rows: iterable of (image_id, values); written in the given order."""
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        for image_id, values in rows:
            fh.write(format_prediction_line(image_id, values, manifest) + "\n")
