"""Synthetic corpora: dictionaries, attribute-coded glyphs, and ruled pages.

Everything here is seeded and deterministic.  Rendered glyphs carry their
attribute values visually: each attribute set owns two 8x8-pixel cells of the
64x64 canvas (aligned to the classifier's pooling grid), filled with a
speckle pattern keyed by (set, symbol).  Shared symbols therefore look alike
across characters, which is what makes recognition transfer to unseen
attribute combinations.  Page glyphs are a separate, always-connected design
(border ring plus full-span bars) so each stamped glyph is exactly one
component for the segmentation oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .classifier import GLYPH_SIZE, Sample, targets_from_entry
from .codec import CharacterEntry
from .errors import ValidationError
from .pgm import write_pgm
from .schema import FILLER, AttributeSchema, default_schema
from .segmentation import CharBox, TextLine, rotate

_PATTERN_SEED = 0x5EED


def synthetic_dictionary(n: int, seed: int = 0, schema: AttributeSchema | None = None,
                         start_codepoint: int = 0x4E00) -> list[CharacterEntry]:
    """n entries with consecutive CJK codepoints and seeded valid attributes."""
    schema = schema or default_schema()
    rng = np.random.default_rng(seed)

    def pick(set_name: str) -> str:
        symbols = [s for s in schema.get(set_name).symbols if s != FILLER]
        return symbols[int(rng.integers(0, len(symbols)))]

    def code(group: str) -> str:
        sets = schema.sets_in_group(group)
        shortest = next((i for i, s in enumerate(sets) if FILLER in s), len(sets) - 1)
        length = int(rng.integers(shortest + 1, len(sets) + 1)) if shortest + 1 <= len(sets) else len(sets)
        return "".join(pick(sets[i].name) for i in range(length))

    entries = []
    for i in range(n):
        cp = start_codepoint + i
        stroke_set = schema.sets_in_group("stroke")[0]
        max_stroke = max(int(s) for s in stroke_set.symbols if s.isdigit())
        entries.append(CharacterEntry(
            label=format(cp, "x"),
            glyph=chr(cp),
            pinyin_initial=pick("pinyin_initial"),
            pinyin_final=pick("pinyin_final"),
            tone=int(rng.integers(0, schema.get("pinyin_tone").size)),
            structure=pick("structure"),
            stroke_count=int(rng.integers(1, max_stroke + 1)),
            cangjie=code("cangjie"),
            zhengma=code("zhengma"),
            wubi=code("wubi"),
            fourcorner=code("fourcorner"),
        ))
    return entries


def entries_to_tsv(entries, header: str | None = None) -> str:
    lines = []
    if header:
        lines.extend(f"# {part}" for part in header.splitlines())
    lines.extend(e.to_row() for e in entries)
    return "\n".join(lines) + "\n"


def write_dictionary(entries, path, header: str | None = None) -> None:
    Path(path).write_text(entries_to_tsv(entries, header), encoding="utf-8")


def _cell_region(set_index: int) -> tuple[slice, slice]:
    """The two pooling-grid cells owned by one attribute set (an 8x16 patch)."""
    cell = 2 * set_index
    row, col = cell // 8, cell % 8
    return slice(row * 8, row * 8 + 8), slice(col * 8, col * 8 + 16)


def render_glyph(entry: CharacterEntry, schema: AttributeSchema | None = None,
                 rng: np.random.Generator | None = None,
                 jitter: int = 0, noise: float = 0.0, ink: int = 30) -> np.ndarray:
    """64x64 grayscale glyph whose patches encode the entry's attributes."""
    schema = schema or default_schema()
    if 2 * len(schema.sets) > 64:
        raise ValidationError("glyph canvas supports at most 32 attribute sets")
    from .codec import entry_symbols

    canvas = np.full((GLYPH_SIZE, GLYPH_SIZE), 255, dtype=np.uint8)
    for i, (aset, symbol) in enumerate(zip(schema.sets, entry_symbols(entry, schema))):
        pattern_rng = np.random.default_rng([_PATTERN_SEED, i, aset.index_of(symbol)])
        mask = pattern_rng.random((8, 16)) < 0.45
        rows, cols = _cell_region(i)
        patch = canvas[rows, cols]
        patch[mask] = ink
    if rng is not None:
        if jitter > 0:
            dy, dx = rng.integers(-jitter, jitter + 1, size=2)
            from .classifier import _shift_image

            canvas = _shift_image(canvas, int(dy), int(dx), fill=255)
        if noise > 0:
            blurred = canvas.astype(np.float64) + rng.normal(0.0, noise, canvas.shape)
            canvas = np.clip(np.rint(blurred), 0, 255).astype(np.uint8)
    return canvas


@dataclass
class CorpusImage:
    image_id: str
    label: str
    image: np.ndarray
    targets: np.ndarray


def render_corpus(entries, per_class: int, seed: int = 0, schema: AttributeSchema | None = None,
                  jitter: int = 2, noise: float = 8.0) -> list[CorpusImage]:
    """per_class jittered renderings of every entry, ids <label>_<index>."""
    schema = schema or default_schema()
    rng = np.random.default_rng(seed)
    out = []
    for entry in entries:
        targets = targets_from_entry(entry, schema)
        for j in range(per_class):
            img = render_glyph(entry, schema, rng=rng, jitter=jitter, noise=noise)
            out.append(CorpusImage(f"{entry.label}_{j:03d}", entry.label, img, targets))
    return out


def corpus_to_samples(corpus) -> list[Sample]:
    return [Sample(c.image, c.label, c.targets) for c in corpus]


def write_sample_store(corpus, out_dir) -> Path:
    """Write a corpus as a sample store (PGMs plus labels.tsv); returns the labels path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = out / "labels.tsv"
    with open(labels, "w", encoding="utf-8") as fh:
        for item in corpus:
            write_pgm(out / f"{item.image_id}.pgm", item.image)
            fh.write(f"{item.image_id}\t{item.label}\n")
    return labels


def render_page_glyph(rng: np.random.Generator, size: int) -> np.ndarray:
    """Connected pseudo-glyph mask covering a full size x size box.

    Two full-height stems joined by notched crossbars.  Every ink row keeps
    at least one background pixel inside the bounding box, so a column strip
    that hugs the glyph never sees an all-ink row, and the offset notches of
    the stacked bridge bars leave a diagonal ink path that keeps the mask a
    single 8-connected component.
    """
    t = max(2, size // 24)
    x0, x1 = t - 1, size - t + 1

    def draw(decorations: int) -> np.ndarray:
        mask = np.zeros((size, size), dtype=bool)
        mask[:, :t] = mask[:, size - t:] = True
        # notch the outer stem columns (two offset cuts per stem) so they
        # never read as near-empty run-length profiles, while leaving the
        # innermost column untouched: a text strip eroded at its edge then
        # cannot sever the stem remnant at a cut
        mid = size // 2
        for cols_a, cols_b in (((0, 3), (1, 4)),
                               ((size - 3, size), (size - 4, size - 1))):
            a = int(rng.integers(t, mid - 4))
            b = int(rng.integers(mid, size - t - 3))
            mask[a:a + 3, cols_a[0]:cols_a[1]] = False
            mask[b:b + 3, cols_b[0]:cols_b[1]] = False
        thick = int(rng.integers(2, 5))
        y = int(rng.integers(t, size - t - 2 * thick))
        notch = int(rng.integers(x0 + 2, x1 - 9))
        for row, cut in ((y, notch), (y + thick, notch + 4)):
            mask[row:row + thick, x0:x1] = True
            mask[row:row + thick, cut:cut + 3] = False
        for _ in range(decorations):
            thick = int(rng.integers(2, 5))
            pos = int(rng.integers(0, size - thick + 1))
            cut = int(rng.integers(x0 + 2, x1 - 5))
            mask[pos:pos + thick, x0:x1] = True
            mask[pos:pos + thick, cut:cut + 3] = False
        return mask

    for _ in range(100):
        mask = draw(int(rng.integers(1, 4)))
        rows = mask.any(axis=1)
        if not mask[rows].all(axis=1).any() and ndimage.label(mask)[1] == 1:
            return mask
    raise RuntimeError("page glyph synthesis failed to converge")


@dataclass
class PageSpec:
    width: int = 1400
    height: int = 2000
    cols: int = 5
    rows: int = 8
    glyph_size: int = 120
    margin: int = 100
    table_line_width: int = 3
    frame: bool = True
    skew: float = 0.0
    jitter: int = 2
    paper: int = 245
    seed: int = 0


@dataclass
class PageTruth:
    """A generated page plus its ground truth, in unskewed coordinates."""

    page: np.ndarray
    boxes: list          # CharBox, reading order (right-to-left, top-down)
    lines: list          # TextLine, left-to-right
    skew: float


def make_page(spec: PageSpec) -> PageTruth:
    rng = np.random.default_rng(spec.seed)
    h, w = spec.height, spec.width
    page = (spec.paper - rng.integers(0, 6, size=(h, w))).astype(np.uint8)
    x0, x1 = spec.margin, w - spec.margin
    y0, y1 = spec.margin, h - spec.margin
    lw = spec.table_line_width
    line_ink = 25
    for j in range(spec.cols + 1):
        xs = round(x0 + j * (x1 - x0) / spec.cols)
        page[y0:y1 + 1, xs:xs + lw] = line_ink
    if spec.frame:
        # stitched frame rows with one gap per column, centered, so frame
        # pieces inside a column strip stay wide and flat (never square)
        # and never read as solid ink across the strip
        for ys in (y0, y1):
            page[ys:ys + lw, x0:x1 + 1] = line_ink
            for j in range(spec.cols):
                gx = round(x0 + (j + 0.5) * (x1 - x0) / spec.cols)
                page[ys:ys + lw, gx - 1:gx + 2] = spec.paper

    gs = spec.glyph_size
    pitch_x = (x1 - x0) / spec.cols
    pitch_y = (y1 - y0) / spec.rows
    placed: dict[int, list[CharBox]] = {c: [] for c in range(spec.cols)}
    for col in range(spec.cols):
        for row in range(spec.rows):
            gx = round(x0 + col * pitch_x + (pitch_x - gs) / 2)
            gy = round(y0 + row * pitch_y + (pitch_y - gs) / 2)
            if spec.jitter:
                gx += int(rng.integers(-spec.jitter, spec.jitter + 1))
                gy += int(rng.integers(-spec.jitter, spec.jitter + 1))
            mask = render_page_glyph(rng, gs)
            ink = int(rng.integers(15, 40))
            region = page[gy:gy + gs, gx:gx + gs]
            region[mask] = np.minimum(region[mask], ink)
            placed[col].append(CharBox(x=gx, y=gy, w=gs, h=gs, line=col))
    boxes = [b for col in range(spec.cols - 1, -1, -1) for b in placed[col]]
    lines = []
    for col in range(spec.cols):
        xs = [b.x for b in placed[col]]
        xe = [b.x + b.w - 1 for b in placed[col]]
        lines.append(TextLine(min(xs), max(xe)))
    if spec.skew:
        page = rotate(page, spec.skew, fill=spec.paper)
    return PageTruth(page, boxes, lines, spec.skew)
