"""Ruled-page character segmentation.

Pipeline: global-threshold binarization, column run-length profiling, text
line detection, skew estimation over a fixed candidate set, nearest-neighbor
deskew, 8-connected candidate boxes per line, then a six-step box refinement
(ratio screen, median height, equal split, residual merge, re-split, row
alignment).  Reading order is right-to-left by column, top-to-bottom inside
a column.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .configio import coerce, read_kv
from .errors import ValidationError


class SegmentationError(ValidationError):
    pass


@dataclass(frozen=True)
class SegConfig:
    runlength_min_count: int = 7
    line_threshold: float = 0.25
    skew_candidates: tuple = (-1.0, -0.5, 0.0, 0.5, 1.0)
    ratio_accept: float = 0.8
    height_tolerance: float = 0.2
    merge_gap_fraction: float = 0.3

    def __post_init__(self):
        if self.runlength_min_count < 1:
            raise SegmentationError("runlength_min_count must be >= 1")
        if not 0 < self.line_threshold < 1:
            raise SegmentationError("line_threshold must be in (0, 1)")
        if not self.skew_candidates:
            raise SegmentationError("skew_candidates must not be empty")
        if not 0 < self.ratio_accept < 1:
            raise SegmentationError("ratio_accept must be in (0, 1)")
        if self.height_tolerance < 0 or self.merge_gap_fraction < 0:
            raise SegmentationError("tolerances must be non-negative")

    @classmethod
    def from_file(cls, path) -> "SegConfig":
        kv = read_kv(path)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(kv) - known
        if unknown:
            raise SegmentationError(f"unknown segmentation config keys: {', '.join(sorted(unknown))}")
        base = cls()
        return cls(
            runlength_min_count=coerce(kv, "runlength_min_count", int, base.runlength_min_count),
            line_threshold=coerce(kv, "line_threshold", float, base.line_threshold),
            skew_candidates=coerce(kv, "skew_candidates", tuple, base.skew_candidates),
            ratio_accept=coerce(kv, "ratio_accept", float, base.ratio_accept),
            height_tolerance=coerce(kv, "height_tolerance", float, base.height_tolerance),
            merge_gap_fraction=coerce(kv, "merge_gap_fraction", float, base.merge_gap_fraction),
        )

    def to_text(self) -> str:
        cands = ",".join(format(a, "g") for a in self.skew_candidates)
        return (
            f"runlength_min_count={self.runlength_min_count}\n"
            f"line_threshold={self.line_threshold:g}\n"
            f"skew_candidates={cands}\n"
            f"ratio_accept={self.ratio_accept:g}\n"
            f"height_tolerance={self.height_tolerance:g}\n"
            f"merge_gap_fraction={self.merge_gap_fraction:g}\n"
        )


@dataclass(frozen=True)
class TextLine:
    """Inclusive column span of one vertical text line."""

    x_start: int
    x_end: int

    @property
    def width(self) -> int:
        return self.x_end - self.x_start + 1


@dataclass
class CharBox:
    x: int
    y: int
    w: int
    h: int
    line: int = -1

    @property
    def ratio(self) -> float:
        return min(self.w, self.h) / max(self.w, self.h)

    @property
    def y_center(self) -> float:
        return self.y + self.h / 2.0


@dataclass
class SegResult:
    boxes: list
    lines: list
    skew: float


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def otsu_threshold(gray: np.ndarray) -> int:
    """Between-class-variance maximizing cut {p <= T} / {p > T}; first max wins."""
    hist = np.bincount(gray.reshape(-1), minlength=256).astype(np.float64)
    total = hist.sum()
    if total == 0:
        raise SegmentationError("cannot threshold an empty image")
    w0 = np.cumsum(hist)[:-1]               # pixels at or below T, T = 0..254
    w1 = total - w0
    cum = np.cumsum(hist * np.arange(256))[:-1]
    mean_all = (hist * np.arange(256)).sum()
    with np.errstate(invalid="ignore", divide="ignore"):
        mu0 = np.where(w0 > 0, cum / w0, 0.0)
        mu1 = np.where(w1 > 0, (mean_all - cum) / w1, 0.0)
    sigma_b = np.where((w0 > 0) & (w1 > 0), w0 * w1 * (mu0 - mu1) ** 2, 0.0)
    return int(np.argmax(sigma_b))


def binarize(gray: np.ndarray) -> np.ndarray:
    """Grayscale page to {0,1} with 1 = ink (at or below the threshold)."""
    gray = np.asarray(gray)
    if gray.ndim != 2 or gray.size == 0:
        raise SegmentationError("binarize expects a non-empty 2-D grayscale image")
    return (gray <= otsu_threshold(gray)).astype(np.uint8)


def runlength_profile(binary: np.ndarray, min_count: int = 7) -> np.ndarray:
    """Per-column mean background run length; columns with fewer than
    ``min_count`` runs report the page height instead."""
    h, w = binary.shape
    white = binary == 0
    starts = white.copy()
    starts[1:] &= ~white[:-1]
    n_runs = starts.sum(axis=0)
    total = white.sum(axis=0, dtype=np.float64)
    return np.where(n_runs >= min_count, total / np.maximum(n_runs, 1), float(h))


def detect_lines(profile: np.ndarray, height: int, cfg: SegConfig) -> list[TextLine]:
    """Maximal text-column runs, with sub-gap merging against the median width."""
    text = profile < cfg.line_threshold * height
    if not text.any():
        return []
    padded = np.concatenate(([False], text, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    runs = [(int(edges[i]), int(edges[i + 1] - 1)) for i in range(0, len(edges), 2)]
    median_w = float(np.median([e - s + 1 for s, e in runs]))
    gap_limit = cfg.merge_gap_fraction * median_w
    merged = [runs[0]]
    for s, e in runs[1:]:
        gap = s - merged[-1][1] - 1
        if gap < gap_limit:
            merged[-1] = (merged[-1][0], e)
        else:
            merged.append((s, e))
    return [TextLine(s, e) for s, e in merged]


def rotate(image: np.ndarray, angle: float, fill=0) -> np.ndarray:
    """Nearest-neighbor rotation about the image center; exact copy at 0."""
    if angle == 0:
        return image.copy()
    h, w = image.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rad = np.deg2rad(angle)
    cos_a, sin_a = np.cos(rad), np.sin(rad)
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64) - cy,
                         np.arange(w, dtype=np.float64) - cx, indexing="ij")
    src_y = np.rint(cos_a * yy + sin_a * xx + cy).astype(np.int64)
    src_x = np.rint(-sin_a * yy + cos_a * xx + cx).astype(np.int64)
    valid = (src_y >= 0) & (src_y < h) & (src_x >= 0) & (src_x < w)
    out = np.full_like(image, fill)
    out[valid] = image[src_y[valid], src_x[valid]]
    return out


def _background_width(binary: np.ndarray, cfg: SegConfig) -> int:
    profile = runlength_profile(binary, cfg.runlength_min_count)
    return int((profile >= cfg.line_threshold * binary.shape[0]).sum())


def estimate_skew(binary: np.ndarray, cfg: SegConfig) -> float:
    """Candidate angle whose corrective rotation maximizes background width.

    Ties go to the smallest magnitude, negative before positive.
    """
    best_angle, best_width = None, -1
    for angle in sorted(cfg.skew_candidates, key=lambda a: (abs(a), a)):
        trial = rotate(binary, -angle, fill=0) if angle != 0 else binary
        width = _background_width(trial, cfg)
        if width > best_width:
            best_angle, best_width = angle, width
    return float(best_angle)


def candidate_boxes(strip: np.ndarray, x_offset: int = 0, line: int = -1) -> list[CharBox]:
    """8-connected component boxes of one text-line strip.

    Rows that are entirely ink (table lines) or entirely background are
    dropped before labeling so rules never glue characters together.
    """
    if strip.ndim != 2 or strip.size == 0:
        raise SegmentationError("candidate_boxes expects a non-empty 2-D strip")
    work = (strip != 0)
    full_rows = work.all(axis=1)
    if full_rows.any():
        work = work.copy()
        work[full_rows] = False
    labels, count = ndimage.label(work, structure=np.ones((3, 3), dtype=int))
    boxes = []
    for sl in ndimage.find_objects(labels):
        ys, xs = sl
        boxes.append(CharBox(x=xs.start + x_offset, y=ys.start,
                             w=xs.stop - xs.start, h=ys.stop - ys.start, line=line))
    boxes.sort(key=lambda b: (b.y, b.x))
    return boxes


def _try_split(box: CharBox, m_h: float, cfg: SegConfig) -> list[CharBox] | None:
    """Equal-height split when the box approximates an integer stack of m_h."""
    q = box.h / m_h
    n = _round_half_up(q)
    if n < 2 or abs(q - n) > cfg.height_tolerance:
        return None
    bounds = [box.y + _round_half_up(i * box.h / n) for i in range(n + 1)]
    parts = [replace(box, y=bounds[i], h=bounds[i + 1] - bounds[i]) for i in range(n)]
    if any(p.h < 1 for p in parts):
        return None
    if all(p.ratio > cfg.ratio_accept for p in parts):
        return parts
    return None


def _merge_chains(residual: list[CharBox], m_h: float, cfg: SegConfig) -> list[CharBox]:
    """Merge vertically adjacent residuals within each line."""
    gap_limit = cfg.merge_gap_fraction * m_h
    merged: list[CharBox] = []
    by_line: dict = {}
    for b in residual:
        by_line.setdefault(b.line, []).append(b)
    for line in sorted(by_line):
        chain = None
        for b in sorted(by_line[line], key=lambda b: (b.y, b.x)):
            if chain is not None and b.y - (chain.y + chain.h) < gap_limit:
                x0 = min(chain.x, b.x)
                x1 = max(chain.x + chain.w, b.x + b.w)
                y1 = max(chain.y + chain.h, b.y + b.h)
                chain = replace(chain, x=x0, w=x1 - x0, h=y1 - chain.y)
            else:
                if chain is not None:
                    merged.append(chain)
                chain = b
        if chain is not None:
            merged.append(chain)
    return merged


def _align_rows(accepted: list[CharBox], m_h: float) -> list[CharBox]:
    """Snap tops and bottoms to the per-row medians across all lines."""
    ordered = sorted(accepted, key=lambda b: (b.y_center, b.x))
    rows: list[list[CharBox]] = [[ordered[0]]]
    for b in ordered[1:]:
        if b.y_center - rows[-1][-1].y_center > 0.5 * m_h:
            rows.append([b])
        else:
            rows[-1].append(b)
    out = []
    for row in rows:
        top = _round_half_up(float(np.median([b.y for b in row])))
        bottom = _round_half_up(float(np.median([b.y + b.h for b in row])))
        if bottom <= top:
            bottom = top + 1
        out.extend(replace(b, y=top, h=bottom - top) for b in row)
    return out


def refine_boxes(candidates: list[CharBox], cfg: SegConfig) -> list[CharBox]:
    """Six-step refinement of raw component boxes into character boxes."""
    if not candidates:
        return []
    # Step 1: screen by aspect-ratio fitness.
    accepted = [b for b in candidates if b.ratio > cfg.ratio_accept]
    residual = [b for b in candidates if b.ratio <= cfg.ratio_accept]
    if not accepted:
        raise SegmentationError("cannot estimate m_h: no candidate box passed the ratio screen")
    # Step 2: reference height.
    m_h = float(np.median([b.h for b in accepted]))
    # Step 3: split stacked boxes into equal parts.
    still = []
    for b in residual:
        parts = _try_split(b, m_h, cfg)
        if parts is not None:
            accepted.extend(parts)
        else:
            still.append(b)
    # Steps 4 and 5: merge residual fragments, then screen and re-split.
    for b in _merge_chains(still, m_h, cfg):
        if b.ratio > cfg.ratio_accept:
            accepted.append(b)
            continue
        parts = _try_split(b, m_h, cfg)
        if parts is not None:
            accepted.extend(parts)
    # Step 6: row alignment.
    return _align_rows(accepted, m_h)


def reading_order(boxes: list[CharBox], lines: list[TextLine]) -> list[CharBox]:
    """Right-to-left by line, top-to-bottom then left-to-right within a line."""
    line_rank = {i: rank for rank, (i, _) in enumerate(
        sorted(enumerate(lines), key=lambda t: -t[1].x_start))}
    return sorted(boxes, key=lambda b: (line_rank.get(b.line, len(lines)), b.y, b.x))


def segment_page(gray: np.ndarray, cfg: SegConfig | None = None) -> SegResult:
    """Full pipeline from a grayscale page to reading-ordered character boxes."""
    cfg = cfg or SegConfig()
    binary = binarize(gray)
    skew = estimate_skew(binary, cfg)
    if skew != 0:
        binary = rotate(binary, -skew, fill=0)
    profile = runlength_profile(binary, cfg.runlength_min_count)
    lines = detect_lines(profile, binary.shape[0], cfg)
    candidates: list[CharBox] = []
    for i, ln in enumerate(lines):
        strip = binary[:, ln.x_start:ln.x_end + 1]
        candidates.extend(candidate_boxes(strip, x_offset=ln.x_start, line=i))
    if not candidates:
        return SegResult([], lines, skew)
    boxes = refine_boxes(candidates, cfg)
    return SegResult(reading_order(boxes, lines), lines, skew)


def crop_box(image: np.ndarray, box: CharBox) -> np.ndarray:
    return image[box.y:box.y + box.h, box.x:box.x + box.w]


def boxes_to_tsv(page_id: str, boxes: list[CharBox]) -> str:
    rows = [f"{page_id}\t{i}\t{b.x}\t{b.y}\t{b.w}\t{b.h}" for i, b in enumerate(boxes)]
    return "\n".join(rows) + ("\n" if rows else "")


def lines_to_tsv(page_id: str, lines: list[TextLine]) -> str:
    rows = [f"{page_id}\t{ln.x_start}\t{ln.x_end}" for ln in lines]
    return "\n".join(rows) + ("\n" if rows else "")
