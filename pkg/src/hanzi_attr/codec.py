"""Encode dictionary entries as concatenated one-hot attribute blocks.

Dictionary rows are tab-separated:

    label glyph pinyin_initial pinyin_final tone structure_id stroke_count
    cangjie zhengma wubi fourcorner

where label is a lowercase hex Unicode codepoint and the four input-method
codes are plain symbol strings (one symbol per code position).  Encoding
yields one bit per alphabet symbol, exactly one bit set per attribute set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Diagnostic, ValidationError
from .schema import FILLER, AttributeSchema, SchemaError

DICT_COLUMNS = (
    "label", "glyph", "pinyin_initial", "pinyin_final", "tone", "structure_id",
    "stroke_count", "cangjie", "zhengma", "wubi", "fourcorner",
)


class CodecError(ValidationError):
    pass


@dataclass(frozen=True)
class CharacterEntry:
    """One dictionary row: a character and its typed attributes."""

    label: str
    glyph: str
    pinyin_initial: str
    pinyin_final: str
    tone: int
    structure: str
    stroke_count: int
    cangjie: str
    zhengma: str
    wubi: str
    fourcorner: str

    def to_row(self) -> str:
        return "\t".join([
            self.label, self.glyph, self.pinyin_initial, self.pinyin_final,
            str(self.tone), self.structure, str(self.stroke_count),
            self.cangjie, self.zhengma, self.wubi, self.fourcorner,
        ])


class AttributeVector:
    """A packed binary attribute vector tied to a schema layout.

    Bits are stored most-significant-first within each byte (the file and
    wire order); ``dim`` trailing pad bits of the last byte are zero.
    """

    __slots__ = ("packed", "dim", "schema_id")

    def __init__(self, packed: np.ndarray, dim: int, schema_id: str):
        self.packed = np.ascontiguousarray(packed, dtype=np.uint8)
        self.dim = dim
        self.schema_id = schema_id

    @classmethod
    def from_bits(cls, bits, schema_id: str) -> "AttributeVector":
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim != 1:
            raise CodecError("bit array must be one-dimensional")
        return cls(np.packbits(bits), bits.size, schema_id)

    def bits(self) -> np.ndarray:
        return np.unpackbits(self.packed, count=self.dim)

    def popcount(self) -> int:
        return int(self.bits().sum())

    def to_hex(self) -> str:
        return self.packed.tobytes().hex()

    @classmethod
    def from_hex(cls, text: str, dim: int, schema_id: str) -> "AttributeVector":
        raw = bytes.fromhex(text)
        if len(raw) != (dim + 7) // 8:
            raise CodecError(f"hex payload holds {len(raw)} bytes, expected {(dim + 7) // 8} for dim {dim}")
        return cls(np.frombuffer(raw, dtype=np.uint8), dim, schema_id)

    def __eq__(self, other):
        return (
            isinstance(other, AttributeVector)
            and self.dim == other.dim
            and self.schema_id == other.schema_id
            and self.packed.tobytes() == other.packed.tobytes()
        )

    def __hash__(self):
        return hash((self.packed.tobytes(), self.dim, self.schema_id))

    def __len__(self):
        return self.dim

    def __repr__(self):
        return f"AttributeVector(dim={self.dim}, schema={self.schema_id})"


def _code_symbols(code: str, positions: int, group: str, has_filler) -> list[str]:
    """Spread a code over its per-position sets, filler-padding the tail."""
    if len(code) > positions:
        raise CodecError(f"{group} code {code!r} longer than {positions} positions")
    out = []
    for i in range(positions):
        if i < len(code):
            out.append(code[i])
        elif has_filler(i):
            out.append(FILLER)
        else:
            raise CodecError(f"{group} code {code!r} too short: position {i + 1} has no filler symbol")
    return out


def entry_symbols(entry: CharacterEntry, schema: AttributeSchema) -> list[str]:
    """Per-set symbols for ``entry``, in schema order."""
    symbols: list[str] = []
    for group in schema.groups():
        sets = schema.sets_in_group(group)
        if group == "pinyin":
            if len(sets) != 3:
                raise SchemaError("pinyin group must hold initial/final/tone sets")
            symbols += [entry.pinyin_initial, entry.pinyin_final, str(entry.tone)]
        elif group == "structure":
            if len(sets) != 1:
                raise SchemaError("structure group must hold one set")
            symbols.append(entry.structure)
        elif group == "stroke":
            if len(sets) != 1:
                raise SchemaError("stroke group must hold one set")
            symbols.append(_stroke_symbol(entry.stroke_count, sets[0]))
        else:
            code = getattr(entry, group)
            symbols += _code_symbols(code, len(sets), group, lambda i: FILLER in sets[i])
    return symbols


def _stroke_symbol(count: int, stroke_set) -> str:
    if count < 1:
        raise CodecError(f"stroke count must be positive, got {count}")
    numeric = [int(s) for s in stroke_set.symbols if s.isdigit()]
    if numeric:
        return str(min(count, max(numeric)))
    return str(count)


def encode_entry(entry: CharacterEntry, schema: AttributeSchema) -> AttributeVector:
    """One-hot encode an entry. Exactly one bit per set, len(schema) bits total."""
    bits = np.zeros(schema.dim, dtype=np.uint8)
    for aset, off, symbol in zip(schema.sets, schema.offsets(), entry_symbols(entry, schema)):
        if symbol not in aset:
            raise CodecError(f"symbol {symbol!r} not in attribute set {aset.name!r}")
        bits[off + aset.index_of(symbol)] = 1
    return AttributeVector.from_bits(bits, schema.schema_id)


@dataclass(frozen=True)
class DecodeResult:
    """Per-set symbols recovered from a vector; non-one-hot sets are flagged."""

    symbols: dict
    not_onehot: tuple[str, ...]


def decode_vector(vec: AttributeVector, schema: AttributeSchema) -> DecodeResult:
    if vec.dim != schema.dim:
        raise CodecError(f"vector dim {vec.dim} does not match schema dim {schema.dim}")
    bits = vec.bits()
    symbols, flagged = {}, []
    for aset, off in zip(schema.sets, schema.offsets()):
        ones = np.flatnonzero(bits[off:off + aset.size])
        if ones.size == 1:
            symbols[aset.name] = aset.symbols[int(ones[0])]
        else:
            symbols[aset.name] = None
            flagged.append(aset.name)
    return DecodeResult(symbols, tuple(flagged))


def decode_to_columns(vec: AttributeVector, schema: AttributeSchema) -> dict:
    """Dictionary-column view of a decoded vector (codes reassembled, filler stripped)."""
    dec = decode_vector(vec, schema)
    if dec.not_onehot:
        raise CodecError(f"vector is not one-hot in sets: {', '.join(dec.not_onehot)}")
    cols = {}
    for group in schema.groups():
        sets = schema.sets_in_group(group)
        syms = [dec.symbols[s.name] for s in sets]
        if group == "pinyin":
            cols["pinyin_initial"], cols["pinyin_final"], cols["tone"] = syms
        elif group == "structure":
            cols["structure_id"] = syms[0]
        elif group == "stroke":
            cols["stroke_count"] = syms[0]
        else:
            cols[group] = "".join(s for s in syms if s != FILLER)
    return cols


def _parse_row(fields: list[str], schema: AttributeSchema) -> CharacterEntry:
    if len(fields) != len(DICT_COLUMNS):
        raise CodecError(f"expected {len(DICT_COLUMNS)} fields, got {len(fields)}")
    if any(f == "" for f in fields):
        missing = DICT_COLUMNS[fields.index("")]
        raise CodecError(f"missing field {missing!r}")
    label = fields[0].lower()
    try:
        cp = int(label, 16)
    except ValueError:
        raise CodecError(f"label {fields[0]!r} is not a hex codepoint") from None
    if not 0 <= cp <= 0x10FFFF:
        raise CodecError(f"label {fields[0]!r} outside the Unicode range")
    try:
        tone = int(fields[4])
        stroke = int(fields[6])
    except ValueError:
        raise CodecError("tone and stroke_count must be integers") from None
    entry = CharacterEntry(
        label=label, glyph=fields[1], pinyin_initial=fields[2], pinyin_final=fields[3],
        tone=tone, structure=fields[5], stroke_count=stroke,
        cangjie=fields[7], zhengma=fields[8], wubi=fields[9], fourcorner=fields[10],
    )
    # Encoding performs full symbol validation; a row is accepted iff it encodes.
    encode_entry(entry, schema)
    return entry


def parse_dictionary(text: str, schema: AttributeSchema) -> tuple[list[CharacterEntry], list[Diagnostic]]:
    """Parse dictionary rows; invalid rows become diagnostics, not exceptions."""
    entries: list[CharacterEntry] = []
    diagnostics: list[Diagnostic] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        try:
            entry = _parse_row(line.split("\t"), schema)
        except ValidationError as exc:
            diagnostics.append(Diagnostic(lineno, str(exc)))
            continue
        if entry.label in seen:
            diagnostics.append(Diagnostic(lineno, f"duplicate label {entry.label!r}"))
            continue
        seen.add(entry.label)
        entries.append(entry)
    return entries, diagnostics


def parse_dictionary_file(path, schema: AttributeSchema):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_dictionary(fh.read(), schema)


class Lexicon:
    """Ordered labelled attribute vectors; the match target of recognition.

    Entry order is insertion order and is the distance tie-breaking order, so
    it is preserved bit-exactly by save/load.
    """

    def __init__(self, schema_id: str, dim: int, labels: list[str], packed: np.ndarray):
        if packed.ndim != 2 or packed.shape[0] != len(labels):
            raise CodecError("lexicon payload shape does not match label count")
        self.schema_id = schema_id
        self.dim = dim
        self.labels = list(labels)
        self.packed = np.ascontiguousarray(packed, dtype=np.uint8)

    def __len__(self):
        return len(self.labels)

    def vector(self, index: int) -> AttributeVector:
        return AttributeVector(self.packed[index], self.dim, self.schema_id)

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise CodecError(f"label {label!r} not in lexicon") from None

    @classmethod
    def from_vectors(cls, labels: list[str], vectors: list[AttributeVector]) -> "Lexicon":
        if not vectors:
            raise CodecError("cannot build an empty lexicon")
        if len(labels) != len(vectors):
            raise CodecError("label and vector counts differ")
        dim, schema_id = vectors[0].dim, vectors[0].schema_id
        for v in vectors:
            if v.dim != dim or v.schema_id != schema_id:
                raise CodecError("mixed dimensions or schema ids in lexicon input")
        return cls(schema_id, dim, labels, np.vstack([v.packed for v in vectors]))

    def save(self, path, header: str | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if header:
                fh.write(f"# {header}\n")
            fh.write(f"{self.schema_id}\t{self.dim}\t{len(self)}\n")
            for label, row in zip(self.labels, self.packed):
                fh.write(f"{label}\t{row.tobytes().hex()}\n")

    @classmethod
    def load(cls, path) -> "Lexicon":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
        body = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
        if not body:
            raise CodecError("lexicon file has no header line")
        head = body[0].split("\t")
        if len(head) != 3:
            raise CodecError("lexicon header must be schema_id<TAB>dim<TAB>count")
        schema_id, dim_s, count_s = head
        try:
            dim, count = int(dim_s), int(count_s)
        except ValueError:
            raise CodecError("lexicon header dim/count must be integers") from None
        rows = body[1:]
        if len(rows) != count:
            raise CodecError(f"lexicon header promises {count} entries, file has {len(rows)}")
        labels, packed = [], []
        for ln in rows:
            fields = ln.split("\t")
            if len(fields) != 2:
                raise CodecError(f"bad lexicon row: {ln!r}")
            vec = AttributeVector.from_hex(fields[1], dim, schema_id)
            labels.append(fields[0])
            packed.append(vec.packed)
        return cls(schema_id, dim, labels, np.vstack(packed) if packed else np.zeros((0, (dim + 7) // 8), np.uint8))


def build_lexicon(entries: list[CharacterEntry], schema: AttributeSchema) -> Lexicon:
    if not entries:
        raise CodecError("cannot build a lexicon from zero entries")
    labels, seen = [], set()
    for e in entries:
        if e.label in seen:
            raise CodecError(f"duplicate label {e.label!r} in lexicon input")
        seen.add(e.label)
        labels.append(e.label)
    vectors = [encode_entry(e, schema) for e in entries]
    return Lexicon.from_vectors(labels, vectors)


def _projection(schema: AttributeSchema, groups) -> tuple[np.ndarray, str]:
    """Bit indices of the selected groups plus the derived layout tag."""
    if not groups:
        raise CodecError("projection group selection is empty")
    wanted = list(dict.fromkeys(groups))
    present = schema.groups()
    for g in wanted:
        if g not in present:
            raise CodecError(f"unknown group {g!r}; schema has {', '.join(present)}")
    ordered = [g for g in present if g in wanted]
    idx = []
    for aset, off in zip(schema.sets, schema.offsets()):
        if aset.group in ordered:
            idx.extend(range(off, off + aset.size))
    if len(ordered) == len(present):
        return np.asarray(idx, dtype=np.intp), schema.schema_id
    return np.asarray(idx, dtype=np.intp), f"{schema.schema_id}/{'+'.join(ordered)}"


def project_subset(obj, groups, schema: AttributeSchema):
    """Keep only the one-hot blocks of the selected groups, order preserved.

    Accepts an AttributeVector or a Lexicon and returns the same kind.
    Selecting every group returns the input unchanged.
    """
    idx, tag = _projection(schema, groups)
    if tag == schema.schema_id:
        return obj
    if isinstance(obj, AttributeVector):
        if obj.dim != schema.dim:
            raise CodecError(f"vector dim {obj.dim} does not match schema dim {schema.dim}")
        return AttributeVector.from_bits(obj.bits()[idx], tag)
    if isinstance(obj, Lexicon):
        if obj.dim != schema.dim:
            raise CodecError(f"lexicon dim {obj.dim} does not match schema dim {schema.dim}")
        bits = np.unpackbits(obj.packed, axis=1, count=obj.dim)[:, idx]
        return Lexicon(tag, idx.size, list(obj.labels), np.packbits(bits, axis=1))
    raise CodecError(f"cannot project object of type {type(obj).__name__}")
