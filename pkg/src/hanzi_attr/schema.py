"""Attribute schema: the ordered attribute sets that define the binary code layout.

A schema is loaded from a manifest file with one attribute set per line:

    name<TAB>group<TAB>symbol,symbol,...

Lines starting with ``#`` and blank lines are ignored.  The concatenation of
the sets' one-hot blocks, in manifest order, fixes the layout of every encoded
vector, so two artifacts interoperate only when their schema ids match.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from .errors import ValidationError

GROUPS = ("pinyin", "structure", "stroke", "cangjie", "zhengma", "wubi", "fourcorner")

# Placeholder symbol for unused trailing positions of variable-length codes.
FILLER = "*"


class SchemaError(ValidationError):
    pass


@dataclass(frozen=True)
class AttributeSet:
    """One categorical attribute: a named alphabet within a group."""

    name: str
    group: str
    symbols: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.symbols)})

    @property
    def size(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def index_of(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise SchemaError(f"symbol {symbol!r} not in attribute set {self.name!r}") from None


@dataclass(frozen=True)
class AttributeSchema:
    """An ordered tuple of attribute sets plus the derived block layout."""

    sets: tuple[AttributeSet, ...]
    schema_id: str
    _by_name: dict = field(init=False, repr=False, compare=False)
    _offsets: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_name", {s.name: s for s in self.sets})
        offsets, pos = [], 0
        for s in self.sets:
            offsets.append(pos)
            pos += s.size
        object.__setattr__(self, "_offsets", tuple(offsets))

    @property
    def dim(self) -> int:
        return sum(s.size for s in self.sets)

    @property
    def set_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.sets)

    def __len__(self) -> int:
        return len(self.sets)

    def get(self, name: str) -> AttributeSet:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"unknown attribute set {name!r}") from None

    def span(self, name: str) -> tuple[int, int]:
        """Half-open [start, stop) of the named set's one-hot block."""
        for s, off in zip(self.sets, self._offsets):
            if s.name == name:
                return off, off + s.size
        raise SchemaError(f"unknown attribute set {name!r}")

    def offsets(self) -> tuple[int, ...]:
        return self._offsets

    def groups(self) -> tuple[str, ...]:
        """Distinct groups in first-appearance order."""
        seen = []
        for s in self.sets:
            if s.group not in seen:
                seen.append(s.group)
        return tuple(seen)

    def sets_in_group(self, group: str) -> tuple[AttributeSet, ...]:
        return tuple(s for s in self.sets if s.group == group)

    def group_dims(self) -> dict[str, int]:
        dims: dict[str, int] = {}
        for s in self.sets:
            dims[s.group] = dims.get(s.group, 0) + s.size
        return dims


def manifest_of(schema: AttributeSchema) -> str:
    """Canonical manifest text (no comments); the schema id hashes this."""
    lines = [f"{s.name}\t{s.group}\t{','.join(s.symbols)}" for s in schema.sets]
    return "\n".join(lines) + "\n"


def _schema_id(canonical: str) -> str:
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def load_schema(text: str) -> AttributeSchema:
    """Parse a manifest. Malformed manifests raise SchemaError."""
    sets: list[AttributeSet] = []
    names = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise SchemaError(f"manifest line {lineno}: expected 3 tab-separated fields, got {len(fields)}")
        name, group, alphabet = fields
        if not name:
            raise SchemaError(f"manifest line {lineno}: empty set name")
        if name in names:
            raise SchemaError(f"manifest line {lineno}: duplicate set name {name!r}")
        if group not in GROUPS:
            raise SchemaError(f"manifest line {lineno}: unknown group {group!r}")
        symbols = alphabet.split(",") if alphabet else []
        if not symbols or any(not s for s in symbols):
            raise SchemaError(f"manifest line {lineno}: empty alphabet or empty symbol")
        if len(set(symbols)) != len(symbols):
            raise SchemaError(f"manifest line {lineno}: duplicate symbol in set {name!r}")
        names.add(name)
        sets.append(AttributeSet(name, group, tuple(symbols)))
    if not sets:
        raise SchemaError("manifest defines no attribute sets")
    schema = AttributeSchema(tuple(sets), "")
    return AttributeSchema(tuple(sets), _schema_id(manifest_of(schema)))


def load_schema_file(path) -> AttributeSchema:
    with open(path, "r", encoding="utf-8") as fh:
        return load_schema(fh.read())


def save_schema(schema: AttributeSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(manifest_of(schema))


def default_schema_path():
    return resources.files("hanzi_attr.data") / "default_schema.tsv"


@lru_cache(maxsize=1)
def default_schema() -> AttributeSchema:
    """The bundled 23-set schema (511 binary dimensions)."""
    return load_schema(default_schema_path().read_text(encoding="utf-8"))
