"""key=value config files shared by the segmentation/training/split configs."""

from __future__ import annotations

from .errors import ValidationError


def parse_kv(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines; '#' comments and blank lines are skipped."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValidationError(f"config line {lineno}: expected key=value, got {line!r}")
        values[key.strip()] = value.strip()
    return values


def read_kv(path) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv(fh.read())


def coerce(values: dict[str, str], key: str, kind, default):
    """Pull one typed value out of a parsed config."""
    if key not in values:
        return default
    raw = values[key]
    try:
        if kind is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is tuple:  # comma-separated floats
            return tuple(float(t) for t in raw.split(",") if t.strip() != "")
        return kind(raw)
    except ValueError:
        raise ValidationError(f"config key {key!r}: cannot parse {raw!r}") from None
