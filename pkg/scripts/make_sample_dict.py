"""Regenerate the bundled sample dictionary.

The package ships a synthetic 10k-entry dictionary so the lexicon and
codec paths can be exercised without any external data drop.  Entries
are deterministic; rerunning this script reproduces the file bit for bit.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hanzi_attr.synth import synthetic_dictionary, write_dictionary

OUT = Path(__file__).resolve().parents[1] / "src" / "hanzi_attr" / "data" / "sample_dict.tsv"

HEADER = (
    "sample dictionary: 10000 synthetic entries, deterministic (seed 97).\n"
    "columns: label glyph pinyin_initial pinyin_final tone structure "
    "stroke_count cangjie zhengma wubi fourcorner"
)


def main() -> None:
    entries = synthetic_dictionary(10000, seed=97)
    write_dictionary(entries, OUT, header=HEADER)
    print(f"{len(entries)} entries -> {OUT}")


if __name__ == "__main__":
    main()
