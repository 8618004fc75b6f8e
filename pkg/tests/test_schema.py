import hashlib

import pytest

from hanzi_attr.schema import (
    FILLER,
    AttributeSchema,
    AttributeSet,
    SchemaError,
    load_schema,
    load_schema_file,
    manifest_of,
    save_schema,
)

MINI = "vowel\tpinyin\ta,e,i\ntone\tpinyin\t0,1\nshape\tstructure\ts0,s1,s2,s3\n"


def test_default_constants(schema):
    assert len(schema) == 23
    assert schema.dim == 511
    dims = schema.group_dims()
    assert dims["pinyin"] + dims["structure"] + dims["stroke"] == 115
    assert dims["cangjie"] == 134
    assert dims["zhengma"] == 105
    assert dims["wubi"] == 107
    assert dims["fourcorner"] == 50


def test_default_set_sizes(schema):
    assert schema.get("pinyin_initial").size == 26
    assert schema.get("pinyin_final").size == 38
    assert schema.get("pinyin_tone").size == 5
    assert schema.get("structure").size == 15
    assert schema.get("stroke_count").size == 31
    # filler layout: cangjie 2-5, zhengma 4, wubi 2-4 pad; the rest never do
    for name in ("cangjie_2", "cangjie_3", "cangjie_4", "cangjie_5",
                 "zhengma_4", "wubi_2", "wubi_3", "wubi_4"):
        assert FILLER in schema.get(name)
    for name in ("cangjie_1", "zhengma_1", "wubi_1", "fourcorner_1", "fourcorner_5"):
        assert FILLER not in schema.get(name)


def test_schema_id_is_manifest_hash(schema):
    manifest = manifest_of(schema)
    assert schema.schema_id == hashlib.sha256(manifest.encode()).hexdigest()[:12]
    assert schema.schema_id == "6e0b35267ba3"


def test_manifest_round_trip(schema):
    again = load_schema(manifest_of(schema))
    assert again.schema_id == schema.schema_id
    assert again.set_names == schema.set_names
    assert again.dim == schema.dim


def test_comments_and_blanks_ignored():
    noisy = "# heading\n\n" + MINI + "\n# trailing\n"
    assert load_schema(noisy).schema_id == load_schema(MINI).schema_id


def test_id_changes_with_content():
    a = load_schema(MINI)
    b = load_schema(MINI.replace("s3", "s9"))
    assert a.schema_id != b.schema_id


def test_spans_and_offsets():
    s = load_schema(MINI)
    assert s.dim == 9
    assert s.offsets() == (0, 3, 5)
    assert s.span("vowel") == (0, 3)
    assert s.span("tone") == (3, 5)
    assert s.span("shape") == (5, 9)
    with pytest.raises(SchemaError):
        s.span("missing")


def test_groups_in_first_appearance_order():
    s = load_schema(MINI)
    assert s.groups() == ("pinyin", "structure")
    assert [a.name for a in s.sets_in_group("pinyin")] == ["vowel", "tone"]


def test_index_and_membership():
    s = load_schema(MINI)
    vowel = s.get("vowel")
    assert "e" in vowel and "x" not in vowel
    assert vowel.index_of("i") == 2
    with pytest.raises(SchemaError):
        vowel.index_of("x")


@pytest.mark.parametrize("text, fragment", [
    ("", "no attribute sets"),
    ("a\tpinyin\n", "3 tab-separated"),
    ("a\tnope\tx,y\n", "unknown group"),
    ("a\tpinyin\tx,y\na\tpinyin\tz,w\n", "duplicate set name"),
    ("a\tpinyin\t\n", "3 tab-separated"),    # strip() eats the edge tab
    ("a\tpinyin\tx,,y\n", "empty alphabet or empty symbol"),
    ("a\tpinyin\tx,y,x\n", "duplicate symbol"),
])
def test_malformed_manifests(text, fragment):
    with pytest.raises(SchemaError, match=fragment):
        load_schema(text)


def test_save_load_file_round_trip(tmp_path, schema):
    path = tmp_path / "manifest.tsv"
    save_schema(schema, path)
    assert load_schema_file(path).schema_id == schema.schema_id


def test_schema_is_immutable():
    s = load_schema(MINI)
    with pytest.raises(AttributeError):
        s.schema_id = "other"
    with pytest.raises(AttributeError):
        s.sets[0].name = "other"


def test_attribute_set_direct_construction():
    aset = AttributeSet("toy", "stroke", ("1", "2", "3"))
    assert aset.size == 3 and aset.index_of("2") == 1
    schema = AttributeSchema((aset,), "abc")
    assert schema.dim == 3 and schema.set_names == ("toy",)
