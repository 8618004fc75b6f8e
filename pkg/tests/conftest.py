import pytest

from hanzi_attr.codec import build_lexicon, parse_dictionary_file
from hanzi_attr.schema import default_schema, default_schema_path
from hanzi_attr.synth import synthetic_dictionary


@pytest.fixture(scope="session")
def schema():
    return default_schema()


@pytest.fixture(scope="session")
def bundled_dict_path():
    import importlib.resources as resources

    return resources.files("hanzi_attr.data") / "sample_dict.tsv"


@pytest.fixture(scope="session")
def bundled_entries(schema, bundled_dict_path):
    entries, diagnostics = parse_dictionary_file(bundled_dict_path, schema)
    assert not diagnostics
    return entries


@pytest.fixture(scope="session")
def small_entries(schema):
    return synthetic_dictionary(300, seed=11, schema=schema)


@pytest.fixture(scope="session")
def small_lexicon(schema, small_entries):
    return build_lexicon(small_entries, schema)


@pytest.fixture(scope="session")
def schema_manifest_path():
    return default_schema_path()
