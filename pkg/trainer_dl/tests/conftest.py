"""Shared fixtures: a tiny rendered store and one overfit training run.

The tests verify interoperability, so they may import the core package
(hanzi_attr) as the reference implementation; the trainer itself never does.
"""

from pathlib import Path

import pytest

from hanzi_attr import synth
from hanzi_attr.schema import default_schema_path

import trainer_dl as td


@pytest.fixture(scope="session")
def manifest_text() -> str:
    return default_schema_path().read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def manifest(manifest_text) -> td.Manifest:
    return td.parse_manifest(manifest_text)


@pytest.fixture(scope="session")
def tiny_store(tmp_path_factory, manifest_text):
    """Ten clean single-render classes plus dictionary, manifest, and id list."""
    root = tmp_path_factory.mktemp("tiny_store")
    entries = synth.synthetic_dictionary(10, seed=11)
    corpus = synth.render_corpus(entries, per_class=1, seed=3, jitter=0, noise=0.0)
    labels = synth.write_sample_store(corpus, root / "store")
    (root / "dict.tsv").write_text(synth.entries_to_tsv(entries), encoding="utf-8")
    (root / "schema.tsv").write_text(manifest_text, encoding="utf-8")
    (root / "ids.txt").write_text("".join(c.image_id + "\n" for c in corpus), encoding="utf-8")
    return {
        "root": root,
        "images": root / "store",
        "labels": labels,
        "dict": root / "dict.tsv",
        "manifest": root / "schema.tsv",
        "ids": root / "ids.txt",
        "entries": entries,
        "corpus": corpus,
    }


@pytest.fixture(scope="session")
def tiny_samples(tiny_store, manifest):
    targets = td.load_dictionary_targets(tiny_store["dict"], manifest)
    return td.load_samples(tiny_store["images"], tiny_store["labels"], targets)


@pytest.fixture(scope="session")
def overfit(tiny_samples, manifest) -> td.DeepResult:
    """One memorization run on the ten-image store, reused across tests."""
    cfg = td.DeepConfig(initial_lr=0.02, lr_halving_interval=400, batch_size=10,
                        iterations=400, seed=0)
    return td.train_deep(tiny_samples, manifest, cfg)
