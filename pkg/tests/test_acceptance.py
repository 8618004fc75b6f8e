"""Acceptance suite: the binding contract checks with their tolerances.

Each test prints one "[acceptance] <name>: PASS/FAIL" verdict through the
capture-disabled channel so the lines always reach the terminal, then fails
loudly with the collected reasons if anything missed its bound.  Oracles
here are deliberately naive re-implementations (per-bit sorts, run-list
simulations, exhaustive AP enumeration); the library must agree with them.
"""

import math
import os
import subprocess
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from helpers import box_iou, lexicon_from_bits, mean_runlength_oracle
from hanzi_attr.classifier import MultiHeadModel, TrainConfig, forward, predict, total_loss, train
from hanzi_attr.codec import (AttributeVector, Lexicon, build_lexicon, decode_to_columns,
                              encode_entry, parse_dictionary)
from hanzi_attr.evaluation import (SplitSpec, character_accuracy, frequency_split,
                                   kshot_augment, word_spotting_map)
from hanzi_attr.matcher import recognize
from hanzi_attr.pgm import write_pgm
from hanzi_attr.schema import default_schema, load_schema
from hanzi_attr.segmentation import runlength_profile, segment_page
from hanzi_attr.synth import (PageSpec, corpus_to_samples, make_page, render_corpus,
                              render_glyph, synthetic_dictionary, write_dictionary,
                              write_sample_store)

CANONICAL_GROUPS = {
    "reading": ("pinyin", "structure", "stroke"),
    "cangjie": ("cangjie",),
    "zhengma": ("zhengma",),
    "wubi": ("wubi",),
    "fourcorner": ("fourcorner",),
}


@pytest.fixture
def announce(capsys):
    def _verdict(name, failures):
        ok = not failures
        with capsys.disabled():
            print(f"[acceptance] {name}: {'PASS' if ok else 'FAIL'}")
        assert ok, f"{name}: " + "; ".join(str(f) for f in failures)

    return _verdict


def test_schema_constants(announce):
    failures = []
    default_schema.cache_clear()
    t0 = time.perf_counter()
    schema = default_schema()
    group_dims = sorted(sum(s.size for s in schema.sets if s.group in sel)
                        for sel in CANONICAL_GROUPS.values())
    elapsed = time.perf_counter() - t0
    if len(schema.sets) != 23:
        failures.append(f"expected 23 sets, got {len(schema.sets)}")
    if group_dims != [50, 105, 107, 115, 134]:
        failures.append(f"group dims {group_dims}")
    if schema.dim != 511:
        failures.append(f"total dim {schema.dim}")
    if elapsed >= 1.0:
        failures.append(f"took {elapsed:.2f}s")
    announce("schema-constants", failures)


def test_codec_round_trip(announce, schema):
    text = (resources.files("hanzi_attr.data") / "sample_dict.tsv").read_text(encoding="utf-8")
    entries, diags = parse_dictionary(text, schema)
    failures = []
    if diags:
        failures.append(f"{len(diags)} dictionary diagnostics")
    if len(entries) != 10_000:
        failures.append(f"expected 10000 bundled entries, got {len(entries)}")
    t0 = time.perf_counter()
    bad_popcount = bad_round_trip = 0
    for e in entries:
        vec = encode_entry(e, schema)
        if vec.popcount() != 23:
            bad_popcount += 1
        cols = decode_to_columns(vec, schema)
        same = (cols["pinyin_initial"] == e.pinyin_initial
                and cols["pinyin_final"] == e.pinyin_final
                and int(cols["tone"]) == e.tone
                and cols["structure_id"] == e.structure
                and int(cols["stroke_count"]) == e.stroke_count
                and cols["cangjie"] == e.cangjie
                and cols["zhengma"] == e.zhengma
                and cols["wubi"] == e.wubi
                and cols["fourcorner"] == e.fourcorner)
        bad_round_trip += not same
    elapsed = time.perf_counter() - t0
    if bad_popcount:
        failures.append(f"{bad_popcount} vectors without popcount 23")
    if bad_round_trip:
        failures.append(f"{bad_round_trip} entries failed the round trip")
    if elapsed >= 5.0:
        failures.append(f"took {elapsed:.2f}s for 10k entries")
    announce("codec-round-trip", failures)


def _random_onehot_matrix(rng, schema, n):
    bits = np.zeros((n, schema.dim), dtype=np.uint8)
    for aset, off in zip(schema.sets, schema.offsets()):
        bits[np.arange(n), off + rng.integers(0, aset.size, size=n)] = 1
    return bits


def test_matcher_oracle_equivalence(announce, schema):
    mismatches = 0
    first = None
    for trial in range(1000):
        rng = np.random.default_rng(20_000 + trial)
        n = int(rng.integers(1, 501))
        rows = _random_onehot_matrix(rng, schema, n)
        if n > 1 and rng.random() < 0.3:
            # plant an exact duplicate so tie ordering is actually exercised
            src, dst = rng.choice(n, size=2, replace=False)
            rows[dst] = rows[src]
        lex = Lexicon(schema.schema_id, schema.dim,
                      [format(0x4E00 + i, "x") for i in range(n)],
                      np.packbits(rows, axis=1))
        if rng.random() < 0.5:
            q_bits = rows[int(rng.integers(0, n))].copy()
        else:
            q_bits = _random_onehot_matrix(rng, schema, 1)[0]
        got = recognize(AttributeVector.from_bits(q_bits, schema.schema_id), lex, k=n)
        dists = (rows != q_bits).sum(axis=1)
        want = sorted(range(n), key=lambda i: (int(dists[i]), i))
        same = ([c.index for c in got] == want
                and all(c.distance == int(dists[c.index]) for c in got)
                and all(c.label == lex.labels[c.index] for c in got))
        if not same:
            mismatches += 1
            first = first or f"first mismatch at trial {trial}"
    failures = [f"{mismatches} mismatching instances ({first})"] if mismatches else []
    announce("matcher-oracle-equivalence", failures)


def _corrupt_to_different(bits, schema, count, rng):
    out = bits.copy()
    offsets = schema.offsets()
    for i in rng.choice(len(schema.sets), size=count, replace=False):
        aset = schema.sets[i]
        off = offsets[i]
        old = int(np.argmax(out[off:off + aset.size]))
        new = int(rng.integers(0, aset.size - 1))
        if new >= old:
            new += 1
        out[off:off + aset.size] = 0
        out[off + new] = 1
    return out


def test_noise_monotonicity(announce, schema):
    levels = list(range(0, 21, 4))
    hits = {j: 0 for j in levels}
    trials = 0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        rows = [_random_onehot_matrix(rng, schema, 1)[0] for _ in range(50)]
        lex = lexicon_from_bits(rows, schema)
        for _ in range(30):
            idx = int(rng.integers(0, 50))
            for j in levels:
                bits = rows[idx] if j == 0 else _corrupt_to_different(rows[idx], schema, j, rng)
                got = recognize(AttributeVector.from_bits(bits, schema.schema_id), lex, k=1)[0]
                hits[j] += got.label == lex.labels[idx]
            trials += 1
    acc = [hits[j] / trials for j in levels]
    failures = []
    if acc[0] != 1.0:
        failures.append(f"j=0 accuracy {acc[0]:.4f}, expected exactly 1.0")
    for (ja, a), (jb, b) in zip(zip(levels, acc), zip(levels[1:], acc[1:])):
        if b > a:
            failures.append(f"accuracy rose from {a:.4f} (j={ja}) to {b:.4f} (j={jb})")
    announce("noise-monotonicity", failures)


def test_runlength_profile_exactness(announce):
    rng = np.random.default_rng(77)
    h, w = 200, 10_000
    # left half: busy columns (many runs); right half: ink-heavy columns with
    # few background runs, so the fallback branch fires
    noise = rng.random((h, w))
    binary = np.zeros((h, w), dtype=np.uint8)
    binary[:, : w // 2] = noise[:, : w // 2] < 0.5
    binary[:, w // 2:] = noise[:, w // 2:] < 0.97
    profile = runlength_profile(binary, min_count=7)
    mismatches = below = at_or_above = 0
    for col in range(w):
        column = binary[:, col]
        runs = sum(1 for v, prev in zip(column, np.concatenate(([1], column[:-1])))
                   if v == 0 and prev != 0)
        if runs < 7:
            below += 1
        else:
            at_or_above += 1
        if profile[col] != mean_runlength_oracle(column, 7, h):
            mismatches += 1
    failures = []
    if mismatches:
        failures.append(f"{mismatches} column mismatches")
    if not below or not at_or_above:
        failures.append(f"branch coverage: {at_or_above} columns >= 7 runs, {below} below")
    announce("runlength-profile-exactness", failures)


def test_segmentation_sweep(announce):
    skews = [-1.0, -0.5, 0.0, 0.5, 1.0]
    skew_hits = 0
    lines_found = lines_total = 0
    boxes_good = boxes_total = 0
    slowest = 0.0
    for i in range(100):
        spec = PageSpec(seed=4000 + i, skew=skews[i % len(skews)])
        truth = make_page(spec)
        t0 = time.perf_counter()
        res = segment_page(truth.page)
        slowest = max(slowest, time.perf_counter() - t0)
        skew_hits += res.skew == spec.skew
        for ln in truth.lines:
            lines_total += 1
            best = 0.0
            for got in res.lines:
                lo = max(ln.x_start, got.x_start)
                hi = min(ln.x_end, got.x_end)
                inter = max(0, hi - lo + 1)
                union = ln.width + got.width - inter
                best = max(best, inter / union)
            lines_found += best >= 0.5
        detected = [(b.x, b.y, b.w, b.h) for b in res.boxes]
        for tb in truth.boxes:
            boxes_total += 1
            ref = (tb.x, tb.y, tb.w, tb.h)
            if any(box_iou(ref, db) >= 0.8 for db in detected):
                boxes_good += 1
    failures = []
    if skew_hits < 95:
        failures.append(f"skew recovered on {skew_hits}/100 pages")
    recall = lines_found / lines_total
    if recall < 0.95:
        failures.append(f"line recall {recall:.3f}")
    box_rate = boxes_good / boxes_total
    if box_rate < 0.90:
        failures.append(f"only {box_rate:.3f} of truth boxes matched at IoU 0.8")
    if slowest >= 2.0:
        failures.append(f"slowest page took {slowest:.2f}s")
    announce("segmentation-sweep", failures)


def test_loss_and_gradient(announce, schema):
    failures = []
    zero = MultiHeadModel(schema.schema_id, 4, schema.set_names,
                          [s.size for s in schema.sets],
                          np.zeros((4, schema.dim)), np.zeros(schema.dim))
    uniform_loss = total_loss(forward(zero, np.ones(4)), {s.name: 0 for s in schema.sets})
    expected = sum(math.log(s.size) for s in schema.sets)
    if abs(uniform_loss - expected) > 1e-9:
        failures.append(f"uniform loss off by {abs(uniform_loss - expected):.2e}")

    from hanzi_attr.classifier import _loss_and_grad

    toy_schema = load_schema("abc\tpinyin\ta,b,c\nnum\tstroke\t1,2,3,4\n")
    rng = np.random.default_rng(15)
    weights = rng.normal(size=(6, 7)) * 0.3
    biases = rng.normal(size=7) * 0.1

    def model_with(w, b):
        return MultiHeadModel(toy_schema.schema_id, 6, toy_schema.set_names, [3, 4], w, b)

    feats = rng.random((4, 6))
    targets = rng.integers(0, [3, 4], size=(4, 2))
    _, grad_w, grad_b = _loss_and_grad(model_with(weights, biases), feats, targets)
    eps = 1e-6
    worst = 0.0

    def fd_loss(w, b):
        return _loss_and_grad(model_with(w, b), feats, targets)[0]

    for i in range(6):
        for j in range(7):
            up, down = weights.copy(), weights.copy()
            up[i, j] += eps
            down[i, j] -= eps
            fd = (fd_loss(up, biases) - fd_loss(down, biases)) / (2 * eps)
            worst = max(worst, abs(fd - grad_w[i, j]) / max(abs(fd), abs(grad_w[i, j]), 1e-8))
    for j in range(7):
        up, down = biases.copy(), biases.copy()
        up[j] += eps
        down[j] -= eps
        fd = (fd_loss(weights, up) - fd_loss(weights, down)) / (2 * eps)
        worst = max(worst, abs(fd - grad_b[j]) / max(abs(fd), abs(grad_b[j]), 1e-8))
    if worst >= 1e-4:
        failures.append(f"max gradient relative error {worst:.2e}")
    announce("loss-and-gradient", failures)


def test_zero_shot_transfer(announce, schema):
    cfg = dict(initial_lr=0.05, lr_halving_interval=400, batch_size=32, iterations=300)
    t0 = time.perf_counter()
    combined_accs = []
    group_accs = {name: [] for name in CANONICAL_GROUPS}
    for seed in range(5):
        entries = synthetic_dictionary(250, seed=900 + seed, schema=schema)
        train_entries, test_entries = entries[:200], entries[200:]
        corpus = render_corpus(train_entries, per_class=2, seed=seed, schema=schema,
                               jitter=1, noise=4.0)
        result = train(corpus_to_samples(corpus), TrainConfig(seed=seed, **cfg), schema)
        lexicon = build_lexicon(test_entries, schema)
        preds = predict(result.model,
                        np.stack([render_glyph(e, schema) for e in test_entries]),
                        [e.label for e in test_entries])
        truth = {e.label: e.label for e in test_entries}
        combined_accs.append(character_accuracy(preds, lexicon, truth, schema))
        for name, sel in CANONICAL_GROUPS.items():
            group_accs[name].append(character_accuracy(preds, lexicon, truth, schema, groups=sel))
    elapsed = time.perf_counter() - t0
    combined = float(np.mean(combined_accs))
    failures = []
    if combined <= 1 / 50:
        failures.append(f"combined accuracy {combined:.3f} not above chance")
    for name in CANONICAL_GROUPS:
        acc = float(np.mean(group_accs[name]))
        if combined <= acc:
            failures.append(f"combined {combined:.3f} <= {name} alone {acc:.3f}")
    if elapsed >= 600:
        failures.append(f"took {elapsed:.0f}s")
    announce("zero-shot-transfer", failures)


def test_kshot_monotonicity(announce, schema):
    cfg = dict(initial_lr=0.05, lr_halving_interval=400, batch_size=32, iterations=400)
    levels = list(range(6))
    sums = {k: 0.0 for k in levels}
    for seed in range(10):
        entries = synthetic_dictionary(23, seed=500 + seed, schema=schema)
        corpus = (render_corpus(entries[:8], per_class=24, seed=seed, schema=schema,
                                jitter=0, noise=0.0)
                  + render_corpus(entries[8:], per_class=6, seed=seed + 77, schema=schema,
                                  jitter=0, noise=0.0))
        by_id = {c.image_id: c for c in corpus}
        pairs = {c.image_id: c.label for c in corpus}
        lexicon = build_lexicon(entries, schema)
        split = frequency_split(pairs, SplitSpec(frequency_threshold=20,
                                                 train_fraction=0.8, seed=seed))
        for k in levels:
            train_ids, test_ids = kshot_augment(split, pairs, k, seed=seed)
            result = train(corpus_to_samples([by_id[i] for i in train_ids]),
                           TrainConfig(seed=seed, **cfg), schema)
            test = [by_id[i] for i in test_ids]
            preds = predict(result.model, np.stack([c.image for c in test]),
                            [c.image_id for c in test])
            sums[k] += character_accuracy(preds, lexicon, pairs, schema)
    means = [sums[k] / 10 for k in levels]
    failures = [f"mean lofreq accuracy fell from {a:.4f} (k={ka}) to {b:.4f} (k={kb})"
                for (ka, a), (kb, b) in zip(zip(levels, means), zip(levels[1:], means[1:]))
                if b < a]
    announce("kshot-monotonicity", failures)


def _ap_by_enumeration(qid, ids, labels, features):
    """Exhaustive AP: walk every other image in (distance, id) order."""
    dist = {i: math.dist(features[qid], features[i]) for i in ids}
    order = sorted((i for i in ids if i != qid), key=lambda i: (dist[i], i))
    relevant = [i for i in order if labels[i] == labels[qid]]
    if not relevant:
        return None
    hits, ap = 0, 0.0
    for rank, i in enumerate(order, start=1):
        if labels[i] == labels[qid]:
            hits += 1
            ap += hits / rank
    return ap / len(relevant)


def test_map_oracle(announce):
    failures = []
    for trial in range(50):
        rng = np.random.default_rng(7000 + trial)
        n = int(rng.integers(4, 41))
        ids = [f"img{j:03d}" for j in range(n)]
        alphabet = [chr(ord("a") + x) for x in range(int(rng.integers(2, 6)))]
        labels = {i: alphabet[int(rng.integers(0, len(alphabet)))] for i in ids}
        labels[ids[1]] = labels[ids[0]]  # at least one answerable query
        # small-integer coordinates make exact distance ties common
        features = {i: rng.integers(0, 6, size=3).astype(np.float64) for i in ids}
        got = word_spotting_map(features, labels)
        aps = [_ap_by_enumeration(q, ids, labels, features) for q in ids]
        aps = [a for a in aps if a is not None]
        want = sum(aps) / len(aps)
        if abs(got.map - want) > 1e-9:
            failures.append(f"trial {trial}: map {got.map:.12f} vs oracle {want:.12f}")
        if got.queries != len(aps) or got.skipped != n - len(aps):
            failures.append(f"trial {trial}: counted {got.queries}/{got.skipped}")
    clusters = {f"p{j}": np.array([100.0 * (j // 2), 0.0]) for j in range(10)}
    pair_labels = {f"p{j}": f"L{j // 2}" for j in range(10)}
    rank1 = word_spotting_map(clusters, pair_labels)
    if rank1.map != 1.0:
        failures.append(f"rank-1-only case returned {rank1.map!r}")
    announce("map-oracle", failures)


def _run_cli(*args, cwd=None):
    cmd = [sys.executable, "-m", "hanzi_attr"] + [str(a) for a in args]
    return subprocess.run(cmd, capture_output=True, text=True, cwd=cwd, env=os.environ.copy())


def test_cli_pipeline_determinism(announce, tmp_path, schema):
    """The same pipeline commands, rerun from scratch, must be byte-identical."""
    import shutil

    src = tmp_path / "in"
    src.mkdir()
    entries = synthetic_dictionary(30, seed=31, schema=schema)
    write_dictionary(entries, src / "dict.tsv")
    corpus = render_corpus(entries[:10], per_class=2, seed=3, schema=schema,
                           jitter=0, noise=0.0)
    write_sample_store(corpus, src / "store")
    write_pgm(src / "page.pgm", make_page(PageSpec(seed=21)).page)
    (src / "train.cfg").write_text(
        "initial_lr=0.05\nlr_halving_interval=600\nbatch_size=10\niterations=150\nseed=1\n",
        encoding="utf-8")
    (src / "split.cfg").write_text("frequency_threshold=1\ntrain_fraction=0.8\nseed=0\n",
                                   encoding="utf-8")

    failures = []
    steps = [
        ("lexicon", "build", "--dict", "in/dict.tsv", "-o", "lex.tsv"),
        ("segment", "--in", "in/page.pgm", "-o", "boxes.tsv", "--crops", "crops"),
        ("train", "--samples", "in/store", "--labels", "in/store/labels.tsv",
         "--dict", "in/dict.tsv", "--config", "in/train.cfg", "-o", "model.bin"),
        ("predict", "--model", "model.bin", "--images", "in/store",
         "-o", "preds.tsv", "--features-out", "feats.tsv"),
        ("recognize", "--lexicon", "lex.tsv", "--preds", "preds.tsv",
         "--topk", 3, "-o", "rec.tsv"),
        ("evaluate", "--preds", "preds.tsv", "--lexicon", "lex.tsv",
         "--truth", "in/store/labels.tsv", "--split", "in/split.cfg",
         "--split-out", "splits", "-o", "rep.tsv"),
        ("spot", "--features", "feats.tsv", "--labels", "in/store/labels.tsv",
         "-o", "spot.tsv"),
    ]

    def pipeline(run_dir):
        # identical commands against identical inputs, from a fresh directory
        run_dir.mkdir()
        shutil.copytree(src, run_dir / "in")
        for step in steps:
            r = _run_cli(*step, cwd=run_dir)
            if r.returncode != 0:
                failures.append(f"{step[0]} exited {r.returncode}: {r.stderr.strip()[:200]}")
                return

    first, second = tmp_path / "a", tmp_path / "b"
    pipeline(first)
    pipeline(second)
    if not failures:
        rel_a = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
        rel_b = sorted(p.relative_to(second) for p in second.rglob("*") if p.is_file())
        if rel_a != rel_b:
            failures.append("the two runs produced different file sets")
        else:
            diffs = [str(rel) for rel in rel_a
                     if (first / rel).read_bytes() != (second / rel).read_bytes()]
            if diffs:
                failures.append("differing outputs: " + ", ".join(diffs[:8]))
            if len(rel_a) < 50:
                failures.append(f"pipeline left only {len(rel_a)} files, expected crops and figures")
    announce("cli-determinism", failures)
