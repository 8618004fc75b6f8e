"""Command line interface.

Subcommands: lexicon build, segment, train, predict, recognize, evaluate,
spot.  Every text output starts with a comment line carrying the tool
version, the schema id in effect, and a hash of the resolved invocation
parameters, so identical reruns are byte-identical and provenance is
greppable.  Exit codes: 0 success, 1 validation problem, 2 I/O problem.
"""

from __future__ import annotations

import hashlib
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from .classifier import (GLYPH_SIZE, TrainConfig, load_model, load_sample_store,
                         predict as predict_images, save_model, train as train_model)
from .codec import Lexicon, build_lexicon, parse_dictionary_file, project_subset
from .errors import ValidationError
from .evaluation import (SplitSpec, ablation_report, frequency_split, kshot_augment,
                         resolve_groups, word_spotting_map)
from .matcher import argmax_onehot, recognize as match_one
from .pgm import read_pgm, resize_nearest, write_pgm
from .predictions import read_predictions, write_predictions
from .schema import AttributeSchema, default_schema, load_schema_file
from .segmentation import SegConfig, boxes_to_tsv, crop_box, lines_to_tsv, segment_page

SCHEMA_ENV = "HANZI_ATTR_SCHEMA"


def _resolve_schema(path: str | None) -> AttributeSchema:
    path = path or os.environ.get(SCHEMA_ENV)
    if path:
        return load_schema_file(path)
    return default_schema()


def _config_hash(params: dict) -> str:
    canon = repr(sorted((k, str(v)) for k, v in params.items()))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


def _header(schema_id: str, params: dict) -> str:
    return f"hanzi-attr {__version__} schema={schema_id} config={_config_hash(params)}"


def _announce(header: str) -> None:
    click.echo(f"# {header}", err=True)


def _pmap(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _write_text(path, header: str, body: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {header}\n")
        fh.write(body)


def _read_labels(path) -> dict:
    labels = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ValidationError(f"labels line {lineno}: expected image_id<TAB>codepoint")
            labels[fields[0]] = fields[1].lower()
    return labels


def _strict_read_predictions(path, schema):
    preds, diags = read_predictions(path, schema)
    if diags:
        for d in diags[:10]:
            click.echo(f"prediction file: {d}", err=True)
        raise ValidationError(f"{len(diags)} malformed prediction line(s)")
    if not preds:
        raise ValidationError("prediction file holds no predictions")
    return preds


@click.group()
@click.version_option(__version__, prog_name="hanzi-attr")
def cli():
    """Attribute-based open-set character recognition toolkit."""


@cli.group()
def lexicon():
    """Lexicon file operations."""


@lexicon.command("build")
@click.option("--schema", "schema_path", type=click.Path(), default=None, help="Schema manifest (default: $HANZI_ATTR_SCHEMA or bundled).")
@click.option("--dict", "dict_path", type=click.Path(exists=True, dir_okay=False), required=True, help="Dictionary TSV.")
@click.option("-o", "--out", type=click.Path(), required=True)
def lexicon_build(schema_path, dict_path, out):
    """Encode a dictionary into a lexicon file."""
    schema = _resolve_schema(schema_path)
    entries, diags = parse_dictionary_file(dict_path, schema)
    for d in diags:
        click.echo(f"dictionary: {d}", err=True)
    if not entries:
        raise ValidationError("dictionary has no valid entries")
    lex = build_lexicon(entries, schema)
    header = _header(schema.schema_id, {"cmd": "lexicon build", "dict": dict_path, "schema": schema.schema_id})
    lex.save(out, header=header)
    _announce(header)
    click.echo(f"{len(lex)} entries -> {out} ({len(diags)} rejected)", err=True)


@cli.command()
@click.option("--in", "in_path", type=click.Path(exists=True), required=True, help="Page PGM or a directory of pages.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("-o", "--out", type=click.Path(), required=True, help="Box TSV output.")
@click.option("--lines-out", type=click.Path(), default=None, help="Line report TSV (default: <out>.lines.tsv).")
@click.option("--crops", "crops_dir", type=click.Path(), default=None, help="Write 64x64 box crops here.")
@click.option("--jobs", type=int, default=1, show_default=True)
def segment(in_path, config_path, out, lines_out, crops_dir, jobs):
    """Segment ruled pages into reading-ordered character boxes."""
    cfg = SegConfig.from_file(config_path) if config_path else SegConfig()
    in_path = Path(in_path)
    pages = sorted(in_path.glob("*.pgm")) if in_path.is_dir() else [in_path]
    if not pages:
        raise ValidationError(f"no .pgm pages under {in_path}")
    params = {"cmd": "segment", "config": cfg.to_text(), "pages": [p.name for p in pages]}
    header = _header("-", params)
    _announce(header)

    def run(page_path):
        gray = read_pgm(page_path)
        return page_path.stem, gray, segment_page(gray, cfg)

    results = _pmap(run, pages, jobs)
    boxes_body, lines_body = [], []
    for page_id, gray, res in results:
        boxes_body.append(boxes_to_tsv(page_id, res.boxes))
        lines_body.append(lines_to_tsv(page_id, res.lines))
        click.echo(f"{page_id}: skew={res.skew:g} lines={len(res.lines)} boxes={len(res.boxes)}", err=True)
        if crops_dir:
            croot = Path(crops_dir)
            croot.mkdir(parents=True, exist_ok=True)
            for i, box in enumerate(res.boxes):
                crop = resize_nearest(crop_box(gray, box), GLYPH_SIZE, GLYPH_SIZE)
                write_pgm(croot / f"{page_id}_{i:04d}.pgm", crop)
    _write_text(out, header, "".join(boxes_body))
    _write_text(lines_out or f"{out}.lines.tsv", header, "".join(lines_body))


@cli.command()
@click.option("--samples", "samples_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--labels", "labels_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--schema", "schema_path", type=click.Path(), default=None)
@click.option("--dict", "dict_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Dictionary TSV for attribute targets (default: bundled).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--augment-corpus", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("-o", "--out", type=click.Path(), required=True, help="Model file output.")
@click.option("--figures/--no-figures", default=True, show_default=True)
def train(samples_dir, labels_path, schema_path, dict_path, config_path, augment_corpus, seed, out, figures):
    """Train the native classifier on a sample store."""
    from dataclasses import replace

    schema = _resolve_schema(schema_path)
    cfg = TrainConfig.from_file(config_path) if config_path else TrainConfig()
    if augment_corpus is not None:
        cfg = replace(cfg, augment_corpus=augment_corpus)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    dict_file = dict_path or str(Path(__file__).parent / "data" / "sample_dict.tsv")
    entries, diags = parse_dictionary_file(dict_file, schema)
    if not entries:
        raise ValidationError("dictionary has no valid entries")
    dictionary = {e.label: e for e in entries}
    samples = load_sample_store(samples_dir, labels_path, schema, dictionary)
    result = train_model(samples, cfg, schema, dictionary=dictionary)
    save_model(result.model, out)
    params = {"cmd": "train", "cfg": cfg, "samples": samples_dir}
    header = _header(schema.schema_id, params)
    _announce(header)
    if figures:
        from .report import save_loss_figure

        save_loss_figure(result.loss_trace, f"{out}.loss.png")
    click.echo(
        f"trained on {result.sample_count} samples, final loss {result.loss_trace[-1]:.4f}, "
        f"untrained symbols {result.untrained_symbols}", err=True)


@cli.command("predict")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--images", "images_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--schema", "schema_path", type=click.Path(), default=None)
@click.option("-o", "--out", type=click.Path(), required=True)
@click.option("--soft", is_flag=True, help="Write probability vectors instead of argmax indices.")
@click.option("--features-out", type=click.Path(), default=None, help="Also dump backbone features as TSV.")
def predict_cmd(model_path, images_dir, schema_path, out, soft, features_out):
    """Predict attribute sets for a directory of glyph images."""
    schema = _resolve_schema(schema_path)
    model = load_model(model_path)
    if model.schema_id != schema.schema_id:
        raise ValidationError(f"model schema {model.schema_id!r} does not match schema {schema.schema_id!r}")
    files = sorted(Path(images_dir).glob("*.pgm"))
    if not files:
        raise ValidationError(f"no .pgm images under {images_dir}")
    images = np.stack([resize_nearest(read_pgm(f), GLYPH_SIZE, GLYPH_SIZE) for f in files])
    ids = [f.stem for f in files]
    preds = predict_images(model, images, ids)
    params = {"cmd": "predict", "model": model_path, "images": ids, "soft": soft}
    header = _header(schema.schema_id, params)
    write_predictions(preds, out, schema, soft=soft, header=header)
    if features_out:
        from .classifier import extract_features_batch

        feats = extract_features_batch(images)
        body = "".join(f"{i}\t{','.join(f'{v:.6f}' for v in row)}\n" for i, row in zip(ids, feats))
        _write_text(features_out, header, body)
    _announce(header)
    click.echo(f"{len(preds)} predictions -> {out}", err=True)


@cli.command("recognize")
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--preds", "preds_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--schema", "schema_path", type=click.Path(), default=None)
@click.option("--groups", default=None, help="Comma list of attribute groups to match on (e.g. cj,zm).")
@click.option("--topk", type=int, default=1, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("-o", "--out", type=click.Path(), required=True)
def recognize_cmd(lexicon_path, preds_path, schema_path, groups, topk, jobs, out):
    """Match predictions against a lexicon by Hamming distance."""
    schema = _resolve_schema(schema_path)
    lex = Lexicon.load(lexicon_path)
    if lex.schema_id != schema.schema_id:
        raise ValidationError(f"lexicon schema {lex.schema_id!r} does not match schema {schema.schema_id!r}")
    preds = _strict_read_predictions(preds_path, schema)
    selected = resolve_groups(groups.split(","), schema) if groups else None
    target = project_subset(lex, selected, schema) if selected else lex
    params = {"cmd": "recognize", "lexicon": lexicon_path, "groups": groups, "topk": topk}
    header = _header(schema.schema_id, params)

    def run(pred):
        query = argmax_onehot(pred, schema)
        if selected:
            query = project_subset(query, selected, schema)
        return pred.image_id, match_one(query, target, k=topk)

    rows = []
    for image_id, cands in _pmap(run, preds, jobs):
        for rank, c in enumerate(cands, start=1):
            rows.append(f"{image_id}\t{rank}\t{c.label}\t{c.distance}")
    _write_text(out, header, "\n".join(rows) + "\n")
    _announce(header)
    click.echo(f"{len(preds)} queries -> {out}", err=True)


@cli.command("evaluate")
@click.option("--preds", "preds_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--truth", "truth_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--schema", "schema_path", type=click.Path(), default=None)
@click.option("--split", "split_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--split-out", type=click.Path(), default=None, help="Directory for partition id lists.")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("-o", "--out", type=click.Path(), required=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def evaluate_cmd(preds_path, lexicon_path, truth_path, schema_path, split_path, split_out, jobs, out, figures):
    """Score predictions: per-set accuracy plus the subset ablation table."""
    schema = _resolve_schema(schema_path)
    lex = Lexicon.load(lexicon_path)
    if lex.schema_id != schema.schema_id:
        raise ValidationError(f"lexicon schema {lex.schema_id!r} does not match schema {schema.schema_id!r}")
    preds = _strict_read_predictions(preds_path, schema)
    truth = _read_labels(truth_path)
    counts = {"preds": len(preds)}
    partitions = None
    if split_path:
        spec = SplitSpec.from_file(split_path)
        pairs = {p.image_id: truth[p.image_id] for p in preds if p.image_id in truth}
        split = frequency_split(pairs, spec)
        train_ids, lofreq_test = kshot_augment(split, pairs, spec.k, seed=spec.seed)
        partitions = {
            "hifreq_train": split.hifreq_train, "hifreq_test": split.hifreq_test,
            "train_kshot": train_ids, "lofreq_test": lofreq_test,
        }
        counts.update({name: len(ids) for name, ids in partitions.items()})
    rep = ablation_report(preds, lex, truth, schema, counts=counts)
    params = {"cmd": "evaluate", "lexicon": lexicon_path, "split": split_path}
    header = _header(schema.schema_id, params)
    _write_text(out, header, rep.to_tsv())
    if partitions and split_out:
        sdir = Path(split_out)
        sdir.mkdir(parents=True, exist_ok=True)
        for name, ids in partitions.items():
            _write_text(sdir / f"{name}.txt", header, "".join(f"{i}\n" for i in ids))
    if figures:
        from .report import save_ablation_figure, save_attribute_figure

        save_ablation_figure(rep, f"{out}.ablation.png")
        save_attribute_figure(rep, f"{out}.attrs.png")
    _announce(header)
    for name, dims, acc in rep.char_acc:
        click.echo(f"char_acc.{name} ({dims}d) = {acc:.4f}", err=True)


@cli.command("spot")
@click.option("--features", "features_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="TSV: image_id<TAB>comma-separated floats.")
@click.option("--labels", "labels_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("-o", "--out", type=click.Path(), required=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
def spot_cmd(features_path, labels_path, out, figures):
    """Word spotting: leave-one-out retrieval mAP over feature vectors."""
    features = {}
    with open(features_path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ValidationError(f"features line {lineno}: expected image_id<TAB>floats")
            features[fields[0]] = np.array([float(t) for t in fields[1].split(",")])
    labels = _read_labels(labels_path)
    result = word_spotting_map(features, labels)
    params = {"cmd": "spot", "features": features_path}
    header = _header("-", params)
    body = f"map\t{result.map:.6f}\nqueries\t{result.queries}\nskipped\t{result.skipped}\n"
    _write_text(out, header, body)
    if figures:
        from .report import save_ap_histogram

        save_ap_histogram(result.per_query, f"{out}.ap_hist.png")
    _announce(header)
    click.echo(f"mAP {result.map:.4f} over {result.queries} queries ({result.skipped} skipped)", err=True)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="hanzi-attr", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
