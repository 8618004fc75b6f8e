"""Command line entry points.

    trainer-dl train   --images DIR --labels F --dictionary F --manifest F
                       --checkpoint OUT --predictions OUT [--test-list F] ...
    trainer-dl predict --checkpoint F --manifest F --images DIR --list F --out F

``train`` fits the network and writes both a checkpoint and an interchange
prediction file for the designated test list (default: every training image,
in labels-file order).  ``predict`` re-emits predictions from a checkpoint.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .formats import (
    FormatError,
    load_dictionary_targets,
    load_manifest,
    load_samples,
    read_image_list,
    read_pgm,
)
from .train import (
    DeepConfig,
    TrainerError,
    emit_predictions,
    load_checkpoint,
    save_checkpoint,
    train_deep,
)


def _parse_blocks(text: str) -> tuple:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad block counts {text!r}, expected e.g. 1,1,1,1") from None


def _config_from(args) -> DeepConfig:
    return DeepConfig(
        blocks_per_stage=args.blocks,
        base_maps=args.base_maps,
        initial_lr=args.lr,
        lr_halving_interval=args.halving_interval,
        batch_size=args.batch_size,
        iterations=args.iterations,
        seed=args.seed,
    )


def _images_for(ids, images_dir, by_id=None):
    images = []
    for image_id in ids:
        if by_id is not None and image_id in by_id:
            images.append(by_id[image_id])
        else:
            images.append(read_pgm(Path(images_dir) / f"{image_id}.pgm"))
    return images


def _cmd_train(args) -> None:
    manifest = load_manifest(args.manifest)
    targets = load_dictionary_targets(args.dictionary, manifest)
    samples = load_samples(args.images, args.labels, targets)
    cfg = _config_from(args)
    result = train_deep(samples, manifest, cfg)

    if args.test_list:
        ids = read_image_list(args.test_list)
    else:
        ids = [s.image_id for s in samples]
    by_id = {s.image_id: s.image for s in samples}
    images = _images_for(ids, args.images, by_id)

    save_checkpoint(args.checkpoint, result, manifest)
    emit_predictions(result.model, ids, images, manifest, args.predictions,
                     hard=args.hard, header=f"trainer-dl 0.1.0 schema={manifest.schema_id}")
    print(f"train: {result.sample_count} samples, {cfg.iterations} iterations, "
          f"final loss {result.loss_trace[-1]:.4f}, {len(ids)} predictions", file=sys.stderr)


def _cmd_predict(args) -> None:
    manifest = load_manifest(args.manifest)
    model = load_checkpoint(args.checkpoint, manifest)
    ids = read_image_list(args.list)
    images = _images_for(ids, args.images)
    emit_predictions(model, ids, images, manifest, args.out,
                     hard=args.hard, header=f"trainer-dl 0.1.0 schema={manifest.schema_id}")
    print(f"predict: {len(ids)} predictions", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trainer-dl",
                                     description="Residual-network trainer for attribute classification")
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train on a sample store and emit predictions")
    tr.add_argument("--images", required=True, help="sample store directory of <id>.pgm files")
    tr.add_argument("--labels", required=True, help="labels.tsv (image_id<TAB>codepoint)")
    tr.add_argument("--dictionary", required=True, help="attribute dictionary TSV")
    tr.add_argument("--manifest", required=True, help="attribute schema manifest")
    tr.add_argument("--checkpoint", required=True, help="output checkpoint path")
    tr.add_argument("--predictions", required=True, help="output interchange prediction file")
    tr.add_argument("--test-list", default=None, help="file of image ids to predict (default: all)")
    tr.add_argument("--hard", action="store_true", help="emit argmax indexes instead of probabilities")
    tr.add_argument("--iterations", type=int, default=2_000)
    tr.add_argument("--batch-size", type=int, default=200)
    tr.add_argument("--lr", type=float, default=1e-4)
    tr.add_argument("--halving-interval", type=int, default=10_000)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--blocks", type=_parse_blocks, default=(1, 1, 1, 1),
                    help="residual blocks per stage, e.g. 1,1,1,1")
    tr.add_argument("--base-maps", type=int, default=16)
    tr.set_defaults(func=_cmd_train)

    pr = sub.add_parser("predict", help="emit predictions from a checkpoint")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--manifest", required=True)
    pr.add_argument("--images", required=True)
    pr.add_argument("--list", required=True, help="file of image ids to predict")
    pr.add_argument("--out", required=True)
    pr.add_argument("--hard", action="store_true")
    pr.set_defaults(func=_cmd_predict)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (FormatError, TrainerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
