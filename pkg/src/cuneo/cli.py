"""Command-line entry point: one executable, seven subcommands.

``cuneo [--config cfg.json] [--seed N] [--out DIR] <command> ...``

Commands: ``dataset`` (build/split), ``train``, ``eval``, ``segment``,
``recognize``, ``translate``, ``gradcheck``.  Exit codes are a stable
contract: 0 success, 2 configuration or argument error, 3 I/O or file
format error, 4 training failure, 5 verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys


from . import dataset as ds
from .config import CONFIG_KEY_DOC, RunConfig, load_run_config, model_config_for, with_seed
from .errors import (
    CatalogError,
    ConfigError,
    FormatError,
    LexiconError,
    TrainingError,
    VerificationError,
)
from .imageio import gray_from_binary, load_grayscale, write_pgm, write_ppm
from .imaging import resize_to_width
from .lexicon import (
    load_ground_truth,
    load_lexicon,
    translate_page,
    translate_sequence,
    write_translation,
)
from .metrics import REPORT_CSV_HEADER, evaluate, report_csv_row, report_text
from .nn.model import init_params, predict
from .nn.serialize import load_model, save_model
from .nn.training import GRADCHECK_KINDS, gradient_check, train
from .segmentation import overlay_boxes, segment_page, write_manifest


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cuneo",
        description="Glyph recognition toolkit: dataset building, CNN training, "
        "page segmentation, recognition, and lexicon translation.",
        epilog="Config keys (JSON):\n" + CONFIG_KEY_DOC,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--config", metavar="PATH", help="JSON run configuration")
    p.add_argument("--seed", type=int, metavar="N", help="override every config seed")
    p.add_argument("--out", metavar="DIR", help="output directory (or .cune file for dataset)")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    d = sub.add_parser("dataset", help="build a dataset from a catalog, or re-split one",
                       description="build: catalog manifest (sign_name<TAB>image) -> dataset; "
                       "split: re-split an existing dataset with the config fractions. "
                       "Uses config keys: seed, dataset.*, augment.*, split.*")
    d.add_argument("action", choices=("build", "split"))
    d.add_argument("source", help="catalog manifest (build) or dataset path (split)")

    t = sub.add_parser("train", help="train the CNN on a dataset",
                       description="Trains on the train split with early stopping on the val "
                       "split; writes model.cnnm and trainlog.csv. Uses config keys: seed, "
                       "model.*, train.*")
    t.add_argument("dataset", help="dataset directory or .cune file")

    e = sub.add_parser("eval", help="evaluate a model on a dataset's test split",
                       description="Prints accuracy and macro precision/recall/F1; writes "
                       "metrics.csv. No config keys consumed beyond --seed plumbing.")
    e.add_argument("model", help="model file")
    e.add_argument("dataset", help="dataset directory or .cune file")

    s = sub.add_parser("segment", help="segment a page scan into glyphs",
                       description="Writes per-glyph PGMs, boxes.tsv, and overlay.ppm. "
                       "Uses config keys: segmentation.*, dataset.glyph_size")
    s.add_argument("scan", help="page image (PGM/PPM/PNG)")

    r = sub.add_parser("recognize", help="segment, classify, and translate a page",
                       description="Writes page_boxes.tsv, page_predictions.tsv, "
                       "page_translation.tsv, and with --truth the annotated page_report. "
                       "Uses config keys: segmentation.* (glyph size must match the model)")
    r.add_argument("model", help="model file")
    r.add_argument("lexicon", help="lexicon TSV")
    r.add_argument("scan", help="page image (PGM/PPM/PNG)")
    r.add_argument("--truth", metavar="PATH", help="ground-truth sign sequence file")

    tr = sub.add_parser("translate", help="translate a sign-name sequence",
                        description="Reads whitespace-separated sign names and prints the "
                        "greedy longest-match word assembly. No config keys consumed.")
    tr.add_argument("lexicon", help="lexicon TSV")
    tr.add_argument("signs", help="file of whitespace-separated sign names")

    g = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences",
                       description="Checks every layer kind on randomized instances; exit 5 "
                       "if any relative error exceeds 1e-4. Uses config keys: seed")
    g.add_argument("--instances", type=int, default=20, metavar="N",
                   help="random instances per layer kind (default 20)")
    g.add_argument("--fault", choices=GRADCHECK_KINDS, metavar="KIND",
                   help="deliberately corrupt one kind's analytic gradient (failure-path testing)")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse already printed help or usage
        return int(exc.code or 0)
    try:
        run_config = load_run_config(args.config)
        if args.seed is not None:
            run_config = with_seed(run_config, args.seed)
        return _dispatch(args, run_config)
    except (ConfigError, ValueError) as exc:
        print(f"cuneo: config error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, CatalogError, LexiconError, OSError) as exc:
        print(f"cuneo: i/o error: {exc}", file=sys.stderr)
        return 3
    except TrainingError as exc:
        print(f"cuneo: training error: {exc}", file=sys.stderr)
        return 4
    except VerificationError as exc:
        print(f"cuneo: verification failed: {exc}", file=sys.stderr)
        return 5


def entry() -> None:
    sys.exit(main())


def _dispatch(args, rc: RunConfig) -> int:
    handler = {
        "dataset": _cmd_dataset,
        "train": _cmd_train,
        "eval": _cmd_eval,
        "segment": _cmd_segment,
        "recognize": _cmd_recognize,
        "translate": _cmd_translate,
        "gradcheck": _cmd_gradcheck,
    }[args.command]
    return handler(args, rc)


def _cmd_dataset(args, rc: RunConfig) -> int:
    if args.action == "build":
        classes = ds.load_class_catalog(args.source)
        masters = ds.load_catalog_masters(classes)
        samples, names = ds.build_dataset(
            masters,
            glyph_size=rc.glyph_size,
            variants=rc.variants,
            augmentations=rc.augmentations,
            seed=rc.seed,
            augment_config=rc.augment,
        )
        split = ds.split_dataset(samples, rc.split, sign_names=names)
    else:
        loaded = ds.load_dataset(args.source)
        samples = loaded.all_samples()
        split = ds.split_dataset(samples, rc.split, sign_names=loaded.sign_names)
        names = split.sign_names or ()
    out = args.out or "dataset"
    ds.save_dataset(split, out)
    n_classes = len(names) if names else split.num_classes
    print(f"classes {n_classes}  samples {len(samples)}  split {split.sizes}  -> {out}")
    return 0


def _cmd_train(args, rc: RunConfig) -> int:
    split = ds.load_dataset(args.dataset)
    if not split.train or not split.val:
        raise TrainingError("dataset needs non-empty train and val splits")
    if split.sign_names is None:
        print("cuneo: note: dataset carries no sign names (packed .cune keeps "
              "class ids only), so the model will label classes class-NNN; "
              "build to a directory to keep names for recognize/translate",
              file=sys.stderr)
    side = split.glyph_size
    if side != rc.glyph_size:
        rc_note = f" (config glyph_size {rc.glyph_size} ignored; dataset is {side})"
    else:
        rc_note = ""
    model_config = model_config_for(
        _rc_with_side(rc, side), split.num_classes, split.sign_names
    )
    params = init_params(model_config)
    x_train, y_train = ds.to_arrays(split.train)
    x_val, y_val = ds.to_arrays(split.val)
    best, log = train(model_config, params, x_train, y_train, x_val, y_val, rc.train)
    out = args.out or "run"
    os.makedirs(out, exist_ok=True)
    model_path = os.path.join(out, "model.cnnm")
    save_model(model_path, model_config, best)
    log_path = os.path.join(out, "trainlog.csv")
    with open(log_path, "w", encoding="utf-8") as f:
        f.write("epoch,train_loss,val_loss,val_accuracy\n")
        for st in log.epochs:
            f.write(f"{st.epoch},{st.train_loss!r},{st.val_loss!r},{st.val_accuracy!r}\n")
    stopped = "early stop" if log.stopped_early else "full run"
    best_val = log.epochs[log.best_epoch - 1].val_loss
    print(f"epochs {len(log.epochs)} ({stopped})  best epoch {log.best_epoch}  "
          f"val loss {best_val:.6f}{rc_note}  -> {model_path}")
    return 0


def _rc_with_side(rc: RunConfig, side: int) -> RunConfig:
    if rc.glyph_size == side:
        return rc
    from dataclasses import replace

    return replace(rc, glyph_size=side, segmentation=replace(rc.segmentation, glyph_size=side))


def _cmd_eval(args, rc: RunConfig) -> int:
    model_config, params = load_model(args.model)
    split = ds.load_dataset(args.dataset)
    if not split.test:
        raise ConfigError("dataset has an empty test split")
    side = split.glyph_size
    if tuple(model_config.input_shape) != (1, side, side):
        raise ConfigError(
            f"model input {tuple(model_config.input_shape)} does not match dataset glyphs {side}x{side}"
        )
    x_test, y_test = ds.to_arrays(split.test)
    if int(y_test.max()) >= model_config.num_classes:
        raise ConfigError(
            f"dataset has class ids up to {int(y_test.max())} but model knows {model_config.num_classes}"
        )
    preds = predict(model_config, params, x_test)
    rep = evaluate(preds, y_test, model_config.num_classes)
    name = os.path.basename(os.fspath(args.model))
    print(report_text(rep, name=name))
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, "metrics.csv")
    with open(csv_path, "w", encoding="utf-8") as f:
        f.write(REPORT_CSV_HEADER + "\n" + report_csv_row(name, rep) + "\n")
    print(f"accuracy {rep.accuracy:.4f}  macro_p {rep.macro_precision:.4f}  "
          f"macro_r {rep.macro_recall:.4f}  macro_f1 {rep.macro_f1:.4f}  -> {csv_path}")
    return 0


def _cmd_segment(args, rc: RunConfig) -> int:
    gray = load_grayscale(args.scan)
    seg, glyphs = segment_page(gray, rc.segmentation)
    out = args.out or "segments"
    os.makedirs(out, exist_ok=True)
    glyph_paths = []
    for i, glyph in enumerate(glyphs):
        rel = f"glyph_{i:04d}.pgm"
        write_pgm(os.path.join(out, rel), gray_from_binary(glyph))
        glyph_paths.append(rel)
    write_manifest(os.path.join(out, "boxes.tsv"), seg, glyph_paths)
    resized = resize_to_width(gray, rc.segmentation.target_width)
    write_ppm(os.path.join(out, "overlay.ppm"), overlay_boxes(resized, seg.boxes))
    print(f"{len(seg.boxes)} glyphs in {seg.num_lines} lines  -> {out}")
    return 0


def _cmd_recognize(args, rc: RunConfig) -> int:
    model_config, params = load_model(args.model)
    lexicon = load_lexicon(args.lexicon)
    gray = load_grayscale(args.scan)
    truth = load_ground_truth(args.truth) if args.truth else None
    out = args.out or "recognized"
    result = translate_page(
        gray, model_config, params, lexicon, rc.segmentation,
        out_dir=out, truth=truth, stem="page",
    )
    words = " ".join(w.english or w.akkadian or "?" for w in result.translation.words)
    print(f"{len(result.predicted)} glyphs, {len(result.translation.words)} words"
          + (f": {words}" if words else ""))
    if result.report is not None:
        print(f"relative accuracy {result.report.relative_accuracy:.4f}  "
              f"({result.report.green_count}/{len(result.report.rows)} correct)  "
              f"overlay {result.report.overlay_path}")
    return 0


def _cmd_translate(args, rc: RunConfig) -> int:
    lexicon = load_lexicon(args.lexicon)
    signs = load_ground_truth(args.signs)
    result = translate_sequence(signs, lexicon)
    for w in result.words:
        print(f"{w.akkadian}\t{w.english}\t{','.join(w.signs)}")
    for pos, sign in result.unmatched:
        print(f"?\t?\t{sign}  (position {pos}, not in lexicon)")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_translation(result, os.path.join(args.out, "translation.tsv"))
    return 0


def _cmd_gradcheck(args, rc: RunConfig) -> int:
    report = gradient_check(seed=rc.seed, instances_per_kind=args.instances, fault=args.fault)
    for entry_ in report.entries:
        status = "ok" if entry_.max_rel_err <= report.threshold else "FAIL"
        print(f"{entry_.kind:13s} instances {entry_.instances:3d}  "
              f"max rel err {entry_.max_rel_err:.3e}  {status}")
    print(f"overall max rel err {report.max_rel_err:.3e} (threshold {report.threshold:.0e})")
    if not report.passed:
        raise VerificationError(
            f"max relative error {report.max_rel_err:.3e} exceeds {report.threshold:.0e}"
        )
    return 0
