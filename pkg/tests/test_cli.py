import json

import pytest

from cuneo import synthetic
from cuneo.cli import main
from cuneo.imageio import gray_from_binary, write_pgm


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Catalog manifest, page scan, lexicon, and truth file for CLI runs."""
    root = tmp_path_factory.mktemp("cli")
    classes = synthetic.wedge_glyph_catalog(4, side=48, seed=21)
    rows = []
    for c in classes:
        write_pgm(root / f"{c.sign_name}.pgm", gray_from_binary(c.master))
        rows.append(f"{c.sign_name}\t{c.sign_name}.pgm")
    (root / "catalog.tsv").write_text("\n".join(rows) + "\n")

    masters = [c.master for c in classes]
    layout = [[0, 1, 2, 3], [3, 2, 1, 0]]
    page, records = synthetic.stamp_page(masters, layout, stamp_size=48)
    write_pgm(root / "page.pgm", page)
    names = [c.sign_name for c in classes]
    (root / "truth.txt").write_text(" ".join(names[r.class_id] for r in records) + "\n")
    (root / "lexicon.tsv").write_text(
        f"{names[0]}\tawilum\tman\n{names[1]},{names[2]}\tsarrum\tking\n"
    )
    cfg = {
        "dataset": {"glyph_size": 32, "variants": 4, "augmentations": 2},
        "segmentation": {"target_width": page.shape[1], "min_component_pixels": 8},
        "train": {"max_epochs": 4, "patience": 4, "batch_size": 16},
    }
    (root / "run.json").write_text(json.dumps(cfg))
    code = main(["--config", str(root / "run.json"), "--out", str(root / "ds.cune"),
                 "dataset", "build", str(root / "catalog.tsv")])
    assert code == 0
    return root


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


# ---------------------------------------------------------------------------
# dataset

def test_dataset_build(workdir, capsys, tmp_path):
    out = tmp_path / "ds.cune"
    code, stdout, _ = _run(capsys, "--config", workdir / "run.json",
                           "--out", out, "dataset", "build", workdir / "catalog.tsv")
    assert code == 0
    assert out.is_file()
    assert "classes 4" in stdout and "samples 48" in stdout  # 4 * 4 variants * (1 base + 2 aug)


def test_dataset_build_is_byte_reproducible(workdir, capsys, tmp_path):
    a, b = tmp_path / "a.cune", tmp_path / "b.cune"
    for out in (a, b):
        code, _, _ = _run(capsys, "--config", workdir / "run.json",
                          "--out", out, "dataset", "build", workdir / "catalog.tsv")
        assert code == 0
    assert a.read_bytes() == b.read_bytes()


def test_dataset_resplit(workdir, capsys, tmp_path):
    src = workdir / "ds.cune"
    out = tmp_path / "re.cune"
    code, stdout, _ = _run(capsys, "--seed", 9, "--out", out, "dataset", "split", src)
    assert code == 0 and out.is_file()


def test_dataset_build_missing_catalog(workdir, capsys, tmp_path):
    code, _, err = _run(capsys, "--out", tmp_path / "x.cune",
                        "dataset", "build", workdir / "nope.tsv")
    assert code == 3
    assert "cuneo:" in err


def test_unknown_config_key(workdir, capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dataset": {"glyph_sz": 32}}')
    code, _, err = _run(capsys, "--config", bad, "--out", tmp_path / "x.cune",
                        "dataset", "build", workdir / "catalog.tsv")
    assert code == 2
    assert "glyph_sz" in err


# ---------------------------------------------------------------------------
# train / eval

@pytest.fixture(scope="module")
def trained(workdir, tmp_path_factory):
    out = tmp_path_factory.mktemp("trained")
    code = main(["--config", str(workdir / "run.json"), "--out", str(out),
                 "train", str(workdir / "ds.cune")])
    assert code == 0
    return out


def test_train_writes_artifacts(trained):
    assert (trained / "model.cnnm").is_file()
    log = (trained / "trainlog.csv").read_text().splitlines()
    assert log[0] == "epoch,train_loss,val_loss,val_accuracy"
    assert len(log) >= 2
    first = log[1].split(",")
    assert first[0] == "1" and float(first[1]) > 0


def test_train_notes_missing_sign_names(workdir, capsys, tmp_path):
    # packed .cune drops sign names, the directory format keeps them
    cfg = tmp_path / "one.json"
    cfg.write_text('{"dataset": {"glyph_size": 32, "variants": 4, "augmentations": 2},'
                   ' "train": {"max_epochs": 1}}')
    code, _, err = _run(capsys, "--config", cfg, "--out", tmp_path / "packed",
                        "train", workdir / "ds.cune")
    assert code == 0
    assert "no sign names" in err
    code, _, _ = _run(capsys, "--config", cfg, "--out", tmp_path / "dsdir",
                      "dataset", "build", workdir / "catalog.tsv")
    assert code == 0
    code, _, err = _run(capsys, "--config", cfg, "--out", tmp_path / "named",
                        "train", tmp_path / "dsdir")
    assert code == 0
    assert "sign names" not in err


def test_eval_reports_metrics(workdir, trained, capsys, tmp_path):
    code, stdout, _ = _run(capsys, "--config", workdir / "run.json", "--out", tmp_path,
                           "eval", trained / "model.cnnm", workdir / "ds.cune")
    assert code == 0
    assert "accuracy" in stdout and "macro f1" in stdout
    csv = (tmp_path / "metrics.csv").read_text().splitlines()
    assert csv[0] == "model,accuracy,macro_precision,macro_recall,macro_f1"
    assert len(csv) == 2


def test_eval_glyph_size_mismatch(workdir, trained, capsys, tmp_path):
    # dataset built at 16 px but the model expects 32 px
    other = tmp_path / "small.cune"
    cfg = tmp_path / "small.json"
    cfg.write_text('{"dataset": {"glyph_size": 16, "variants": 4, "augmentations": 2}}')
    code, _, _ = _run(capsys, "--config", cfg, "--out", other,
                      "dataset", "build", workdir / "catalog.tsv")
    assert code == 0
    code, _, err = _run(capsys, "eval", trained / "model.cnnm", other)
    assert code == 2
    assert "16" in err and "32" in err


def test_eval_rejects_non_model_file(workdir, trained, capsys):
    code, _, err = _run(capsys, "eval", workdir / "lexicon.tsv", workdir / "ds.cune")
    assert code == 3
    assert "model" in err


# ---------------------------------------------------------------------------
# segment / recognize / translate

def test_segment_writes_boxes_and_glyphs(workdir, capsys, tmp_path):
    code, stdout, _ = _run(capsys, "--config", workdir / "run.json", "--out", tmp_path,
                           "segment", workdir / "page.pgm")
    assert code == 0
    boxes = (tmp_path / "boxes.tsv").read_text().splitlines()
    assert len(boxes) == 1 + 8  # header + 2 lines x 4 glyphs
    assert (tmp_path / "overlay.ppm").is_file()
    glyphs = sorted(tmp_path.glob("glyph_*.pgm"))
    assert len(glyphs) == 8


def test_recognize_full_pipeline(workdir, trained, capsys, tmp_path):
    code, stdout, _ = _run(capsys, "--config", workdir / "run.json", "--out", tmp_path,
                           "recognize", trained / "model.cnnm", workdir / "lexicon.tsv",
                           workdir / "page.pgm", "--truth", workdir / "truth.txt")
    assert code == 0
    assert "8 glyphs" in stdout
    assert "relative accuracy" in stdout
    for name in ("page_boxes.tsv", "page_predictions.tsv", "page_translation.tsv",
                 "page_report.tsv", "page_report.ppm"):
        assert (tmp_path / name).is_file(), name


def test_recognize_missing_lexicon(workdir, trained, capsys, tmp_path):
    code, _, err = _run(capsys, "--out", tmp_path, "recognize", trained / "model.cnnm",
                        workdir / "no-such.tsv", workdir / "page.pgm")
    assert code == 3


def test_translate_prints_words(workdir, capsys, tmp_path):
    names = [r.split("\t")[0] for r in (workdir / "catalog.tsv").read_text().splitlines()]
    seq = tmp_path / "seq.txt"
    seq.write_text(f"{names[0]} {names[1]} {names[2]} {names[3]}\n")
    code, stdout, _ = _run(capsys, "translate", workdir / "lexicon.tsv", seq)
    assert code == 0
    assert "man" in stdout and "king" in stdout
    assert "not in lexicon" in stdout  # names[3] has no entry


def test_translate_writes_tsv(workdir, capsys, tmp_path):
    names = [r.split("\t")[0] for r in (workdir / "catalog.tsv").read_text().splitlines()]
    seq = tmp_path / "seq.txt"
    seq.write_text(f"{names[0]}\n")
    code, _, _ = _run(capsys, "--out", tmp_path, "translate", workdir / "lexicon.tsv", seq)
    assert code == 0
    text = (tmp_path / "translation.tsv").read_text()
    assert "awilum" in text and "man" in text


# ---------------------------------------------------------------------------
# gradcheck + argparse behaviour

def test_gradcheck_passes(capsys):
    code, stdout, _ = _run(capsys, "gradcheck", "--instances", 2)
    assert code == 0
    for kind in ("conv", "pool", "relu", "flatten", "dense", "softmax"):
        assert kind in stdout
    assert "ok" in stdout and "threshold" in stdout


def test_gradcheck_fault_detected(capsys):
    code, stdout, err = _run(capsys, "gradcheck", "--instances", 2, "--fault", "dense")
    assert code == 5


def test_help_exits_zero(capsys):
    for argv in (["--help"], ["dataset", "--help"], ["train", "--help"],
                 ["eval", "--help"], ["segment", "--help"], ["recognize", "--help"],
                 ["translate", "--help"], ["gradcheck", "--help"]):
        assert main(argv) == 0
        out = capsys.readouterr().out
        assert "usage" in out


def test_no_subcommand_is_usage_error(capsys):
    code = main([])
    capsys.readouterr()
    assert code == 2


def test_unknown_flag_is_usage_error(capsys):
    code = main(["gradcheck", "--bogus"])
    capsys.readouterr()
    assert code == 2
