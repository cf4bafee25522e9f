"""Sign-sequence lexicon: lookup, word assembly, and page-level reporting.

A lexicon maps sequences of sign names to an Akkadian transliteration,
an English gloss, and optional Arabic transliteration/meaning fields.
Word assembly is greedy left-to-right longest match — deterministic and
easy to reason about; signs that start no entry pass through unmatched,
so the output always reconstructs the input.

Relative accuracy is positional: matching positions over the longer
sequence's length.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, LexiconError
from .imageio import write_ppm
from .segmentation import PageSegmentation, SegmentationParams, overlay_boxes, segment_page

GREEN = (0, 170, 0)
RED = (204, 0, 0)


@dataclass(frozen=True)
class LexiconEntry:
    sign_sequence: tuple[str, ...]
    akkadian: str
    english: str
    arabic_translit: str = ""
    arabic: str = ""

    def __post_init__(self):
        if not self.sign_sequence:
            raise LexiconError("entry has an empty sign sequence")


class Lexicon:
    """Immutable set of entries indexed for longest-match lookup."""

    def __init__(self, entries: list[LexiconEntry] | tuple[LexiconEntry, ...]):
        self.entries: tuple[LexiconEntry, ...] = tuple(entries)
        self._index: dict[tuple[str, ...], LexiconEntry] = {}
        for e in self.entries:
            if e.sign_sequence in self._index:
                raise LexiconError(f"duplicate sign sequence {','.join(e.sign_sequence)}")
            self._index[e.sign_sequence] = e
        self.max_sequence_len = max((len(e.sign_sequence) for e in self.entries), default=0)

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, signs: tuple[str, ...]) -> LexiconEntry | None:
        return self._index.get(tuple(signs))


def load_lexicon(path: str | os.PathLike, catalog_signs=None) -> Lexicon:
    """Read a UTF-8 TSV lexicon.

    Columns: ``signs`` (comma-joined sign names), ``akkadian``,
    ``english``, then optional ``arabic_translit`` and ``arabic``.
    ``#`` lines are comments.  When ``catalog_signs`` is given, every
    referenced sign must be in it.
    """
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = f.readlines()
    except OSError as exc:
        raise LexiconError(f"cannot read lexicon {path}: {exc}") from exc
    known = set(catalog_signs) if catalog_signs is not None else None
    entries: list[LexiconEntry] = []
    seen: dict[tuple[str, ...], int] = {}
    for lineno, line in enumerate(raw, start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if not 3 <= len(parts) <= 5:
            raise LexiconError(f"{path}:{lineno}: expected 3-5 tab-separated fields, got {len(parts)}")
        signs = tuple(s.strip() for s in parts[0].split(",") if s.strip())
        if not signs:
            raise LexiconError(f"{path}:{lineno}: empty sign sequence")
        if signs in seen:
            raise LexiconError(
                f"{path}:{lineno}: duplicate sign sequence {parts[0]!r} (first at line {seen[signs]})"
            )
        seen[signs] = lineno
        if known is not None:
            missing = [s for s in signs if s not in known]
            if missing:
                raise LexiconError(f"{path}:{lineno}: unknown sign name(s) {', '.join(missing)}")
        fields = list(parts[1:]) + [""] * (5 - len(parts))
        entries.append(LexiconEntry(signs, fields[0], fields[1], fields[2], fields[3]))
    return Lexicon(entries)


def save_lexicon(lexicon: Lexicon, path: str | os.PathLike) -> None:
    """Write the TSV form; load → save → load is a fixed point."""
    with open(path, "w", encoding="utf-8") as f:
        for e in lexicon.entries:
            f.write("\t".join([",".join(e.sign_sequence), e.akkadian, e.english,
                               e.arabic_translit, e.arabic]) + "\n")


# ---------------------------------------------------------------------------
# translation

@dataclass(frozen=True)
class TranslatedWord:
    position: int  # index of the word's first sign in the input sequence
    signs: tuple[str, ...]
    akkadian: str
    english: str


@dataclass(frozen=True)
class TranslationResult:
    words: tuple[TranslatedWord, ...]
    unmatched: tuple[tuple[int, str], ...]  # (position, sign_name)

    def reconstruct(self) -> tuple[str, ...]:
        """The input sequence, reassembled from words and unmatched signs."""
        placed: list[tuple[int, tuple[str, ...]]] = [(w.position, w.signs) for w in self.words]
        placed += [(pos, (sign,)) for pos, sign in self.unmatched]
        out: list[str] = []
        for _, signs in sorted(placed):
            out.extend(signs)
        return tuple(out)

    @property
    def english_glosses(self) -> tuple[str, ...]:
        return tuple(w.english for w in self.words)


def translate_sequence(signs, lexicon: Lexicon) -> TranslationResult:
    """Greedy left-to-right longest-match word assembly."""
    seq = tuple(signs)
    words: list[TranslatedWord] = []
    unmatched: list[tuple[int, str]] = []
    i = 0
    n = len(seq)
    while i < n:
        entry = None
        for length in range(min(lexicon.max_sequence_len, n - i), 0, -1):
            entry = lexicon.lookup(seq[i : i + length])
            if entry is not None:
                break
        if entry is None:
            unmatched.append((i, seq[i]))
            i += 1
        else:
            words.append(TranslatedWord(i, entry.sign_sequence, entry.akkadian, entry.english))
            i += len(entry.sign_sequence)
    return TranslationResult(words=tuple(words), unmatched=tuple(unmatched))


def load_ground_truth(path: str | os.PathLike, catalog_signs=None) -> tuple[str, ...]:
    """Read whitespace-separated sign names (``#`` comments allowed)."""
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = f.readlines()
    except OSError as exc:
        raise LexiconError(f"cannot read ground truth {path}: {exc}") from exc
    signs: list[str] = []
    for line in raw:
        body = line.split("#", 1)[0]
        signs.extend(body.split())
    if catalog_signs is not None:
        known = set(catalog_signs)
        missing = sorted({s for s in signs if s not in known})
        if missing:
            raise LexiconError(f"{path}: sign name(s) not in catalog: {', '.join(missing)}")
    return tuple(signs)


def relative_accuracy(predicted, truth) -> float:
    """Matching positions over the longer length; length mismatches count
    as errors for the overhanging positions."""
    pred = tuple(predicted)
    true = tuple(truth)
    if not pred and not true:
        raise ValueError("relative accuracy is undefined for two empty sequences")
    matches = sum(1 for p, t in zip(pred, true) if p == t)
    return matches / max(len(pred), len(true))


# ---------------------------------------------------------------------------
# page report

@dataclass(frozen=True)
class GlyphRow:
    line_index: int
    column_index: int
    predicted: str
    truth: str
    probability: float
    correct: bool


@dataclass(frozen=True)
class PageReport:
    rows: tuple[GlyphRow, ...]
    green_count: int
    relative_accuracy: float
    report_path: str
    overlay_path: str


def _ascii_label(s: str) -> str:
    return "".join(ch if ord(ch) < 128 else "?" for ch in s)


def _draw_labels(rgb: np.ndarray, page: PageSegmentation, rows) -> np.ndarray:
    from PIL import Image, ImageDraw, ImageFont

    img = Image.fromarray(rgb)
    draw = ImageDraw.Draw(img)
    font = ImageFont.load_default()
    h = rgb.shape[0]
    for box, row in zip(page.boxes, rows):
        x0, y0, x1, y1 = box.bbox
        color = GREEN if row.correct else RED
        draw.text((x0, max(0, y0 - 12)), _ascii_label(row.predicted), fill=color, font=font)
        draw.text((x0, min(h - 12, y1 + 2)), _ascii_label(row.truth), fill=(40, 40, 40), font=font)
    return np.asarray(img)


def render_report(
    page: PageSegmentation,
    predicted,
    probabilities,
    truth,
    scan_gray: np.ndarray,
    out_dir: str | os.PathLike,
    stem: str = "recognition",
) -> PageReport:
    """Write the per-glyph comparison TSV and the green/red overlay PPM.

    ``scan_gray`` must be the resized page the segmentation ran on (its
    geometry matches the boxes).  Returns row data plus the green-box
    count and positional relative accuracy.
    """
    predicted = tuple(predicted)
    probabilities = tuple(float(p) for p in probabilities)
    truth = tuple(truth)
    n = len(page.boxes)
    if len(predicted) != n or len(probabilities) != n:
        raise ValueError(f"{len(predicted)} predictions / {len(probabilities)} probabilities for {n} boxes")
    if len(truth) != n:
        raise ValueError(f"ground truth has {len(truth)} signs for {n} boxes")
    if scan_gray.shape[::-1] != page.source_size:
        raise ValueError(
            f"scan size {scan_gray.shape[::-1]} does not match segmentation geometry {page.source_size}"
        )
    rows = tuple(
        GlyphRow(
            line_index=box.line_index,
            column_index=box.column_index,
            predicted=p,
            truth=t,
            probability=prob,
            correct=p == t,
        )
        for box, p, t, prob in zip(page.boxes, predicted, truth, probabilities)
    )
    green = sum(1 for r in rows if r.correct)
    rel_acc = relative_accuracy(predicted, truth) if n else 0.0

    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(os.fspath(out_dir), f"{stem}.tsv")
    overlay_path = os.path.join(os.fspath(out_dir), f"{stem}.ppm")
    with open(report_path, "w", encoding="utf-8") as f:
        f.write("line\tcolumn\tpredicted\ttruth\tprobability\tcorrect\n")
        for r in rows:
            f.write(f"{r.line_index}\t{r.column_index}\t{r.predicted}\t{r.truth}"
                    f"\t{r.probability:.6f}\t{int(r.correct)}\n")
        f.write(f"# relative_accuracy\t{rel_acc:.6f}\n")

    colors = [GREEN if r.correct else RED for r in rows]
    rgb = overlay_boxes(scan_gray, page.boxes, colors)
    if rows:
        rgb = _draw_labels(rgb, page, rows)
    write_ppm(overlay_path, rgb)
    return PageReport(rows=rows, green_count=green, relative_accuracy=rel_acc,
                      report_path=report_path, overlay_path=overlay_path)


# ---------------------------------------------------------------------------
# end-to-end page recognition

@dataclass
class PageRecognition:
    segmentation: PageSegmentation
    resized_page: np.ndarray  # grayscale page the boxes refer to
    predicted: tuple[str, ...]
    probabilities: tuple[float, ...]
    translation: TranslationResult
    report: PageReport | None = None


def class_sign_names(model_config) -> tuple[str, ...]:
    names = model_config.class_names
    if names is not None:
        return tuple(names)
    return tuple(f"class-{c:03d}" for c in range(model_config.num_classes))


def translate_page(
    scan_gray: np.ndarray,
    model_config,
    model_params,
    lexicon: Lexicon,
    seg_params: SegmentationParams | None = None,
    out_dir: str | os.PathLike | None = None,
    truth=None,
    stem: str = "page",
) -> PageRecognition:
    """Segment a page, classify every glyph, and assemble words.

    With ``out_dir`` set, writes the segmentation manifest, a per-glyph
    prediction TSV, and the translation; with ``truth`` as well, the
    annotated comparison report.  The model's input side must equal the
    segmentation glyph size.
    """
    from .nn.model import predict_probs
    from .segmentation import write_manifest

    if seg_params is None:
        seg_params = SegmentationParams()
    side = model_config.input_shape[1]
    if (model_config.input_shape[0], side) != (1, seg_params.glyph_size) or \
            model_config.input_shape[2] != side:
        raise ConfigError(
            f"model input {model_config.input_shape} does not match "
            f"segmentation glyph_size {seg_params.glyph_size}"
        )
    page, glyphs = segment_page(scan_gray, seg_params)
    names = class_sign_names(model_config)
    if glyphs:
        probs = predict_probs(model_config, model_params, np.stack(glyphs))
        ids = np.argmax(probs, axis=1)
        predicted = tuple(names[int(i)] for i in ids)
        probabilities = tuple(float(probs[i, ids[i]]) for i in range(len(ids)))
    else:
        predicted = ()
        probabilities = ()
    translation = translate_sequence(predicted, lexicon)
    result = PageRecognition(
        segmentation=page,
        resized_page=_resized_gray(scan_gray, seg_params),
        predicted=predicted,
        probabilities=probabilities,
        translation=translation,
    )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_manifest(os.path.join(os.fspath(out_dir), f"{stem}_boxes.tsv"), page)
        with open(os.path.join(os.fspath(out_dir), f"{stem}_predictions.tsv"), "w", encoding="utf-8") as f:
            f.write("line\tcolumn\tsign\tprobability\n")
            for box, sign, prob in zip(page.boxes, predicted, probabilities):
                f.write(f"{box.line_index}\t{box.column_index}\t{sign}\t{prob:.6f}\n")
        write_translation(translation, os.path.join(os.fspath(out_dir), f"{stem}_translation.tsv"))
        if truth is not None:
            result.report = render_report(
                page, predicted, probabilities, truth, result.resized_page, out_dir,
                stem=f"{stem}_report",
            )
    return result


def _resized_gray(scan_gray: np.ndarray, seg_params: SegmentationParams) -> np.ndarray:
    from .imaging import resize_to_width

    return resize_to_width(scan_gray, seg_params.target_width)


def write_translation(result: TranslationResult, path: str | os.PathLike) -> None:
    """TSV: one row per word (akkadian, english, signs), then unmatched signs."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("kind\takkadian\tenglish\tsigns\tposition\n")
        for w in result.words:
            f.write(f"word\t{w.akkadian}\t{w.english}\t{','.join(w.signs)}\t{w.position}\n")
        for pos, sign in result.unmatched:
            f.write(f"unmatched\t\t\t{sign}\t{pos}\n")
