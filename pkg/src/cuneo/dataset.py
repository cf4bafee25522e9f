"""Glyph dataset construction, augmentation, splitting, and serialization.

Per class the builder emits a fixed number of base representations (the
normalized master plus graded reprocessings) and a fixed number of seeded
augmentations of each base; with the defaults of 10 bases and 5
augmentations, 235 classes yield 14,100 samples.  Splitting is stratified
per class with largest-remainder rounding, reconciled so the global totals
hit the configured fractions exactly (14,100 samples at 0.36/0.24/0.40
give 5,076 / 3,384 / 5,640).

All generation is a pure function of inputs and seeds.  Randomness is
drawn from per-class streams keyed as ``default_rng([seed, class_id, ...])``
so parallel and serial builds agree.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CatalogError, ConfigError, FormatError
from .imageio import binary_from_gray, gray_from_binary, load_grayscale, write_pgm
from .imaging import (
    StructuringElement,
    connected_components,
    content_bbox,
    dilate,
    otsu_threshold,
    require_binary,
)
from .segmentation import fit_to_square

SPLIT_NAMES = ("train", "val", "test")

_PACKED_MAGIC = b"CUNE"
_PACKED_VERSION = 1


@dataclass(frozen=True)
class GlyphClass:
    """One catalog entry: a sign name and the path of its master image."""

    class_id: int
    sign_name: str
    source_path: str


@dataclass(frozen=True)
class Sample:
    """A labeled glyph image.

    ``variant_id`` indexes the base representation (0..variants-1) and
    ``augment_id`` the augmentation (0 = the unaugmented base itself).
    """

    image: np.ndarray  # bool (side, side)
    class_id: int
    variant_id: int
    augment_id: int

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.class_id, self.variant_id, self.augment_id)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.36
    val_fraction: float = 0.24
    test_fraction: float = 0.40
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(not 0.0 < f < 1.0 for f in fracs):
            raise ConfigError(f"split fractions must be in (0, 1), got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {sum(fracs)!r}")


@dataclass
class DatasetSplit:
    train: list[Sample]
    val: list[Sample]
    test: list[Sample]
    sign_names: tuple[str, ...] | None = None

    @property
    def sizes(self) -> tuple[int, int, int]:
        return (len(self.train), len(self.val), len(self.test))

    def all_samples(self) -> list[Sample]:
        return self.train + self.val + self.test

    @property
    def num_classes(self) -> int:
        return 1 + max(s.class_id for s in self.all_samples())

    @property
    def glyph_size(self) -> int:
        return self.all_samples()[0].image.shape[0]


@dataclass(frozen=True)
class AugmentationConfig:
    rotation_max: float = 10.0  # degrees
    translate_max: float = 0.05  # fraction of side
    scale_range: tuple[float, float] = (0.9, 1.1)
    noise_flip_prob: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rotation_max < 180.0:
            raise ConfigError("rotation_max must be in [0, 180)")
        if self.translate_max < 0:
            raise ConfigError("translate_max must be >= 0")
        smin, smax = self.scale_range
        if not 0 < smin <= smax:
            raise ConfigError("scale_range must satisfy 0 < min <= max")
        if not 0.0 <= self.noise_flip_prob < 0.5:
            raise ConfigError("noise_flip_prob must be in [0, 0.5)")


def load_master(path: str | os.PathLike) -> np.ndarray:
    """Load and binarize a master glyph image (ink assumed dark)."""
    gray = load_grayscale(path)
    binary, _ = otsu_threshold(gray, "ink_is_dark")
    return binary


def load_class_catalog(manifest: str | os.PathLike) -> list[GlyphClass]:
    """Read a class catalog: one TSV record per class, ``sign_name<TAB>path``.

    Image paths are resolved relative to the manifest's directory.  Class
    ids are assigned contiguously in manifest order.
    """
    manifest = os.fspath(manifest)
    try:
        with open(manifest, "r", encoding="utf-8") as f:
            raw_lines = f.readlines()
    except OSError as exc:
        raise CatalogError(f"cannot read catalog manifest {manifest}: {exc}") from exc
    base_dir = os.path.dirname(os.path.abspath(manifest))
    classes: list[GlyphClass] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(raw_lines, start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip():
            raise CatalogError(f"{manifest}:{lineno}: expected 'sign_name<TAB>image_path'")
        sign_name, rel_path = parts[0].strip(), parts[1].strip()
        if sign_name in seen:
            raise CatalogError(
                f"{manifest}:{lineno}: duplicate sign_name {sign_name!r} (first at line {seen[sign_name]})"
            )
        seen[sign_name] = lineno
        img_path = os.path.join(base_dir, rel_path)
        if not os.path.isfile(img_path):
            raise CatalogError(f"{manifest}:{lineno}: image file not found: {img_path}")
        classes.append(GlyphClass(class_id=len(classes), sign_name=sign_name, source_path=img_path))
    if not classes:
        raise CatalogError(f"{manifest}: catalog is empty")
    return classes


def load_catalog_masters(classes: list[GlyphClass]) -> list[tuple[str, np.ndarray]]:
    """Load and binarize every catalog master, failing on blank images."""
    masters = []
    for cls in classes:
        try:
            master = load_master(cls.source_path)
        except FormatError as exc:
            raise CatalogError(f"class {cls.sign_name!r}: {exc}") from exc
        if content_bbox(master) is None:
            raise CatalogError(f"class {cls.sign_name!r}: master image has no ink: {cls.source_path}")
        masters.append((cls.sign_name, master))
    return masters


# ---------------------------------------------------------------------------
# base variants

_CROSS1 = StructuringElement(1, 1, "cross")


def _erode1(img: np.ndarray) -> np.ndarray:
    # erosion by one pixel, expressed as dilation of the complement
    return ~dilate(~img, _CROSS1, 1)


def _fit_occupancy(content: np.ndarray, side: int, occupancy: float) -> np.ndarray:
    inner = max(1, int(np.floor(occupancy * side + 0.5)))
    inner = min(inner, side)
    fitted = fit_to_square(content, inner)
    canvas = np.zeros((side, side), dtype=bool)
    off = (side - inner) // 2
    canvas[off : off + inner, off : off + inner] = fitted
    return canvas


def _despeckle(img: np.ndarray, min_pixels: int = 4) -> np.ndarray:
    out = img.copy()
    for comp in connected_components(img, "eight"):
        if comp.pixel_count < min_pixels:
            x0, y0, x1, y1 = comp.bbox
            region = out[y0 : y1 + 1, x0 : x1 + 1]
            # clearing the bbox is safe only for tiny specks that own it
            if region.sum() == comp.pixel_count:
                region[:] = False
    return out


def variant_recipe(k: int) -> tuple[int, float, bool]:
    """Fixed reprocessing recipe for base variant ``k``.

    Returns (stroke thickness delta in px, canvas occupancy fraction,
    whether seeded speck noise + despeckling is applied).  Variant 0 is
    always the plain normalized master.
    """
    if k == 0:
        return (0, 0.90, False)
    thickness = (0, 1, -1)[k % 3]
    occupancy = max(0.40, 0.90 - 0.06 * (k // 3))
    return (thickness, occupancy, k % 10 == 9)


def generate_base_variants(
    master: np.ndarray, count: int = 10, seed: int = 0, glyph_size: int = 64
) -> list[np.ndarray]:
    """Produce ``count`` base representations of a master glyph.

    Variant 0 is the normalized master (content fitted to 90% of the
    canvas); later variants apply the graded :func:`variant_recipe`
    combinations of stroke thickness, rescale, and speck-noise cleanup.
    Deterministic in (master, seed).
    """
    arr = require_binary(master)
    if count < 1:
        raise ValueError("count must be >= 1")
    bbox = content_bbox(arr)
    if bbox is None:
        raise ValueError("master glyph has no foreground")
    x0, y0, x1, y1 = bbox
    content = arr[y0 : y1 + 1, x0 : x1 + 1]
    variants = []
    for k in range(count):
        thickness, occupancy, speckle = variant_recipe(k)
        img = _fit_occupancy(content, glyph_size, occupancy)
        if thickness > 0:
            img = dilate(img, _CROSS1, thickness)
        elif thickness < 0:
            eroded = img
            for _ in range(-thickness):
                eroded = _erode1(eroded)
            if eroded.any():
                img = eroded
        if speckle:
            rng = np.random.default_rng([seed, k])
            specks = rng.random(img.shape) < 0.008
            img = _despeckle(img | specks)
        variants.append(img)
    return variants


# ---------------------------------------------------------------------------
# augmentation

def _affine_sample(img: np.ndarray, angle_deg: float, tx: float, ty: float, scale: float) -> np.ndarray:
    """Rotate/scale about the image centre, then translate; nearest-neighbour."""
    side = img.shape[0]
    c = (side - 1) / 2.0
    ys, xs = np.meshgrid(np.arange(side, dtype=np.float64), np.arange(side, dtype=np.float64), indexing="ij")
    # inverse map: undo translation, then rotation/scale about the centre
    ux = xs - c - tx
    uy = ys - c - ty
    theta = np.deg2rad(angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    sx = (cos_t * ux + sin_t * uy) / scale + c
    sy = (-sin_t * ux + cos_t * uy) / scale + c
    xi = np.floor(sx + 0.5).astype(np.int64)
    yi = np.floor(sy + 0.5).astype(np.int64)
    valid = (xi >= 0) & (xi < side) & (yi >= 0) & (yi < side)
    out = np.zeros_like(img)
    out[valid] = img[yi[valid], xi[valid]]
    return out


def augment(base: Sample, n: int = 5, config: AugmentationConfig | None = None) -> list[Sample]:
    """Derive ``n`` augmented samples (augment_id 1..n) from a base sample.

    Each augmentation applies a seeded rotation, translation, rescale, and
    per-pixel flip noise; deterministic in the base's identity and
    ``config.seed``.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if config is None:
        config = AugmentationConfig()
    if base.augment_id != 0:
        raise ValueError("augmentation applies to base samples (augment_id 0) only")
    side = base.image.shape[0]
    out = []
    for a in range(1, n + 1):
        rng = np.random.default_rng([config.seed, base.class_id, base.variant_id, a])
        angle = float(rng.uniform(-config.rotation_max, config.rotation_max))
        tx = float(rng.uniform(-config.translate_max, config.translate_max)) * side
        ty = float(rng.uniform(-config.translate_max, config.translate_max)) * side
        scale = float(rng.uniform(config.scale_range[0], config.scale_range[1]))
        img = _affine_sample(base.image, angle, tx, ty, scale)
        if config.noise_flip_prob > 0:
            img = img ^ (rng.random(img.shape) < config.noise_flip_prob)
        out.append(Sample(image=img, class_id=base.class_id, variant_id=base.variant_id, augment_id=a))
    return out


def build_dataset(
    masters: list[tuple[str, np.ndarray]],
    glyph_size: int = 64,
    variants: int = 10,
    augmentations: int = 5,
    seed: int = 0,
    augment_config: AugmentationConfig | None = None,
) -> tuple[list[Sample], tuple[str, ...]]:
    """Build the full sample list from (sign_name, master) pairs.

    Emits variants * (1 + augmentations) samples per class; the defaults
    reproduce the 60-samples-per-class arithmetic (10 bases, 5 augments).
    """
    if augment_config is None:
        augment_config = AugmentationConfig(seed=seed)
    samples: list[Sample] = []
    names = []
    for class_id, (sign_name, master) in enumerate(masters):
        names.append(sign_name)
        bases = generate_base_variants(master, variants, seed=class_seed(seed, class_id), glyph_size=glyph_size)
        for v, img in enumerate(bases):
            base = Sample(image=img, class_id=class_id, variant_id=v, augment_id=0)
            samples.append(base)
            samples.extend(augment(base, augmentations, augment_config))
    return samples, tuple(names)


def class_seed(seed: int, class_id: int) -> int:
    """Derive a per-class child seed (stable mix of seed and class id)."""
    return int(np.random.SeedSequence(entropy=[seed, class_id]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# splitting

def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _hamilton(n: int, fractions: tuple[float, float, float]) -> list[int]:
    quotas = [f * n for f in fractions]
    base = [int(np.floor(q)) for q in quotas]
    leftover = n - sum(base)
    order = sorted(range(3), key=lambda s: (-(quotas[s] - base[s]), s))
    for s in order[:leftover]:
        base[s] += 1
    return base


def split_dataset(samples: list[Sample], spec: SplitSpec | None = None,
                  sign_names: tuple[str, ...] | None = None) -> DatasetSplit:
    """Stratified train/val/test split with exact global totals.

    Per class, samples are shuffled by a seeded per-class generator and
    allocated by largest-remainder rounding of the class quota; a
    reconciliation pass then moves at most one sample per class (ascending
    class id) so the global totals equal round(fraction * N) for train and
    val, remainder test.
    """
    if spec is None:
        spec = SplitSpec()
    if not samples:
        raise ValueError("cannot split an empty sample list")
    keys = set()
    by_class: dict[int, list[Sample]] = {}
    for s in samples:
        if s.key in keys:
            raise ValueError(f"duplicate sample key {s.key}")
        keys.add(s.key)
        by_class.setdefault(s.class_id, []).append(s)
    for cid, group in by_class.items():
        if len(group) < 3:
            raise ValueError(f"class {cid} has {len(group)} samples; need >= 3 to split")

    n_total = len(samples)
    fracs = (spec.train_fraction, spec.val_fraction, spec.test_fraction)
    target_train = _round_half_up(fracs[0] * n_total)
    target_val = _round_half_up(fracs[1] * n_total)
    targets = [target_train, target_val, n_total - target_train - target_val]

    class_ids = sorted(by_class)
    alloc = {cid: _hamilton(len(by_class[cid]), fracs) for cid in class_ids}
    totals = [sum(alloc[cid][s] for cid in class_ids) for s in range(3)]

    adjusted: set[int] = set()
    guard = 0
    while totals != targets:
        guard += 1
        if guard > 4 * n_total:
            raise RuntimeError("split reconciliation failed to converge")
        donor = max(range(3), key=lambda s: totals[s] - targets[s])
        taker = min(range(3), key=lambda s: totals[s] - targets[s])
        moved = False
        for strict in (True, False):
            for cid in class_ids:
                if cid in adjusted:
                    continue
                n_c = len(by_class[cid])
                q_donor = fracs[donor] * n_c
                q_taker = fracs[taker] * n_c
                a = alloc[cid]
                if a[donor] == 0:
                    continue
                if strict and not (a[donor] - 1 >= int(np.floor(q_donor)) and a[taker] + 1 <= int(np.ceil(q_taker))):
                    continue
                a[donor] -= 1
                a[taker] += 1
                adjusted.add(cid)
                totals[donor] -= 1
                totals[taker] += 1
                moved = True
                break
            if moved:
                break
        if not moved:
            raise RuntimeError("split reconciliation found no movable class")

    parts: tuple[list[Sample], list[Sample], list[Sample]] = ([], [], [])
    for cid in class_ids:
        group = by_class[cid]
        rng = np.random.default_rng([spec.seed, cid])
        perm = rng.permutation(len(group))
        shuffled = [group[i] for i in perm]
        a_train, a_val, _ = alloc[cid]
        parts[0].extend(shuffled[:a_train])
        parts[1].extend(shuffled[a_train : a_train + a_val])
        parts[2].extend(shuffled[a_train + a_val :])
    return DatasetSplit(train=parts[0], val=parts[1], test=parts[2], sign_names=sign_names)


def to_arrays(samples: list[Sample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack samples into (images bool (N, S, S), labels int64 (N,))."""
    if not samples:
        raise ValueError("empty sample list")
    x = np.stack([s.image for s in samples])
    y = np.array([s.class_id for s in samples], dtype=np.int64)
    return x, y


# ---------------------------------------------------------------------------
# serialization

def save_dataset(split: DatasetSplit, path: str | os.PathLike) -> None:
    """Save a dataset split: ``*.cune`` paths use the packed single-file
    format, anything else a directory with ``manifest.tsv`` + PGM glyphs."""
    if os.fspath(path).endswith(".cune"):
        _save_packed(split, path)
    else:
        _save_directory(split, path)


def load_dataset(path: str | os.PathLike) -> DatasetSplit:
    """Inverse of :func:`save_dataset` (directory or packed file)."""
    if os.path.isdir(path):
        return _load_directory(path)
    if not os.path.exists(path):
        raise FormatError(f"dataset not found: {os.fspath(path)}")
    return _load_packed(path)


def _sample_filename(split_name: str, s: Sample) -> str:
    return f"glyphs/{split_name}/{s.class_id:04d}_{s.variant_id:02d}_{s.augment_id:02d}.pgm"


def _save_directory(split: DatasetSplit, path: str | os.PathLike) -> None:
    root = os.fspath(path)
    names = split.sign_names
    rows = ["class_id\tsign_name\tvariant_id\taugment_id\tsplit\tpath"]
    for split_name, samples in zip(SPLIT_NAMES, (split.train, split.val, split.test)):
        os.makedirs(os.path.join(root, "glyphs", split_name), exist_ok=True)
        for s in samples:
            rel = _sample_filename(split_name, s)
            write_pgm(os.path.join(root, rel), gray_from_binary(s.image))
            sign = names[s.class_id] if names else f"class-{s.class_id:03d}"
            rows.append(f"{s.class_id}\t{sign}\t{s.variant_id}\t{s.augment_id}\t{split_name}\t{rel}")
    with open(os.path.join(root, "manifest.tsv"), "w", encoding="utf-8") as f:
        f.write("\n".join(rows) + "\n")


def _load_directory(path: str | os.PathLike) -> DatasetSplit:
    root = os.fspath(path)
    manifest = os.path.join(root, "manifest.tsv")
    if not os.path.isfile(manifest):
        raise FormatError(f"dataset directory has no manifest.tsv: {root}")
    with open(manifest, "r", encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    header = "class_id\tsign_name\tvariant_id\taugment_id\tsplit\tpath"
    if not lines or lines[0] != header:
        raise FormatError(f"{manifest}: bad or missing header row")
    buckets: dict[str, list[Sample]] = {name: [] for name in SPLIT_NAMES}
    names: dict[int, str] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 6:
            raise FormatError(f"{manifest}:{lineno}: expected 6 columns, got {len(parts)}")
        class_id, sign, variant_id, augment_id, split_name, rel = parts
        if split_name not in buckets:
            raise FormatError(f"{manifest}:{lineno}: unknown split {split_name!r}")
        try:
            cid, vid, aid = int(class_id), int(variant_id), int(augment_id)
        except ValueError as exc:
            raise FormatError(f"{manifest}:{lineno}: non-integer id field") from exc
        img_path = os.path.join(root, rel)
        if not os.path.isfile(img_path):
            raise FormatError(f"{manifest}:{lineno}: glyph file missing: {rel}")
        gray = load_grayscale(img_path)
        buckets[split_name].append(
            Sample(image=binary_from_gray(gray), class_id=cid, variant_id=vid, augment_id=aid)
        )
        names[cid] = sign
    sign_names = tuple(names[c] for c in sorted(names)) if names else None
    if sign_names is not None and sorted(names) != list(range(len(sign_names))):
        raise FormatError(f"{manifest}: class ids are not contiguous from 0")
    return DatasetSplit(train=buckets["train"], val=buckets["val"], test=buckets["test"], sign_names=sign_names)


def _save_packed(split: DatasetSplit, path: str | os.PathLike) -> None:
    samples = split.all_samples()
    side = split.glyph_size
    for s in samples:
        if s.image.shape != (side, side):
            raise ValueError("packed format requires uniform glyph size")
    with open(path, "wb") as f:
        f.write(_PACKED_MAGIC)
        f.write(struct.pack("<III", _PACKED_VERSION, len(samples), side))
        for tag, bucket in enumerate((split.train, split.val, split.test)):
            for s in bucket:
                f.write(struct.pack("<IHHB", s.class_id, s.variant_id, s.augment_id, tag))
                f.write(s.image.astype(np.uint8).tobytes())


def _load_packed(path: str | os.PathLike) -> DatasetSplit:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 16 or data[:4] != _PACKED_MAGIC:
        raise FormatError(f"not a packed dataset file: {os.fspath(path)}")
    version, count, side = struct.unpack("<III", data[4:16])
    if version != _PACKED_VERSION:
        raise FormatError(f"unsupported packed dataset version {version}")
    if side < 1:
        raise FormatError(f"bad glyph side {side}")
    rec_size = 9 + side * side
    if len(data) - 16 != count * rec_size:
        raise FormatError(
            f"packed dataset length mismatch: header says {count} samples "
            f"({count * rec_size} bytes), file has {len(data) - 16}"
        )
    buckets: tuple[list[Sample], list[Sample], list[Sample]] = ([], [], [])
    off = 16
    for _ in range(count):
        cid, vid, aid, tag = struct.unpack("<IHHB", data[off : off + 9])
        off += 9
        if tag > 2:
            raise FormatError(f"bad split tag {tag} in packed dataset")
        img = np.frombuffer(data[off : off + side * side], dtype=np.uint8).reshape(side, side)
        off += side * side
        buckets[tag].append(Sample(image=img.astype(bool), class_id=cid, variant_id=vid, augment_id=aid))
    return DatasetSplit(train=buckets[0], val=buckets[1], test=buckets[2])
