"""Run configuration: one JSON file driving every command.

Every tunable lives under a section (``dataset``, ``augment``, ``split``,
``segmentation``, ``model``, ``train``) with a fixed key schema; unknown
keys are rejected so typos fail loudly instead of silently using a
default.  All randomness flows from the single top-level ``seed`` (the
``--seed`` flag overrides it), so a config file pins a run completely.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

from .dataset import AugmentationConfig, SplitSpec
from .errors import ConfigError
from .nn.model import (
    ConvSpec,
    DenseSpec,
    FlattenSpec,
    ModelConfig,
    PoolSpec,
    ReluSpec,
    SoftmaxSpec,
)
from .nn.training import TrainConfig
from .segmentation import SegmentationParams


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    glyph_size: int = 64
    variants: int = 10
    augmentations: int = 5
    augment: AugmentationConfig = AugmentationConfig()
    split: SplitSpec = SplitSpec()
    segmentation: SegmentationParams = SegmentationParams()
    conv_filters: tuple[int, ...] = (16, 32)
    kernel: int = 3
    dense_units: int = 128
    train: TrainConfig = TrainConfig()

    def __post_init__(self):
        if self.glyph_size < 4:
            raise ConfigError("glyph_size must be >= 4")
        if self.variants < 1 or self.augmentations < 0:
            raise ConfigError("variants must be >= 1 and augmentations >= 0")
        if not self.conv_filters:
            raise ConfigError("conv_filters must name at least one stage")
        if any(f < 1 for f in self.conv_filters) or self.kernel < 1 or self.dense_units < 1:
            raise ConfigError("conv_filters, kernel, and dense_units must be >= 1")
        if self.segmentation.glyph_size != self.glyph_size:
            raise ConfigError(
                f"segmentation.glyph_size {self.segmentation.glyph_size} "
                f"differs from dataset glyph_size {self.glyph_size}"
            )


def with_seed(config: RunConfig, seed: int) -> RunConfig:
    """Rebase every seeded sub-config on ``seed`` (the --seed override)."""
    return replace(
        config,
        seed=seed,
        augment=replace(config.augment, seed=seed),
        split=replace(config.split, seed=seed),
        train=replace(config.train, shuffle_seed=seed),
    )


def model_config_for(config: RunConfig, num_classes: int,
                     class_names: tuple[str, ...] | None = None) -> ModelConfig:
    """Instantiate the conv/pool stack described by the run config."""
    layers = []
    for filters in config.conv_filters:
        layers += [ConvSpec(filters=filters, kernel=config.kernel), ReluSpec(), PoolSpec(2, 2)]
    layers += [FlattenSpec(), DenseSpec(units=config.dense_units), ReluSpec(),
               DenseSpec(units=num_classes), SoftmaxSpec()]
    return ModelConfig(
        input_shape=(1, config.glyph_size, config.glyph_size),
        layers=tuple(layers),
        num_classes=num_classes,
        seed=config.seed,
        class_names=class_names,
    )


_SCHEMA = {
    "seed": int,
    "dataset": {"glyph_size": int, "variants": int, "augmentations": int},
    "augment": {
        "rotation_max": float,
        "translate_max": float,
        "scale_min": float,
        "scale_max": float,
        "noise_flip_prob": float,
    },
    "split": {"train_fraction": float, "val_fraction": float, "test_fraction": float},
    "segmentation": {
        "target_width": int,
        "dilation_radius": int,
        "dilation_iterations": int,
        "min_component_pixels": int,
        "line_overlap_ratio": float,
        "glyph_margin": float,
        "polarity": str,
    },
    "model": {"conv_filters": list, "kernel": int, "dense_units": int},
    "train": {
        "max_epochs": int,
        "patience": int,
        "batch_size": int,
        "learning_rate": float,
        "beta1": float,
        "beta2": float,
        "epsilon": float,
        "min_delta": float,
    },
}


def _check_keys(section: dict, schema: dict, path: str) -> None:
    for key in section:
        if key not in schema:
            raise ConfigError(f"unknown config key {path}{key!r}")


def _coerce(value, want, path: str):
    if want is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key {path} must be a number, got {value!r}")
        return float(value)
    if want is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key {path} must be an integer, got {value!r}")
        return value
    if want is str:
        if not isinstance(value, str):
            raise ConfigError(f"config key {path} must be a string, got {value!r}")
        return value
    if want is list:
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"config key {path} must be a list of integers, got {value!r}")
        return value
    raise AssertionError(f"unhandled schema type {want}")


def parse_run_config(payload: dict) -> RunConfig:
    """Build a RunConfig from parsed JSON, rejecting unknown keys."""
    if not isinstance(payload, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(payload, _SCHEMA, "")
    out: dict = {}
    for section_name in ("dataset", "augment", "split", "segmentation", "model", "train"):
        section = payload.get(section_name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"config section {section_name!r} must be an object")
        _check_keys(section, _SCHEMA[section_name], f"{section_name}.")
        out[section_name] = {
            k: _coerce(v, _SCHEMA[section_name][k], f"{section_name}.{k}")
            for k, v in section.items()
        }
    seed = _coerce(payload.get("seed", 0), int, "seed")

    ds = out["dataset"]
    glyph_size = ds.get("glyph_size", 64)

    aug = out["augment"]
    aug_kwargs = {k: aug[k] for k in ("rotation_max", "translate_max", "noise_flip_prob") if k in aug}
    if "scale_min" in aug or "scale_max" in aug:
        aug_kwargs["scale_range"] = (aug.get("scale_min", 0.9), aug.get("scale_max", 1.1))
    seg = dict(out["segmentation"])
    seg["glyph_size"] = glyph_size
    model = out["model"]
    model_kwargs = {}
    if "conv_filters" in model:
        model_kwargs["conv_filters"] = tuple(model["conv_filters"])
    if "kernel" in model:
        model_kwargs["kernel"] = model["kernel"]
    if "dense_units" in model:
        model_kwargs["dense_units"] = model["dense_units"]

    return RunConfig(
        seed=seed,
        glyph_size=glyph_size,
        variants=ds.get("variants", 10),
        augmentations=ds.get("augmentations", 5),
        augment=AugmentationConfig(seed=seed, **aug_kwargs),
        split=SplitSpec(seed=seed, **out["split"]),
        segmentation=SegmentationParams(**seg),
        train=TrainConfig(shuffle_seed=seed, **out["train"]),
        **model_kwargs,
    )


def load_run_config(path: str | os.PathLike | None) -> RunConfig:
    """Load a JSON run config; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return parse_run_config(payload)


CONFIG_KEY_DOC = """\
seed                              master seed for every stochastic step
dataset.glyph_size                normalized glyph side in pixels
dataset.variants                  base representations per class
dataset.augmentations             augmentations per base representation
augment.rotation_max              max |rotation| in degrees
augment.translate_max             max |translation| as a fraction of side
augment.scale_min / scale_max     uniform rescale bounds
augment.noise_flip_prob           per-pixel flip probability
split.train_fraction / val_fraction / test_fraction   must sum to 1
segmentation.target_width         page is resized to this width first
segmentation.dilation_radius      structuring-element radius for merging
segmentation.dilation_iterations  dilation repetitions
segmentation.min_component_pixels noise floor for component area
segmentation.line_overlap_ratio   vertical-overlap ratio for line grouping
segmentation.glyph_margin         padding around each glyph crop
segmentation.polarity             ink_is_dark | ink_is_light
model.conv_filters                filters per conv/pool stage, e.g. [16, 32]
model.kernel                      conv kernel size
model.dense_units                 hidden dense width
train.max_epochs / patience / batch_size
train.learning_rate / beta1 / beta2 / epsilon   Adam parameters
train.min_delta                   required val-loss improvement
"""
