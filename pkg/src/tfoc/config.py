"""Experiment configuration: JSON schema, defaults, and resolution.

Configs are plain JSON with full schema validation; unknown keys are
rejected so experiment records stay self-describing. Defaults embody the
standard pipeline: 8-30 Hz causal bandpass, Hann window sized to the
sampling rate with 50% overlap, direct spectrogram input, balanced
batching with 4 trials per subject, 200 epochs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .dsp import SEGMENT_IDS, WINDOW_FUNCTIONS
from .errors import UsageError

REPRESENTATIONS = ("stft_direct", "image32")
FILTER_MODES = ("causal", "zero_phase")

DEFAULT_CONFIG = {
    "filter": {"order": 6, "low_hz": 8.0, "high_hz": 30.0, "mode": "causal"},
    "stft": {"window_len": None, "overlap": "half", "window_fn": "hann", "crop_band": None},
    "input": {"representation": "stft_direct", "standardize": False},
    "training": {
        "epochs": 200,
        "patience": 20,
        "val_frac": 0.1,
        "lr": 0.001,
        "rho": 0.9,
        "eps": 1e-7,
    },
    "batching": {"balanced": True, "per_subject": 4, "batch_size": None},
    "segments": list(SEGMENT_IDS),
    "seed": 0,
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "filter": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "order": {"type": "integer", "minimum": 2},
                "low_hz": {"type": "number", "exclusiveMinimum": 0},
                "high_hz": {"type": "number", "exclusiveMinimum": 0},
                "mode": {"enum": list(FILTER_MODES)},
            },
        },
        "stft": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "window_len": {
                    "anyOf": [{"type": "integer", "minimum": 2}, {"type": "null"}]
                },
                "overlap": {
                    "anyOf": [
                        {"type": "integer", "minimum": 1},
                        {"enum": ["half", "minimal"]},
                    ]
                },
                "window_fn": {"enum": list(WINDOW_FUNCTIONS)},
                "crop_band": {
                    "anyOf": [
                        {"type": "null"},
                        {
                            "type": "array",
                            "items": {"type": "number", "minimum": 0},
                            "minItems": 2,
                            "maxItems": 2,
                        },
                    ]
                },
            },
        },
        "input": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "representation": {"enum": list(REPRESENTATIONS)},
                "standardize": {"type": "boolean"},
            },
        },
        "training": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epochs": {"type": "integer", "minimum": 1},
                "patience": {"type": "integer", "minimum": 1},
                "val_frac": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
                "lr": {"type": "number", "exclusiveMinimum": 0},
                "rho": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "eps": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "batching": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "balanced": {"type": "boolean"},
                "per_subject": {"type": "integer", "minimum": 1},
                "batch_size": {
                    "anyOf": [{"type": "integer", "minimum": 1}, {"type": "null"}]
                },
            },
        },
        "segments": {
            "type": "array",
            "items": {"enum": list(SEGMENT_IDS)},
            "minItems": 1,
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}


@dataclass(frozen=True)
class FilterSettings:
    order: int
    low_hz: float
    high_hz: float
    mode: str


@dataclass(frozen=True)
class StftSettings:
    window_len: int
    overlap: int
    window_fn: str
    crop_band: tuple[float, float] | None


@dataclass(frozen=True)
class InputSettings:
    representation: str
    standardize: bool


@dataclass(frozen=True)
class TrainingSettings:
    epochs: int
    patience: int
    val_frac: float
    lr: float
    rho: float
    eps: float


@dataclass(frozen=True)
class BatchSettings:
    balanced: bool
    per_subject: int
    batch_size: int | None


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved configuration: every value concrete for one dataset."""

    filter: FilterSettings
    stft: StftSettings
    input: InputSettings
    training: TrainingSettings
    batching: BatchSettings
    segments: tuple[str, ...]
    seed: int
    sampling_rate_hz: float

    def to_dict(self) -> dict:
        return {
            "filter": {
                "order": self.filter.order,
                "low_hz": self.filter.low_hz,
                "high_hz": self.filter.high_hz,
                "mode": self.filter.mode,
            },
            "stft": {
                "window_len": self.stft.window_len,
                "overlap": self.stft.overlap,
                "window_fn": self.stft.window_fn,
                "crop_band": list(self.stft.crop_band) if self.stft.crop_band else None,
            },
            "input": {
                "representation": self.input.representation,
                "standardize": self.input.standardize,
            },
            "training": {
                "epochs": self.training.epochs,
                "patience": self.training.patience,
                "val_frac": self.training.val_frac,
                "lr": self.training.lr,
                "rho": self.training.rho,
                "eps": self.training.eps,
            },
            "batching": {
                "balanced": self.batching.balanced,
                "per_subject": self.batching.per_subject,
                "batch_size": self.batching.batch_size,
            },
            "segments": list(self.segments),
            "seed": self.seed,
            "sampling_rate_hz": self.sampling_rate_hz,
        }


def default_window_len(fs: float) -> int:
    """Smallest power of two at or above the sampling rate (256 at 250 Hz,
    128 at 100 Hz), roughly a one-second analysis window."""
    return 1 << math.ceil(math.log2(fs))


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError("config file must hold a JSON object")
    return raw


def _merge(defaults: dict, override: dict) -> dict:
    out = {}
    for key, value in defaults.items():
        if key in override and isinstance(value, dict):
            out[key] = _merge(value, override[key])
        elif key in override:
            out[key] = override[key]
        else:
            out[key] = value
    return out


def resolve_config(raw: dict | None, fs: float, seed: int | None = None) -> ExperimentConfig:
    """Validate a raw config against the schema, fill defaults, and pin
    every derived value (window length, overlap preset) for this dataset.
    """
    raw = raw or {}
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "(top level)"
        raise UsageError(f"invalid config at {where}: {exc.message}") from exc
    merged = _merge(DEFAULT_CONFIG, raw)

    window_len = merged["stft"]["window_len"]
    if window_len is None:
        window_len = default_window_len(fs)
    overlap = merged["stft"]["overlap"]
    if overlap == "half":
        overlap = window_len // 2
    elif overlap == "minimal":
        overlap = 1
    if not 1 <= overlap < window_len:
        raise UsageError(
            f"stft overlap {overlap} must satisfy 1 <= overlap < window_len {window_len}"
        )
    crop = merged["stft"]["crop_band"]
    if crop is not None:
        low, high = float(crop[0]), float(crop[1])
        if not low < high:
            raise UsageError(f"crop_band must be [low, high) with low < high, got {crop}")
        crop = (low, high)

    filt = merged["filter"]
    if not 0 < filt["low_hz"] < filt["high_hz"] < fs / 2:
        raise UsageError(
            f"filter band ({filt['low_hz']}, {filt['high_hz']}) must lie inside "
            f"(0, fs/2) = (0, {fs / 2})"
        )
    if filt["order"] % 2 != 0:
        raise UsageError(f"filter order must be even, got {filt['order']}")

    return ExperimentConfig(
        filter=FilterSettings(
            order=int(filt["order"]),
            low_hz=float(filt["low_hz"]),
            high_hz=float(filt["high_hz"]),
            mode=filt["mode"],
        ),
        stft=StftSettings(
            window_len=int(window_len),
            overlap=int(overlap),
            window_fn=merged["stft"]["window_fn"],
            crop_band=crop,
        ),
        input=InputSettings(
            representation=merged["input"]["representation"],
            standardize=bool(merged["input"]["standardize"]),
        ),
        training=TrainingSettings(
            epochs=int(merged["training"]["epochs"]),
            patience=int(merged["training"]["patience"]),
            val_frac=float(merged["training"]["val_frac"]),
            lr=float(merged["training"]["lr"]),
            rho=float(merged["training"]["rho"]),
            eps=float(merged["training"]["eps"]),
        ),
        batching=BatchSettings(
            balanced=bool(merged["batching"]["balanced"]),
            per_subject=int(merged["batching"]["per_subject"]),
            batch_size=(
                None if merged["batching"]["batch_size"] is None
                else int(merged["batching"]["batch_size"])
            ),
        ),
        segments=tuple(merged["segments"]),
        seed=int(seed if seed is not None else merged["seed"]),
        sampling_rate_hz=float(fs),
    )
