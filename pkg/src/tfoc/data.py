"""On-disk dataset format, loading, validation, and subject-level splits.

A dataset directory holds ``manifest.json`` plus, per subject, a trial
binary and a labels text file:

* manifest.json: format_version, sampling_rate_hz, channels,
  trial_duration_s, subjects[{id, data_file, labels_file, n_trials}].
* trial binary: 16-byte header (magic ``EEGT``, u8 version=1,
  u8 n_channels, u16 reserved=0, u32 n_trials, u32 n_samples, all
  little-endian) followed by float32 little-endian samples in
  [trial][channel][sample] order.
* labels file: one ``trial_index,label`` line per trial, label in {0, 1},
  trial_index strictly increasing from 0.
"""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

log = logging.getLogger("tfoc.data")

MAGIC = b"EEGT"
FORMAT_VERSION = 1
REQUIRED_CHANNELS = ("C3", "Cz", "C4")
HEADER = struct.Struct("<4sBBHII")


@dataclass(frozen=True, eq=False)
class TrialRecord:
    """One motor-imagery trial: a channels x samples matrix in microvolts."""

    subject_id: str
    trial_index: int
    data: np.ndarray
    label: int
    fs: float
    session_id: str = ""

    @property
    def trial_id(self) -> tuple[str, int]:
        return (self.subject_id, self.trial_index)


@dataclass(frozen=True)
class SubjectEntry:
    id: str
    data_file: str
    labels_file: str
    n_trials: int


@dataclass(frozen=True)
class DatasetManifest:
    format_version: int
    sampling_rate_hz: float
    channels: tuple[str, ...]
    trial_duration_s: float
    subjects: tuple[SubjectEntry, ...]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable, fully materialized dataset."""

    manifest: DatasetManifest
    trials: tuple[TrialRecord, ...]

    @property
    def fs(self) -> float:
        return self.manifest.sampling_rate_hz

    @property
    def channels(self) -> tuple[str, ...]:
        return self.manifest.channels

    def subject_ids(self) -> list[str]:
        return [s.id for s in self.manifest.subjects]

    def trials_for(self, subject_id: str) -> list[TrialRecord]:
        return [t for t in self.trials if t.subject_id == subject_id]

    def channel_index(self, name: str) -> int:
        try:
            return self.manifest.channels.index(name)
        except ValueError:
            raise DataError(f"channel {name!r} not present in dataset") from None


@dataclass(frozen=True)
class ValidationIssue:
    kind: str
    subject_id: str
    message: str
    trial_index: int | None = None

    def __str__(self):
        where = f"{self.subject_id}" + (
            f"[trial {self.trial_index}]" if self.trial_index is not None else ""
        )
        return f"{self.kind}: {where}: {self.message}"


@dataclass(frozen=True)
class LosoFold:
    held_out: str
    train_subjects: tuple[str, ...]


@dataclass(frozen=True)
class SplitPair:
    train: tuple[int, ...]
    validation: tuple[int, ...]


def _read_manifest(path: Path) -> DatasetManifest:
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise DataError(f"manifest not found: {manifest_path}")
    try:
        raw = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest is not valid JSON: {exc}") from exc
    try:
        subjects = tuple(
            SubjectEntry(
                id=str(s["id"]),
                data_file=str(s["data_file"]),
                labels_file=str(s["labels_file"]),
                n_trials=int(s["n_trials"]),
            )
            for s in raw["subjects"]
        )
        manifest = DatasetManifest(
            format_version=int(raw["format_version"]),
            sampling_rate_hz=float(raw["sampling_rate_hz"]),
            channels=tuple(str(c) for c in raw["channels"]),
            trial_duration_s=float(raw["trial_duration_s"]),
            subjects=subjects,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"manifest missing or malformed field: {exc}") from exc
    if manifest.format_version != FORMAT_VERSION:
        raise DataError(
            f"unsupported manifest format_version {manifest.format_version}, "
            f"expected {FORMAT_VERSION}"
        )
    return manifest


def _read_labels(path: Path, subject_id: str) -> list[int]:
    if not path.is_file():
        raise DataError(f"labels file not found: {path}")
    labels = []
    for lineno, line in enumerate(path.read_text().splitlines()):
        line = line.strip()
        if not line:
            continue
        try:
            idx_str, label_str = line.split(",")
            idx, label = int(idx_str), int(label_str)
        except ValueError:
            raise DataError(
                f"bad label line {lineno + 1} in {path}: {line!r}"
            ) from None
        if idx != len(labels):
            raise DataError(
                f"trial indices in {path} must increase strictly from 0; "
                f"line {lineno + 1} has index {idx}, expected {len(labels)}"
            )
        if label not in (0, 1):
            raise DataError(
                f"label must be 0 (left) or 1 (right), got {label} for "
                f"subject {subject_id} trial {idx}"
            )
        labels.append(label)
    return labels


def _read_trials_binary(path: Path, n_channels_expected: int) -> np.ndarray:
    if not path.is_file():
        raise DataError(f"trial data file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < HEADER.size:
        raise DataError(f"truncated trial file {path}: no complete header")
    magic, version, n_channels, reserved, n_trials, n_samples = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DataError(f"bad magic in {path}: {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported trial file version {version} in {path}")
    if reserved != 0:
        raise DataError(f"nonzero reserved header field in {path}")
    if n_channels != n_channels_expected:
        raise DataError(
            f"{path} has {n_channels} channels, manifest says {n_channels_expected}"
        )
    expected = HEADER.size + 4 * n_trials * n_channels * n_samples
    if len(blob) != expected:
        raise DataError(
            f"truncated trial file {path}: {len(blob)} bytes, expected {expected}"
        )
    flat = np.frombuffer(blob, dtype="<f4", offset=HEADER.size)
    return flat.reshape(n_trials, n_channels, n_samples)


def load_dataset(path) -> Dataset:
    """Load and materialize a dataset directory.

    Distinct failure modes (missing files, magic/version mismatch,
    truncation, label/count mismatch) raise DataError with a message
    naming the file.
    """
    path = Path(path)
    manifest = _read_manifest(path)
    trials: list[TrialRecord] = []
    for entry in manifest.subjects:
        data = _read_trials_binary(path / entry.data_file, len(manifest.channels))
        labels = _read_labels(path / entry.labels_file, entry.id)
        if data.shape[0] != entry.n_trials:
            raise DataError(
                f"subject {entry.id}: manifest lists {entry.n_trials} trials but "
                f"{entry.data_file} holds {data.shape[0]}"
            )
        if len(labels) != entry.n_trials:
            raise DataError(
                f"subject {entry.id}: {entry.labels_file} has {len(labels)} labels "
                f"for {entry.n_trials} trials"
            )
        for i in range(entry.n_trials):
            trials.append(
                TrialRecord(
                    subject_id=entry.id,
                    trial_index=i,
                    data=data[i],
                    label=labels[i],
                    fs=manifest.sampling_rate_hz,
                )
            )
    return Dataset(manifest=manifest, trials=tuple(trials))


def write_dataset(ds: Dataset, path) -> None:
    """Write a dataset directory in the documented on-disk format."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest_dict = {
        "format_version": ds.manifest.format_version,
        "sampling_rate_hz": ds.manifest.sampling_rate_hz,
        "channels": list(ds.manifest.channels),
        "trial_duration_s": ds.manifest.trial_duration_s,
        "subjects": [
            {
                "id": s.id,
                "data_file": s.data_file,
                "labels_file": s.labels_file,
                "n_trials": s.n_trials,
            }
            for s in ds.manifest.subjects
        ],
    }
    (path / "manifest.json").write_text(json.dumps(manifest_dict, indent=2) + "\n")
    for entry in ds.manifest.subjects:
        subject_trials = ds.trials_for(entry.id)
        if len(subject_trials) != entry.n_trials:
            raise DataError(
                f"subject {entry.id}: manifest lists {entry.n_trials} trials, "
                f"dataset holds {len(subject_trials)}"
            )
        n_samples = subject_trials[0].data.shape[1] if subject_trials else 0
        stacked = np.stack(
            [np.ascontiguousarray(t.data, dtype="<f4") for t in subject_trials]
        ) if subject_trials else np.zeros((0, len(ds.manifest.channels), 0), dtype="<f4")
        header = HEADER.pack(
            MAGIC, FORMAT_VERSION, len(ds.manifest.channels), 0, len(subject_trials), n_samples
        )
        (path / entry.data_file).write_bytes(header + stacked.tobytes())
        lines = [f"{t.trial_index},{t.label}" for t in subject_trials]
        (path / entry.labels_file).write_text("\n".join(lines) + ("\n" if lines else ""))


def validate_dataset(ds: Dataset) -> list[ValidationIssue]:
    """Structural checks; an empty list means the dataset is usable."""
    issues: list[ValidationIssue] = []
    missing = [c for c in REQUIRED_CHANNELS if c not in ds.manifest.channels]
    for c in missing:
        issues.append(
            ValidationIssue("channel", "*", f"required channel {c!r} missing from manifest")
        )
    expected_samples = ds.manifest.sampling_rate_hz * ds.manifest.trial_duration_s
    if not math.isclose(expected_samples, round(expected_samples)):
        issues.append(
            ValidationIssue(
                "geometry", "*",
                f"sampling_rate_hz * trial_duration_s = {expected_samples} is not an integer",
            )
        )
    expected_samples = round(expected_samples)
    labels_seen: dict[str, set[int]] = {s.id: set() for s in ds.manifest.subjects}
    for t in ds.trials:
        if t.fs != ds.manifest.sampling_rate_hz:
            issues.append(
                ValidationIssue(
                    "sampling", t.subject_id, f"trial fs {t.fs} != manifest fs", t.trial_index
                )
            )
        if t.data.shape != (len(ds.manifest.channels), expected_samples):
            issues.append(
                ValidationIssue(
                    "geometry",
                    t.subject_id,
                    f"trial shape {t.data.shape} != "
                    f"({len(ds.manifest.channels)}, {expected_samples})",
                    t.trial_index,
                )
            )
        if not np.isfinite(t.data).all():
            issues.append(
                ValidationIssue(
                    "finiteness", t.subject_id, "trial contains non-finite samples",
                    t.trial_index,
                )
            )
        labels_seen.setdefault(t.subject_id, set()).add(t.label)
    for subject_id, seen in labels_seen.items():
        if seen != {0, 1}:
            issues.append(
                ValidationIssue(
                    "labels", subject_id, f"expected both classes, found labels {sorted(seen)}"
                )
            )
    return issues


def loso_splits(ds: Dataset) -> list[LosoFold]:
    """One leave-one-subject-out fold per subject, in subject order."""
    subjects = ds.subject_ids()
    if len(subjects) < 2:
        raise DataError(f"leave-one-subject-out needs >= 2 subjects, got {len(subjects)}")
    return [
        LosoFold(held_out=s, train_subjects=tuple(o for o in subjects if o != s))
        for s in subjects
    ]


def holdout_validation(subjects, labels, frac: float, seed: int) -> SplitPair:
    """Stratified validation holdout over parallel (subject, label) sequences.

    Moves ceil(frac * cell_size) trials per (subject, label) cell to the
    validation side; deterministic for a given seed. Returns index lists
    into the input sequences.
    """
    if not 0 < frac < 0.5:
        raise ValueError(f"holdout fraction must be in (0, 0.5), got {frac}")
    if len(subjects) != len(labels):
        raise ValueError("subjects and labels must have equal length")
    cells: dict[tuple[str, int], list[int]] = {}
    for i, (s, y) in enumerate(zip(subjects, labels)):
        cells.setdefault((s, int(y)), []).append(i)
    rng = np.random.default_rng(seed)
    train: list[int] = []
    validation: list[int] = []
    for key in sorted(cells):
        idx = cells[key]
        if not idx:
            log.warning("empty stratification cell %s skipped", key)
            continue
        k = math.ceil(frac * len(idx))
        perm = rng.permutation(len(idx))
        chosen = {idx[p] for p in perm[:k]}
        validation.extend(sorted(chosen))
        train.extend(i for i in idx if i not in chosen)
    return SplitPair(train=tuple(sorted(train)), validation=tuple(sorted(validation)))
