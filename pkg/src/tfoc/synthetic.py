"""Synthetic two-class dataset generator for demos, smoke runs, and tests.

The class is encoded as lateralized narrow-band power: one class puts a
10 Hz tone on C3 and a 22 Hz tone on C4, the other swaps them. Cz and all
channels carry white noise, and each subject gets its own amplitude gain
so cross-subject transfer is non-trivial but learnable.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset, DatasetManifest, SubjectEntry, TrialRecord, write_dataset

CHANNELS = ("C3", "Cz", "C4")
LOW_TONE_HZ = 10.0
HIGH_TONE_HZ = 22.0


def make_synthetic_dataset(
    n_subjects: int = 4,
    trials_per_class: int = 12,
    fs: float = 128.0,
    duration_s: float = 4.0,
    seed: int = 0,
    tone_amp: float = 4.0,
    noise_std: float = 1.0,
) -> Dataset:
    rng = np.random.default_rng(seed)
    n_samples = round(fs * duration_s)
    t = np.arange(n_samples) / fs
    trials: list[TrialRecord] = []
    entries: list[SubjectEntry] = []
    for s in range(n_subjects):
        subject_id = f"S{s + 1:02d}"
        gain = rng.uniform(0.7, 1.3)
        labels = rng.permutation([0] * trials_per_class + [1] * trials_per_class)
        for i, label in enumerate(labels):
            data = rng.normal(0.0, noise_std, size=(len(CHANNELS), n_samples))
            f_c3 = LOW_TONE_HZ if label == 0 else HIGH_TONE_HZ
            f_c4 = HIGH_TONE_HZ if label == 0 else LOW_TONE_HZ
            data[0] += gain * tone_amp * np.sin(2 * np.pi * f_c3 * t + rng.uniform(0, 2 * np.pi))
            data[2] += gain * tone_amp * np.sin(2 * np.pi * f_c4 * t + rng.uniform(0, 2 * np.pi))
            trials.append(
                TrialRecord(
                    subject_id=subject_id,
                    trial_index=i,
                    data=data.astype(np.float32),
                    label=int(label),
                    fs=fs,
                )
            )
        entries.append(
            SubjectEntry(
                id=subject_id,
                data_file=f"{subject_id}_trials.bin",
                labels_file=f"{subject_id}_labels.txt",
                n_trials=2 * trials_per_class,
            )
        )
    manifest = DatasetManifest(
        format_version=1,
        sampling_rate_hz=fs,
        channels=CHANNELS,
        trial_duration_s=duration_s,
        subjects=tuple(entries),
    )
    return Dataset(manifest=manifest, trials=tuple(trials))


def write_synthetic_dataset(path, **kwargs) -> Dataset:
    """Generate a synthetic dataset and write it in the on-disk format."""
    ds = make_synthetic_dataset(**kwargs)
    write_dataset(ds, path)
    return ds
