"""Prepared input sets and the two batch construction strategies.

Balanced batching draws the same per-subject quota into every batch so
each update sees every training subject; the unbalanced variant is the
plain shuffled-chunk baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class InputSet:
    """Network-ready trials: stacked inputs, labels, and per-trial identity."""

    inputs: np.ndarray  # (N, F, W, 1)
    labels: np.ndarray  # (N,)
    provenance: tuple[tuple[str, int], ...]  # (subject_id, trial_index)

    def __len__(self):
        return len(self.labels)

    def subset(self, indices) -> "InputSet":
        indices = np.asarray(indices, dtype=int)
        return InputSet(
            inputs=self.inputs[indices],
            labels=self.labels[indices],
            provenance=tuple(self.provenance[i] for i in indices),
        )

    def by_subject(self) -> dict[str, list[int]]:
        groups: dict[str, list[int]] = {}
        for i, (subject, _) in enumerate(self.provenance):
            groups.setdefault(subject, []).append(i)
        return groups


@dataclass(frozen=True, eq=False)
class Batch:
    inputs: np.ndarray
    labels: np.ndarray
    provenance: tuple[tuple[str, int], ...]


def balanced_batches(data: InputSet, per_subject: int, seed: int) -> list[Batch]:
    """One epoch of balanced batches.

    Every batch holds exactly ``per_subject`` trials from every subject
    (size = n_subjects * per_subject), drawn without replacement within
    the epoch. The epoch has floor(min_subject_count / per_subject)
    batches; remainder trials are dropped for this epoch. Callers
    reshuffle across epochs by varying the seed (seed + epoch).
    """
    if per_subject < 1:
        raise ValueError(f"per_subject must be >= 1, got {per_subject}")
    groups = data.by_subject()
    if not groups:
        raise ValueError("no trials to batch")
    for subject in sorted(groups):
        if len(groups[subject]) < per_subject:
            raise ValueError(
                f"subject {subject!r} has only {len(groups[subject])} trials, "
                f"needs at least per_subject={per_subject}"
            )
    rng = np.random.default_rng(seed)
    subjects = sorted(groups)
    shuffled = {
        s: [groups[s][j] for j in rng.permutation(len(groups[s]))] for s in subjects
    }
    n_batches = min(len(groups[s]) // per_subject for s in subjects)
    batches = []
    for b in range(n_batches):
        idx = []
        for s in subjects:
            idx.extend(shuffled[s][b * per_subject : (b + 1) * per_subject])
        batches.append(
            Batch(
                inputs=data.inputs[idx],
                labels=data.labels[idx],
                provenance=tuple(data.provenance[i] for i in idx),
            )
        )
    return batches


def unbalanced_batches(data: InputSet, batch_size: int, seed: int) -> list[Batch]:
    """Uniformly shuffled fixed-size chunks; the last short chunk is kept."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(data))
    batches = []
    for start in range(0, len(data), batch_size):
        idx = order[start : start + batch_size]
        batches.append(
            Batch(
                inputs=data.inputs[idx],
                labels=data.labels[idx],
                provenance=tuple(data.provenance[i] for i in idx),
            )
        )
    return batches
