"""Balanced and unbalanced batch construction."""

import numpy as np
import pytest

from tfoc.batching import InputSet, balanced_batches, unbalanced_batches


def make_set(counts: dict[str, int], f=4, w=3, seed=0) -> InputSet:
    rng = np.random.default_rng(seed)
    inputs, labels, prov = [], [], []
    for subject, n in counts.items():
        for i in range(n):
            inputs.append(rng.normal(size=(f, w, 1)))
            labels.append(i % 2)
            prov.append((subject, i))
    return InputSet(
        inputs=np.stack(inputs).astype(np.float32),
        labels=np.array(labels),
        provenance=tuple(prov),
    )


class TestBalancedBatches:
    def test_eight_subjects_per_subject_four_gives_batch_32(self):
        data = make_set({f"S{i}": 20 for i in range(8)})
        batches = balanced_batches(data, per_subject=4, seed=0)
        assert len(batches) == 5
        for b in batches:
            assert len(b.labels) == 32
            per = {}
            for subject, _ in b.provenance:
                per[subject] = per.get(subject, 0) + 1
            assert all(v == 4 for v in per.values()) and len(per) == 8

    def test_epoch_length_floor_of_min_count(self):
        data = make_set({"A": 200, "B": 200, "C": 200, "D": 200})
        batches = balanced_batches(data, per_subject=4, seed=1)
        assert len(batches) == 50
        assert all(len(b.labels) == 16 for b in batches)

    def test_remainder_trials_dropped(self):
        data = make_set({"A": 20, "B": 23, "C": 21})
        batches = balanced_batches(data, per_subject=4, seed=2)
        assert len(batches) == 5  # floor(20/4)
        used = [p for b in batches for p in b.provenance]
        assert len(used) == 5 * 12
        dropped = set(data.provenance) - set(used)
        assert len(dropped) == 4  # 0 + 3 + 1 across the three subjects
        per_subject_used = {s: 0 for s in "ABC"}
        for subject, _ in used:
            per_subject_used[subject] += 1
        assert per_subject_used == {"A": 20, "B": 20, "C": 20}

    def test_no_duplicates_within_epoch(self):
        data = make_set({"A": 9, "B": 13})
        batches = balanced_batches(data, per_subject=2, seed=3)
        used = [p for b in batches for p in b.provenance]
        assert len(used) == len(set(used))

    def test_reshuffles_with_seed(self):
        data = make_set({"A": 8, "B": 8})
        a = balanced_batches(data, per_subject=2, seed=4)
        b = balanced_batches(data, per_subject=2, seed=4)
        c = balanced_batches(data, per_subject=2, seed=5)
        assert [x.provenance for x in a] == [x.provenance for x in b]
        assert [x.provenance for x in a] != [x.provenance for x in c]

    def test_subject_below_quota_rejected(self):
        data = make_set({"A": 3, "B": 8})
        with pytest.raises(ValueError, match="'A'"):
            balanced_batches(data, per_subject=4, seed=0)

    def test_batch_arrays_match_provenance(self):
        data = make_set({"A": 6, "B": 6})
        for batch in balanced_batches(data, per_subject=3, seed=6):
            for row, (subject, idx) in enumerate(batch.provenance):
                src = data.provenance.index((subject, idx))
                assert np.array_equal(batch.inputs[row], data.inputs[src])
                assert batch.labels[row] == data.labels[src]


class TestUnbalancedBatches:
    def test_chunk_sizes_keep_last_short(self):
        data = make_set({"A": 100})
        batches = unbalanced_batches(data, batch_size=32, seed=0)
        assert [len(b.labels) for b in batches] == [32, 32, 32, 4]

    def test_seed_determinism(self):
        data = make_set({"A": 20, "B": 15})
        a = unbalanced_batches(data, batch_size=8, seed=1)
        b = unbalanced_batches(data, batch_size=8, seed=1)
        assert [x.provenance for x in a] == [x.provenance for x in b]

    def test_batch_size_one_gives_singletons(self):
        data = make_set({"A": 100})
        batches = unbalanced_batches(data, batch_size=1, seed=2)
        assert len(batches) == 100
        assert all(len(b.labels) == 1 for b in batches)

    def test_covers_every_trial_exactly_once(self):
        data = make_set({"A": 17, "B": 5})
        batches = unbalanced_batches(data, batch_size=6, seed=3)
        used = [p for b in batches for p in b.provenance]
        assert sorted(used) == sorted(data.provenance)
