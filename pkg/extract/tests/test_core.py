"""Measurement core: entropy math, family merging, record contract."""

import math

import numpy as np
import pytest

from realsamp_extract.core import (
    ExtractionError,
    ExtractionJob,
    entropy_and_surprisal,
    measure_family,
    measure_model,
    size_decay_summary,
    write_records,
)


class StubModel:
    """Deterministic scored model: logits depend only on the previous token."""

    def __init__(self, name, log_size, vocab, sharpness):
        self.name = name
        self._log_size = log_size
        self.vocab = vocab
        self.sharpness = sharpness

    @property
    def log_size(self):
        return self._log_size

    def next_token_logits(self, token_ids, window):
        rows = np.zeros((len(token_ids) - 1, self.vocab))
        for t in range(1, len(token_ids)):
            prev = token_ids[t - 1]
            rows[t - 1, (prev + 1) % self.vocab] = self.sharpness
        return rows


def stub_family():
    # sharper logits for bigger models: entropies decay with size
    return [
        StubModel("s", 10.0, 8, 0.5),
        StubModel("m", 12.0, 8, 2.0),
        StubModel("l", 14.0, 8, 5.0),
    ]


DOCS = {"d0": [0, 1, 2, 3, 4], "d1": [3, 3, 1]}


class TestEntropyMath:
    def test_matches_independent_recomputation(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            v = int(rng.integers(2, 30))
            logits = rng.normal(scale=3.0, size=(1, v))
            nxt = int(rng.integers(0, v))
            ents, sups = entropy_and_surprisal(logits, np.array([nxt]))
            # oracle: plain python softmax + summation
            exp = [math.exp(x - max(logits[0])) for x in logits[0]]
            probs = [e / sum(exp) for e in exp]
            h = -sum(p * math.log(p) for p in probs if p > 0)
            assert abs(ents[0] - h) <= 1e-4
            assert abs(sups[0] + math.log(probs[nxt])) <= 1e-10

    def test_surprisal_of_certain_token_is_zero(self):
        logits = np.array([[200.0, 0.0, 0.0]])
        ents, sups = entropy_and_surprisal(logits, np.array([0]))
        assert ents[0] == pytest.approx(0.0, abs=1e-12)
        assert sups[0] == pytest.approx(0.0, abs=1e-12)


class TestMeasurement:
    def test_positions_start_at_one(self):
        out = measure_model(stub_family()[0], DOCS, window=16)
        assert ("d0", 0) not in out
        assert set(k for k in out if k[0] == "d0") == {("d0", p) for p in (1, 2, 3, 4)}

    def test_deterministic(self):
        sizes1, rec1 = measure_family(stub_family(), DOCS)
        sizes2, rec2 = measure_family(stub_family(), DOCS)
        assert sizes1 == sizes2
        for a, b in zip(rec1, rec2):
            assert a.entropies == b.entropies
            assert a.surprisals == b.surprisals

    def test_entropy_decays_with_size_on_stub_family(self):
        _, records = measure_family(stub_family(), DOCS)
        matrix = np.asarray([r.entropies for r in records])
        assert np.all(np.diff(matrix, axis=1) < 0)

    def test_shrinking_sizes_rejected(self):
        models = stub_family()
        models[2]._log_size = 9.0
        with pytest.raises(ExtractionError):
            measure_family(models, DOCS)

    def test_single_token_documents_skipped(self):
        docs = {"short": [5], **DOCS}
        _, records = measure_family(stub_family(), docs)
        assert all(r.context_id != "short" for r in records)

    def test_job_validation(self):
        with pytest.raises(ExtractionError):
            ExtractionJob(models=("a", "b"), corpus_path="x", output_path="y")


class TestRecordContract:
    def test_written_records_load_in_primary_toolkit(self, tmp_path):
        realsamp_io = pytest.importorskip("realsamp.recordio")
        sizes, records = measure_family(stub_family(), DOCS)
        path = tmp_path / "records.jsonl"
        write_records(path, sizes, records, labels=["s", "m", "l"], corpus_name="stub")
        header, profiles = realsamp_io.read_records(path)
        assert header.family.count == 3
        assert header.family.labels == ("s", "m", "l")
        assert len(profiles) == len(records)
        for profile, rec in zip(profiles, records):
            assert profile.context_id == rec.context_id
            np.testing.assert_array_equal(profile.entropies, rec.entropies)
            np.testing.assert_array_equal(profile.surprisals, rec.surprisals)

    def test_two_model_family_rejected_by_primary_fitter(self, tmp_path):
        realsamp_io = pytest.importorskip("realsamp.recordio")
        from realsamp.errors import RealsampError

        sizes, records = measure_family(stub_family()[:2], DOCS)
        path = tmp_path / "records2.jsonl"
        write_records(path, sizes, records)
        with pytest.raises(RealsampError):
            realsamp_io.read_records(path)  # a 2-size family breaks the N >= 3 contract


class TestSummary:
    def test_decay_summary_fields(self):
        sizes, records = measure_family(stub_family(), DOCS)
        summary = size_decay_summary(sizes, records)
        assert summary["strictly_decreasing_mean"]
        assert summary["share_smallest_above_largest"] == 1.0
        assert summary["positions"] == len(records)
