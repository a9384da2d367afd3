"""Pool ingestion, embedding tables, and vocabulary normalization."""

import json

import numpy as np
import pytest

from infogain.errors import EmbeddingFormatError, PoolFormatError, ValidationError
from infogain.pool import (
    DROPPED,
    LabelEmbeddings,
    LabelVocabulary,
    Pool,
    apply_remap,
    load_embeddings,
    load_pool,
    normalize_labels,
    pool_after_remap,
    remap_embeddings,
    write_embeddings,
    write_pool,
    write_remap,
)

from conftest import make_pool


def write_lines(path, lines):
    path.write_bytes(b"".join(line.encode() + b"\n" for line in lines))
    return path


class TestLoadPool:
    def test_three_line_file(self, tmp_path):
        """Labels {math}, {code,math}, {code} -> 3 points, K=2, each label twice."""
        path = write_lines(
            tmp_path / "pool.jsonl",
            [
                '{"id": "a", "labels": ["math"], "quality": 1.0}',
                '{"id": "b", "labels": ["code", "math"], "quality": 2.0}',
                '{"id": "c", "labels": ["code"], "quality": 0.5}',
            ],
        )
        pool = load_pool(path)
        assert len(pool.points) == 3
        assert pool.vocab.labels == ("math", "code")
        assert dict(zip(pool.vocab.labels, pool.vocab.frequency.tolist())) == {
            "math": 2,
            "code": 2,
        }

    def test_negative_quality_names_the_record(self, tmp_path):
        path = write_lines(
            tmp_path / "pool.jsonl",
            ['{"id": "bad-one", "labels": ["x"], "quality": -1}'],
        )
        with pytest.raises(ValidationError, match="bad-one"):
            load_pool(path)

    def test_duplicate_id_rejected(self, tmp_path):
        path = write_lines(
            tmp_path / "pool.jsonl",
            [
                '{"id": "a", "labels": ["x"], "quality": 1}',
                '{"id": "a", "labels": ["y"], "quality": 1}',
            ],
        )
        with pytest.raises(PoolFormatError, match="duplicate"):
            load_pool(path)

    def test_invalid_json_reports_line_number(self, tmp_path):
        path = write_lines(
            tmp_path / "pool.jsonl",
            ['{"id": "a", "labels": ["x"], "quality": 1}', "{nope"],
        )
        with pytest.raises(PoolFormatError, match="line 2"):
            load_pool(path)

    def test_blank_lines_skipped(self, tmp_path):
        path = write_lines(
            tmp_path / "pool.jsonl",
            ['{"id": "a", "labels": ["x"], "quality": 1}', "", ""],
        )
        assert len(load_pool(path).points) == 1

    def test_zero_label_records_counted_not_kept(self, tmp_path):
        path = write_lines(
            tmp_path / "pool.jsonl",
            [
                '{"id": "a", "labels": [], "quality": 1}',
                '{"id": "b", "labels": ["x"], "quality": 1}',
            ],
        )
        pool = load_pool(path)
        assert [p.id for p in pool.points] == ["b"]
        assert pool.n_skipped_empty == 1

    def test_labels_casefold_to_first_spelling(self):
        pool = make_pool([("a", ["Math"], 1.0), ("b", ["math", "MATH"], 1.0)])
        assert pool.vocab.labels == ("Math",)
        assert pool.points[1].labels == (0,)
        assert pool.vocab.frequency.tolist() == [2]

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValidationError, match="jsonl"):
            load_pool(tmp_path / "x.parquet", fmt="parquet")

    def test_missing_field_is_an_error(self, tmp_path):
        path = write_lines(tmp_path / "p.jsonl", ['{"id": "a", "labels": ["x"]}'])
        with pytest.raises(PoolFormatError, match="quality"):
            load_pool(path)


class TestPayloadPassthrough:
    def test_extra_fields_survive_write(self, tmp_path):
        """Unknown record fields ride along untouched through select/write."""
        record = {"id": "a", "labels": ["x"], "quality": 1.0,
                  "messages": [{"role": "user", "content": "hi"}], "source": "web"}
        path = write_lines(tmp_path / "p.jsonl", [json.dumps(record)])
        pool = load_pool(path)
        out = tmp_path / "out.jsonl"
        write_pool(pool.points, out)
        round_tripped = json.loads(out.read_text().strip())
        assert round_tripped == record

    def test_rewrite_is_byte_stable(self, tmp_path):
        pool = make_pool([("a", ["x", "y"], 1.5), ("b", ["y"], 2.0)])
        first, second = tmp_path / "1.jsonl", tmp_path / "2.jsonl"
        write_pool(pool.points, first)
        write_pool(load_pool(first).points, second)
        assert first.read_bytes() == second.read_bytes()


class TestVocabulary:
    def test_rejects_duplicates_after_casefold(self):
        with pytest.raises(ValidationError):
            LabelVocabulary(labels=("A", "a"), frequency=np.array([1, 1]))

    def test_sha256_changes_with_content(self):
        va = LabelVocabulary(labels=("a", "b"), frequency=np.array([1, 1]))
        vb = LabelVocabulary(labels=("a", "c"), frequency=np.array([1, 1]))
        assert va.sha256() != vb.sha256()

    def test_contains_and_lookup_casefold(self):
        vocab = LabelVocabulary(labels=("Math",), frequency=np.array([3]))
        assert "math" in vocab
        assert vocab.index_of("MATH") == 0


class TestEmbeddings:
    def test_two_row_table(self, tmp_path):
        path = write_lines(tmp_path / "e.emb", ["2 2", "1.0 0.0", "0.0 1.0"])
        table = load_embeddings(path)
        assert table.n_labels == 2 and table.dim == 2

    def test_row_count_mismatch(self, tmp_path):
        path = write_lines(tmp_path / "e.emb", ["2 2", "1 0", "0 1", "1 1"])
        with pytest.raises(EmbeddingFormatError, match="row"):
            load_embeddings(path)

    def test_zero_vector_rejected(self, tmp_path):
        path = write_lines(tmp_path / "e.emb", ["2 2", "1 0", "0 0"])
        with pytest.raises(EmbeddingFormatError, match="zero"):
            load_embeddings(path)

    def test_non_numeric_cell(self, tmp_path):
        path = write_lines(tmp_path / "e.emb", ["1 2", "1 apple"])
        with pytest.raises(EmbeddingFormatError):
            load_embeddings(path)

    def test_sidecar_order_must_match_vocab(self, tmp_path):
        path = write_lines(tmp_path / "e.emb", ["2 2", "1 0", "0 1"])
        write_lines(tmp_path / "e.emb.labels", ["beta", "alpha"])
        vocab = LabelVocabulary(labels=("alpha", "beta"), frequency=np.array([1, 1]))
        with pytest.raises(EmbeddingFormatError, match="alpha"):
            load_embeddings(path, vocab=vocab)

    def test_write_read_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        table = LabelEmbeddings(rng.standard_normal((5, 3)))
        path = tmp_path / "e.emb"
        write_embeddings(table, path, labels=["a", "b", "c", "d", "e"])
        back = load_embeddings(path)
        np.testing.assert_array_equal(back.vectors, table.vectors)

    def test_unit_vectors_have_unit_norm(self):
        rng = np.random.default_rng(1)
        table = LabelEmbeddings(rng.standard_normal((8, 4)) * 3.0)
        np.testing.assert_allclose(
            np.linalg.norm(table.unit_vectors, axis=1), 1.0, atol=1e-12
        )


class TestNormalize:
    def two_label_pool(self, freq_a=5, freq_b=1):
        rows = [(f"a{i}", ["a"], 1.0) for i in range(freq_a)]
        rows += [(f"b{i}", ["b"], 1.0) for i in range(freq_b)]
        return make_pool(rows)

    def test_min_freq_drops_rare_labels(self):
        pool = self.two_label_pool(freq_a=5, freq_b=1)
        table = LabelEmbeddings(np.array([[1.0, 0.0], [0.0, 1.0]]))
        vocab, remap = normalize_labels(pool.vocab, table, min_freq=2)
        assert vocab.labels == ("a",)
        assert remap.pairs() == [("a", 0), ("b", DROPPED)]

    def test_identical_embeddings_merge_into_frequent_label(self):
        pool = self.two_label_pool(freq_a=3, freq_b=2)
        table = LabelEmbeddings(np.array([[1.0, 0.0], [1.0, 0.0]]))
        vocab, remap = normalize_labels(pool.vocab, table, merge_sim=0.99)
        assert vocab.labels == ("a",)
        assert remap.pairs() == [("a", 0), ("b", 0)]
        assert vocab.frequency.tolist() == [5]

    def test_merge_is_idempotent(self):
        """Survivors are pairwise below the merge threshold, so a second
        pass changes nothing."""
        rng = np.random.default_rng(7)
        centers = rng.standard_normal((6, 8))
        rows = centers[np.arange(18) % 6] + 0.01 * rng.standard_normal((18, 8))
        labels = tuple(f"t{i}" for i in range(18))
        vocab = LabelVocabulary(labels=labels, frequency=rng.integers(1, 9, size=18))
        table = LabelEmbeddings(rows)
        vocab2, remap = normalize_labels(vocab, table, merge_sim=0.95)
        table2 = remap_embeddings(table, remap)
        vocab3, remap2 = normalize_labels(vocab2, table2, merge_sim=0.95)
        assert vocab3.labels == vocab2.labels
        assert remap2.n_dropped == 0
        assert all(new == i for i, (_, new) in enumerate(remap2.pairs()))

    def test_apply_remap_relabels_and_drops(self):
        pool = make_pool(
            [("p", ["a", "b"], 1.0), ("q", ["b"], 2.0), ("r", ["a"], 1.0), ("s", ["a"], 1.0)]
        )
        table = LabelEmbeddings(np.array([[1.0, 0.0], [0.0, 1.0]]))
        vocab, remap = normalize_labels(pool.vocab, table, min_freq=3)
        assert vocab.labels == ("a",)
        points, emptied = apply_remap(pool.points, remap)
        assert emptied == 1  # q carried only the dropped label
        assert [p.id for p in points] == ["p", "r", "s"]
        assert points[0].labels == (0,)

    def test_pool_after_remap_recounts_frequencies(self):
        pool = make_pool(
            [("p", ["a", "b"], 1.0), ("q", ["b"], 2.0), ("r", ["a"], 1.0)]
        )
        table = LabelEmbeddings(np.array([[1.0, 0.0], [1.0, 0.0]]))
        merged = pool_after_remap(pool, normalize_labels(pool.vocab, table, merge_sim=0.99)[1])
        # a and b collapse; each point now carries the single merged label once
        assert merged.vocab.frequency.tolist() == [3]

    def test_write_remap_table(self, tmp_path):
        pool = self.two_label_pool(freq_a=5, freq_b=1)
        table = LabelEmbeddings(np.array([[1.0, 0.0], [0.0, 1.0]]))
        _, remap = normalize_labels(pool.vocab, table, min_freq=2)
        out = tmp_path / "remap.tsv"
        write_remap(remap, out)
        lines = out.read_text().splitlines()
        assert lines == ['"a"\t"a"', '"b"\tDROPPED']


class TestAtScale:
    def test_pool_of_939k_records(self, tmp_path):
        """Ingestion at the size of a large instruction-tuning pool."""
        path = tmp_path / "big.jsonl"
        with open(path, "w") as handle:
            for i in range(939_000):
                handle.write(
                    '{"id":"r%07d","labels":["t%d","t%d"],"quality":%d.5}\n'
                    % (i, i % 2000, (i * 7) % 2000, i % 6)
                )
        pool = load_pool(path)
        assert len(pool.points) == 939_000
        assert len(pool.vocab) == 2000

    def test_merge_shrinks_9471_tags_to_midband(self):
        """A raw vocabulary of 9471 clustered tags lands in the 4-6K range
        after similarity merging."""
        rng = np.random.default_rng(42)
        n_raw, n_groups = 9471, 4900
        centers = rng.standard_normal((n_groups, 32))
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
        group = np.arange(n_raw) % n_groups
        rows = centers[group] + 0.01 * rng.standard_normal((n_raw, 32))
        vocab = LabelVocabulary(
            labels=tuple(f"tag{i}" for i in range(n_raw)),
            frequency=rng.integers(1, 50, size=n_raw),
        )
        vocab2, remap = normalize_labels(vocab, LabelEmbeddings(rows), merge_sim=0.95)
        assert 4000 <= len(vocab2) <= 6000
        assert remap.n_dropped == 0
        assert int(vocab2.frequency.sum()) == int(vocab.frequency.sum())
