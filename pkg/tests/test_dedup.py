"""Near-duplicate index: cosine math, boundary semantics, snapshots."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convoforge.dedup import (
    DedupDecision,
    EmbeddingVector,
    QuestionIndex,
    cosine_similarity,
    find_violations,
    load_index,
    save_index,
)


def vec(*values) -> EmbeddingVector:
    return EmbeddingVector.from_iterable(values)


class TestCosine:
    def test_known_value(self):
        # dot 8, norms 3 and 3
        assert cosine_similarity(vec(1, 2, 2), vec(2, 1, 2)) == pytest.approx(8 / 9)

    def test_identical_vectors(self):
        assert cosine_similarity(vec(0.3, -0.4, 0.5), vec(0.3, -0.4, 0.5)) == pytest.approx(1.0)

    def test_orthogonal_vectors(self):
        assert cosine_similarity(vec(1, 0), vec(0, 1)) == pytest.approx(0.0)

    def test_opposite_vectors(self):
        assert cosine_similarity(vec(1, 1), vec(-1, -1)) == pytest.approx(-1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            cosine_similarity(vec(1, 2), vec(1, 2, 3))

    def test_zero_vector_rejected_at_construction(self):
        with pytest.raises(ValueError):
            EmbeddingVector.from_iterable([])
        with pytest.raises(ValueError):
            EmbeddingVector.from_iterable([float("nan")])

    @given(
        st.lists(
            st.floats(min_value=-100, max_value=100).filter(
                lambda v: v == 0 or abs(v) > 1e-6
            ),
            min_size=2,
            max_size=16,
        ),
        st.floats(min_value=0.01, max_value=50),
    )
    def test_scale_invariance(self, values, scale):
        if not any(values):
            values[0] = 1.0
        a = EmbeddingVector.from_iterable(values)
        b = EmbeddingVector.from_iterable([v * scale for v in values])
        assert cosine_similarity(a, b) == pytest.approx(1.0, abs=1e-9)


class TestIndexBoundary:
    def test_first_entry_always_accepted(self):
        index = QuestionIndex(threshold=0.8)
        decision = index.check_and_insert("a", vec(1, 0))
        assert decision == DedupDecision(accepted=True)
        assert len(index) == 1

    def test_exactly_at_threshold_is_accepted(self):
        # cos((1,0), (4,3)) = 4/5 = 0.8 exactly: not strictly above
        index = QuestionIndex(threshold=0.8)
        index.check_and_insert("a", vec(1, 0))
        decision = index.check_and_insert("b", vec(4, 3))
        assert decision.accepted
        assert decision.nearest_id == "a"
        assert decision.nearest_similarity == pytest.approx(0.8)
        assert len(index) == 2

    def test_barely_above_threshold_is_rejected(self):
        index = QuestionIndex(threshold=0.8)
        index.check_and_insert("a", vec(1, 0))
        decision = index.check_and_insert("b", vec(4.000001, 3))
        assert not decision.accepted
        assert decision.nearest_id == "a"
        assert len(index) == 1  # rejected vector must not enter the index

    def test_rejection_names_nearest_neighbor(self):
        index = QuestionIndex(threshold=0.8)
        index.check_and_insert("u", vec(1.0, 0.0))
        index.check_and_insert("v", vec(0.0, 1.0))
        decision = index.check_and_insert("w", vec(1.0, 0.1))
        assert not decision.accepted
        assert decision.nearest_id == "u"
        assert decision.nearest_similarity > 0.8

    def test_tie_reports_earliest_inserted(self):
        index = QuestionIndex(threshold=0.99)
        index.check_and_insert("first", vec(1, 0, 0))
        index.check_and_insert("second", vec(1, 0, 0.05))
        # equidistant from both stored entries by symmetry
        decision = index.check_and_insert("probe", vec(-1, 0, 0))
        assert decision.nearest_id == "first"

    def test_duplicate_id_rejected(self):
        index = QuestionIndex()
        index.check_and_insert("a", vec(1, 0))
        with pytest.raises(ValueError, match="a"):
            index.check_and_insert("a", vec(0, 1))

    def test_dimension_locked_by_first_entry(self):
        index = QuestionIndex()
        index.check_and_insert("a", vec(1, 0, 0))
        with pytest.raises(ValueError, match="dimension"):
            index.check_and_insert("b", vec(1, 0))

    def test_threshold_fixed_at_construction(self):
        index = QuestionIndex(threshold=0.5)
        assert index.threshold == 0.5
        with pytest.raises(AttributeError):
            index.threshold = 0.9

    @pytest.mark.parametrize("bad", [0.0, -0.2, 1.5])
    def test_threshold_domain(self, bad):
        with pytest.raises(ValueError):
            QuestionIndex(threshold=bad)


class TestSnapshot:
    def test_round_trip_is_exact(self, tmp_path):
        index = QuestionIndex(threshold=0.8)
        rng = random.Random(7)
        for i in range(25):
            index.add_unchecked(f"id-{i}", vec(*(rng.uniform(-1, 1) for _ in range(12))))
        path = tmp_path / "index.tsv"
        save_index(index, path)
        loaded = load_index(path, threshold=0.8)
        assert loaded.entries() == index.entries()  # repr round-trip: bit-identical

    def test_snapshot_format(self, tmp_path):
        index = QuestionIndex()
        index.add_unchecked("qa-1", vec(0.5, -1.25))
        path = tmp_path / "index.tsv"
        save_index(index, path)
        assert path.read_text(encoding="utf-8") == "qa-1\t0.5 -1.25\n"

    def test_malformed_line_names_line_number(self, tmp_path):
        path = tmp_path / "index.tsv"
        path.write_text("qa-1\t0.5 1.0\nnot a valid line\n", encoding="utf-8")
        with pytest.raises(ValueError, match="2"):
            load_index(path)


class TestFindViolations:
    def test_clean_index_has_none(self):
        index = QuestionIndex(threshold=0.8)
        index.check_and_insert("a", vec(1, 0))
        index.check_and_insert("b", vec(0, 1))
        assert find_violations(index) == []

    def test_bulk_loaded_duplicates_are_caught(self):
        index = QuestionIndex(threshold=0.8)
        index.add_unchecked("a", vec(1, 0))
        index.add_unchecked("b", vec(1, 0.01))
        violations = find_violations(index)
        assert len(violations) == 1
        id_a, id_b, sim = violations[0]
        assert {id_a, id_b} == {"a", "b"}
        assert sim > 0.8


def brute_force_nearest(entries, probe: EmbeddingVector):
    """Independent reference: nearest stored entry by cosine, ties to earliest."""
    best_id, best_sim = None, -math.inf
    for entry_id, stored in entries:
        sim = cosine_similarity(stored, probe)
        if sim > best_sim:
            best_id, best_sim = entry_id, sim
    return best_id, best_sim


@settings(deadline=None, max_examples=10)
@given(st.data())
def test_index_matches_brute_force(data):
    """Randomized equivalence with an exact linear scan.

    Ten hypothesis examples at up to a few hundred vectors each, plus
    the dedicated acceptance sweep, keep the decision path honest for
    odd dimensions and thresholds.
    """
    dim = data.draw(st.integers(min_value=8, max_value=96), label="dim")
    count = data.draw(st.integers(min_value=2, max_value=200), label="count")
    threshold = data.draw(st.floats(min_value=0.1, max_value=0.99), label="threshold")
    seed = data.draw(st.integers(min_value=0, max_value=2**32 - 1), label="seed")

    rng = np.random.default_rng(seed)
    vectors = [
        EmbeddingVector.from_iterable(rng.standard_normal(dim).tolist())
        for _ in range(count)
    ]
    index = QuestionIndex(threshold=threshold)
    accepted: list[tuple[str, EmbeddingVector]] = []
    for i, vector in enumerate(vectors):
        expected_id, expected_sim = brute_force_nearest(accepted, vector)
        decision = index.check_and_insert(f"v{i}", vector)
        if expected_id is None:
            assert decision.accepted
        else:
            assert decision.nearest_id == expected_id
            assert decision.nearest_similarity == pytest.approx(expected_sim, abs=1e-9)
            assert decision.accepted == (expected_sim <= threshold)
        if decision.accepted:
            accepted.append((f"v{i}", vector))
    assert len(index) == len(accepted)
