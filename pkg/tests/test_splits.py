from __future__ import annotations

from collections import Counter

import numpy as np
import pytest

from dropsplit.features import VectorCache, feature_vector, vector_at_end, vector_at_last
from dropsplit.records import subset_exited_before, subset_exited_from, truncate_records
from dropsplit.splits import (
    SplitApproach,
    SplitError,
    SplitRequest,
    build_split,
    split_A,
    split_B1,
    split_B2,
    split_B2T,
    split_B3T,
    split_B4T,
)
from dropsplit.terms import Term, term_distance

T_MID = Term(2012, 1)


def included_train_students(cohort, t):
    """Students exited before t with more than one active term (the closed-form oracle)."""
    return [s for s in subset_exited_before(cohort, t) if s.last > s.entrance]


class TestSplitA:
    def test_sizes_match_source_populations(self, medium_synth):
        train, test = split_A(medium_synth, T_MID, seed=1)
        before = subset_exited_before(medium_synth, T_MID)
        onward = subset_exited_from(medium_synth, T_MID)
        assert train.n == len(before)
        assert test.n == len(onward)
        assert not train.student_ids & test.student_ids
        pool = {s.student_id for s in before} | {s.student_id for s in onward}
        assert train.student_ids | test.student_ids == pool

    def test_same_seed_same_partition(self, medium_synth):
        first = split_A(medium_synth, T_MID, seed=99)
        second = split_A(medium_synth, T_MID, seed=99)
        assert first[0].rows == second[0].rows
        assert np.array_equal(first[0].X, second[0].X)
        assert first[1].rows == second[1].rows

    def test_different_seed_different_partition(self, medium_synth):
        a = split_A(medium_synth, T_MID, seed=1)
        b = split_A(medium_synth, T_MID, seed=2)
        assert a[0].student_ids != b[0].student_ids

    def test_rows_use_full_history_vectors(self, medium_synth):
        cache = VectorCache(medium_synth)
        train, test = split_A(medium_synth, T_MID, seed=5)
        by_id = {s.student_id: s for s in medium_synth.students}
        for ds in (train, test):
            for i, (sid, as_of) in enumerate(ds.rows):
                expected = cache.at_end(by_id[sid])
                assert as_of == expected.as_of
                assert tuple(ds.X[i]) == expected.values

    def test_train_membership_frequency_is_uniform(self, tiny_cohort):
        # 5 exited students at 2014.1, train side picks 3, so every student
        # should land in train with frequency 3/5 give or take sampling noise.
        t = Term(2014, 1)
        counts: Counter[str] = Counter()
        n_seeds = 1000
        for seed in range(n_seeds):
            train, _ = split_A(tiny_cohort, t, seed=seed)
            counts.update(train.student_ids)
        reference, _ = split_A(tiny_cohort, t, seed=0)
        pool = len(subset_exited_before(tiny_cohort, t)) + len(subset_exited_from(tiny_cohort, t))
        assert pool == 5
        expected = reference.n / pool
        assert set(counts) == {"alice", "bob", "carol", "erin", "frank"}
        for sid, hits in counts.items():
            assert abs(hits / n_seeds - expected) < 0.05, sid

    def test_empty_side_raises(self, medium_synth):
        with pytest.raises(SplitError, match="exited before"):
            split_A(medium_synth, medium_synth.range.lo, seed=0)


class TestSplitB1:
    def test_membership_is_temporal(self, medium_synth):
        train, test = split_B1(medium_synth, T_MID)
        before = {s.student_id for s in subset_exited_before(medium_synth, T_MID)}
        onward = {s.student_id for s in subset_exited_from(medium_synth, T_MID)}
        assert train.student_ids == before
        assert test.student_ids == onward

    def test_pool_equals_split_a_pool(self, medium_synth):
        a_train, a_test = split_A(medium_synth, T_MID, seed=3)
        b_train, b_test = split_B1(medium_synth, T_MID)
        assert a_train.student_ids | a_test.student_ids == b_train.student_ids | b_test.student_ids

    def test_counts_match_subset_oracle(self, medium_synth):
        for t in [Term(2011, 1), T_MID, Term(2013, 2)]:
            train, test = split_B1(medium_synth, t)
            assert train.n == len(subset_exited_before(medium_synth, t))
            assert test.n == len(subset_exited_from(medium_synth, t))


class TestSplitB2:
    def test_excludes_single_term_students_both_sides(self, medium_synth):
        b1_train, b1_test = split_B1(medium_synth, T_MID)
        b2_train, b2_test = split_B2(medium_synth, T_MID)
        single_before = [s for s in subset_exited_before(medium_synth, T_MID) if s.last == s.entrance]
        single_onward = [s for s in subset_exited_from(medium_synth, T_MID) if s.last == s.entrance]
        assert b2_train.n == b1_train.n - len(single_before)
        assert b2_test.n == b1_test.n - len(single_onward)
        reasons = {e.reason for ds in (b2_train, b2_test) for e in ds.meta.exclusions}
        if single_before or single_onward:
            assert reasons == {"single_term_history"}

    def test_rows_match_per_student_recomputation(self, medium_synth):
        train, test = split_B2(medium_synth, T_MID)
        by_id = {s.student_id: s for s in medium_synth.students}
        for ds in (train, test):
            for i, (sid, as_of) in enumerate(ds.rows):
                expected = vector_at_last(by_id[sid])
                assert as_of == expected.as_of
                assert tuple(ds.X[i]) == expected.values

    def test_test_rows_can_use_post_reference_records(self, medium_synth):
        # The documented leak: a student still active at T contributes a test
        # row whose window extends past T.
        _, test = split_B2(medium_synth, T_MID)
        by_id = {s.student_id: s for s in medium_synth.students}
        assert any(by_id[sid].last > T_MID for sid, _ in test.rows)


class TestSplitB2T:
    def test_test_rows_pinned_at_reference(self, medium_synth):
        _, test = split_B2T(medium_synth, T_MID)
        assert all(as_of == T_MID for _, as_of in test.rows)

    def test_train_identical_to_b2_train(self, medium_synth):
        b2_train, _ = split_B2(medium_synth, T_MID)
        b2t_train, _ = split_B2T(medium_synth, T_MID)
        assert b2_train.rows == b2t_train.rows
        assert np.array_equal(b2_train.X, b2t_train.X)

    def test_exclusion_reasons(self, medium_synth):
        _, test = split_B2T(medium_synth, T_MID)
        onward = subset_exited_from(medium_synth, T_MID)
        excluded = {e.student_id for e in test.meta.exclusions}
        assert test.n + len(excluded) == len(onward)
        for e in test.meta.exclusions:
            assert e.reason in ("starts_at_reference_term", "no_records_before_reference")

    def test_test_count_does_not_exceed_b2(self, medium_synth):
        for t in [Term(2011, 2), T_MID, Term(2013, 1)]:
            _, b2_test = split_B2(medium_synth, t)
            _, b2t_test = split_B2T(medium_synth, t)
            assert b2t_test.n <= b2_test.n

    def test_rows_survive_truncation(self, medium_synth):
        # The no-leakage property: rebuild from a cohort truncated at T.
        original_train, original_test = split_B2T(medium_synth, T_MID)
        cut = truncate_records(medium_synth, T_MID)
        _, cut_test = split_B2T(cut, T_MID)
        assert original_test.rows == cut_test.rows
        assert np.array_equal(original_test.X, cut_test.X)


class TestSplitB3T:
    def test_row_count_closed_form(self, medium_synth):
        train, _ = split_B3T(medium_synth, T_MID)
        expected = sum(
            term_distance(s.entrance, s.last) for s in included_train_students(medium_synth, T_MID)
        )
        assert train.n == expected

    def test_b2_train_rows_are_a_subset(self, medium_synth):
        b2_train, _ = split_B2(medium_synth, T_MID)
        b3t_train, _ = split_B3T(medium_synth, T_MID)
        b3t_rows = set(b3t_train.rows)
        b3t_values = {row: tuple(b3t_train.X[i]) for i, row in enumerate(b3t_train.rows)}
        for i, row in enumerate(b2_train.rows):
            assert row in b3t_rows
            assert tuple(b2_train.X[i]) == b3t_values[row]

    def test_test_identical_to_b2t(self, medium_synth):
        _, b2t_test = split_B2T(medium_synth, T_MID)
        _, b3t_test = split_B3T(medium_synth, T_MID)
        assert b2t_test.rows == b3t_test.rows
        assert np.array_equal(b2t_test.X, b3t_test.X)


class TestSplitB4T:
    def test_adds_one_row_per_included_student(self, medium_synth):
        b3t_train, _ = split_B3T(medium_synth, T_MID)
        b4t_train, _ = split_B4T(medium_synth, T_MID)
        assert b4t_train.n == b3t_train.n + len(included_train_students(medium_synth, T_MID))

    def test_added_rows_are_full_history_vectors(self, medium_synth):
        b3t_train, _ = split_B3T(medium_synth, T_MID)
        b4t_train, _ = split_B4T(medium_synth, T_MID)
        extra = set(b4t_train.rows) - set(b3t_train.rows)
        by_id = {s.student_id: s for s in medium_synth.students}
        values = {row: tuple(b4t_train.X[i]) for i, row in enumerate(b4t_train.rows)}
        for sid, as_of in extra:
            expected = vector_at_end(by_id[sid])
            assert as_of == expected.as_of
            assert values[(sid, as_of)] == expected.values

    def test_test_identical_to_b2t(self, medium_synth):
        _, b2t_test = split_B2T(medium_synth, T_MID)
        _, b4t_test = split_B4T(medium_synth, T_MID)
        assert b2t_test.rows == b4t_test.rows
        assert np.array_equal(b2t_test.X, b4t_test.X)


class TestCrossCutting:
    @pytest.mark.parametrize("approach", list(SplitApproach))
    def test_student_disjointness(self, medium_synth, approach):
        train, test = build_split(medium_synth, SplitRequest(approach, T_MID, seed=4))
        assert not train.student_ids & test.student_ids

    @pytest.mark.parametrize(
        "approach", [SplitApproach.B1, SplitApproach.B2, SplitApproach.B2T, SplitApproach.B3T, SplitApproach.B4T]
    )
    def test_temporal_membership_against_table_rule(self, medium_synth, approach):
        train, test = build_split(medium_synth, SplitRequest(approach, T_MID))
        before = {s.student_id for s in subset_exited_before(medium_synth, T_MID)}
        onward = {s.student_id for s in subset_exited_from(medium_synth, T_MID)}
        assert train.student_ids <= before
        assert test.student_ids <= onward
        by_id = {s.student_id: s for s in medium_synth.students}
        # as-of rule per approach, recomputed independently per row
        for i, (sid, as_of) in enumerate(train.rows):
            s = by_id[sid]
            if approach is SplitApproach.B1:
                assert tuple(train.X[i]) == vector_at_end(s).values
            elif approach in (SplitApproach.B2, SplitApproach.B2T):
                assert tuple(train.X[i]) == vector_at_last(s).values
            else:
                assert tuple(train.X[i]) == feature_vector(s, as_of).values

    @pytest.mark.parametrize("approach", list(SplitApproach))
    def test_rows_sorted_by_student_then_term(self, medium_synth, approach):
        train, test = build_split(medium_synth, SplitRequest(approach, T_MID, seed=8))
        for ds in (train, test):
            keys = [(sid, (as_of.year, as_of.index)) for sid, as_of in ds.rows]
            assert keys == sorted(keys)

    @pytest.mark.parametrize("approach", list(SplitApproach))
    def test_labels_are_binary(self, medium_synth, approach):
        train, test = build_split(medium_synth, SplitRequest(approach, T_MID, seed=8))
        for ds in (train, test):
            assert set(np.unique(ds.y)) <= {0, 1}

    def test_shared_cache_is_equivalent(self, medium_synth):
        cache = VectorCache(medium_synth)
        for approach in SplitApproach:
            with_cache = build_split(medium_synth, SplitRequest(approach, T_MID, seed=6), cache=cache)
            without = build_split(medium_synth, SplitRequest(approach, T_MID, seed=6))
            for a, b in zip(with_cache, without):
                assert a.rows == b.rows
                assert np.array_equal(a.X, b.X)
                assert np.array_equal(a.y, b.y)

    def test_inactive_at_reference_student_keeps_full_history_row(self, tiny_cohort):
        # frank stopped attending in 2014.1 but exits at 2015.1: at T=2014.2 he
        # is still a legitimate test case, carried with his pre-T history.
        t = Term(2014, 2)
        _, test = split_B2T(tiny_cohort, t)
        assert "frank" in test.student_ids
        row = [i for i, (sid, _) in enumerate(test.rows) if sid == "frank"][0]
        assert test.rows[row][1] == t
