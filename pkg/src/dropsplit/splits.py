"""The six train/test splitting approaches.

All approaches are anchored at a reference term T. The temporal ones train on
students who exited before T and test on students active at T who exited by
the end of the window; they differ in which as-of term the feature vectors
use, which is exactly where information from T onward can leak into a test
row. Approach A is the deliberately unrealistic baseline: a seeded random
partition of the pooled students that ignores time entirely.

Datasets are emitted sorted by (student id, as-of term) so no classifier can
depend on incidental row order, and every student excluded by a precondition
is recorded with a reason code.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .features import FeatureSetSpec, FeatureVector, UndefinedFeatureVector, VectorCache
from .records import Cohort, StudentStructure, subset_exited_before, subset_exited_from
from .rng import Xoshiro256StarStar
from .terms import Term, to_ordinal


class SplitError(ValueError):
    """A split cannot be materialized (one side ended up empty)."""


class SplitApproach(Enum):
    A = "A"
    B1 = "B1"
    B2 = "B2"
    B2T = "B2T"
    B3T = "B3T"
    B4T = "B4T"


@dataclass(frozen=True)
class SplitRequest:
    approach: SplitApproach
    reference_term: Term
    seed: int = 0


@dataclass(frozen=True)
class Exclusion:
    student_id: str
    role: str
    reason: str


@dataclass(frozen=True)
class DatasetMeta:
    approach: SplitApproach
    reference_term: Term
    role: str
    feature_names: tuple[str, ...]
    exclusions: tuple[Exclusion, ...]
    seed: int | None = None


@dataclass
class LabeledDataset:
    """Feature matrix, labels, and per-row provenance for one split side."""

    X: np.ndarray
    y: np.ndarray
    rows: tuple[tuple[str, Term], ...]
    meta: DatasetMeta

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def student_ids(self) -> set[str]:
        return {sid for sid, _ in self.rows}

    @staticmethod
    def from_arrays(X, y, feature_names: tuple[str, ...] = (), role: str = "train") -> "LabeledDataset":
        """Wrap plain arrays, for harness code and tests that bypass splitting."""
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        rows = tuple((f"r{i}", Term(1, 1)) for i in range(len(y)))
        names = feature_names or tuple(f"f{j}" for j in range(X.shape[1]))
        meta = DatasetMeta(
            approach=SplitApproach.A,
            reference_term=Term(1, 1),
            role=role,
            feature_names=names,
            exclusions=(),
        )
        return LabeledDataset(X=X, y=y, rows=rows, meta=meta)


def _materialize(
    vectors: list[FeatureVector],
    approach: SplitApproach,
    reference_term: Term,
    role: str,
    feature_names: tuple[str, ...],
    exclusions: list[Exclusion],
    terms_per_year: int,
    seed: int | None = None,
) -> LabeledDataset:
    vectors = sorted(vectors, key=lambda v: (v.student_id, to_ordinal(v.as_of, terms_per_year)))
    n = len(vectors)
    m = len(feature_names)
    X = np.empty((n, m), dtype=np.float64)
    y = np.empty(n, dtype=np.int64)
    rows = []
    for i, v in enumerate(vectors):
        if v.label is None:
            raise ValueError(f"student {v.student_id} has no label; enrolled students cannot enter a split")
        X[i] = v.values
        y[i] = v.label
        rows.append((v.student_id, v.as_of))
    meta = DatasetMeta(
        approach=approach,
        reference_term=reference_term,
        role=role,
        feature_names=feature_names,
        exclusions=tuple(exclusions),
        seed=seed,
    )
    return LabeledDataset(X=X, y=y, rows=tuple(rows), meta=meta)


def _collect(students, getter, role: str, exclusions: list[Exclusion]) -> list[FeatureVector]:
    out = []
    for s in students:
        try:
            out.append(getter(s))
        except UndefinedFeatureVector as exc:
            exclusions.append(Exclusion(s.student_id, role, exc.reason))
    return out


def _populations(c: Cohort, t: Term) -> tuple[list[StudentStructure], list[StudentStructure]]:
    return subset_exited_before(c, t), subset_exited_from(c, t)


def _require_nonempty(vectors: list[FeatureVector], side: str, t: Term) -> None:
    if vectors:
        return
    if side == "train":
        raise SplitError(f"train side empty: no student exited before {t} with a usable vector")
    raise SplitError(f"test side empty: no student active at {t} exited within the window with a usable vector")


def _cache_for(c: Cohort, spec: FeatureSetSpec | None, cache: VectorCache | None) -> VectorCache:
    if cache is not None:
        return cache
    return VectorCache(c, spec)


def split_A(
    c: Cohort,
    t: Term,
    seed: int,
    spec: FeatureSetSpec | None = None,
    cache: VectorCache | None = None,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded random partition of the pooled exited students, final vectors.

    Set sizes match the temporal populations so accuracy is comparable with
    the temporal approaches, but membership ignores exit order entirely.
    """
    cache = _cache_for(c, spec, cache)
    before, onward = _populations(c, t)
    excl: list[Exclusion] = []
    vecs_before = _collect(before, cache.at_end, "pool", excl)
    vecs_onward = _collect(onward, cache.at_end, "pool", excl)
    if not vecs_before:
        raise SplitError(f"no students exited before reference term {t}")
    if not vecs_onward:
        raise SplitError(f"no students active at {t} exited within the window")
    pool = vecs_before + vecs_onward
    pool.sort(key=lambda v: v.student_id)
    gen = Xoshiro256StarStar(seed)
    gen.shuffle(pool)
    n_train = len(vecs_before)
    names = cache.spec.names
    train = _materialize(
        pool[:n_train], SplitApproach.A, t, "train", names, excl, c.terms_per_year, seed
    )
    test = _materialize(
        pool[n_train:], SplitApproach.A, t, "test", names, [], c.terms_per_year, seed
    )
    return train, test


def split_B1(
    c: Cohort,
    t: Term,
    spec: FeatureSetSpec | None = None,
    cache: VectorCache | None = None,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Temporal membership, full-history vectors on both sides."""
    cache = _cache_for(c, spec, cache)
    before, onward = _populations(c, t)
    train_excl: list[Exclusion] = []
    test_excl: list[Exclusion] = []
    train_vecs = _collect(before, cache.at_end, "train", train_excl)
    test_vecs = _collect(onward, cache.at_end, "test", test_excl)
    _require_nonempty(train_vecs, "train", t)
    _require_nonempty(test_vecs, "test", t)
    names = cache.spec.names
    return (
        _materialize(train_vecs, SplitApproach.B1, t, "train", names, train_excl, c.terms_per_year),
        _materialize(test_vecs, SplitApproach.B1, t, "test", names, test_excl, c.terms_per_year),
    )


def split_B2(
    c: Cohort,
    t: Term,
    spec: FeatureSetSpec | None = None,
    cache: VectorCache | None = None,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Temporal membership, vectors cut just before each student's final term.

    Single-term students are excluded on both sides. Test vectors still follow
    each student to their own final term, so records dated at or after the
    reference term can inform a test row; that residual leak is what the
    truncated variants remove.
    """
    cache = _cache_for(c, spec, cache)
    before, onward = _populations(c, t)
    train_excl: list[Exclusion] = []
    test_excl: list[Exclusion] = []
    train_vecs = _collect(before, cache.at_last, "train", train_excl)
    test_vecs = _collect(onward, cache.at_last, "test", test_excl)
    _require_nonempty(train_vecs, "train", t)
    _require_nonempty(test_vecs, "test", t)
    names = cache.spec.names
    return (
        _materialize(train_vecs, SplitApproach.B2, t, "train", names, train_excl, c.terms_per_year),
        _materialize(test_vecs, SplitApproach.B2, t, "test", names, test_excl, c.terms_per_year),
    )


def _reference_test(
    onward: list[StudentStructure],
    t: Term,
    cache: VectorCache,
    exclusions: list[Exclusion],
) -> list[FeatureVector]:
    return _collect(onward, lambda s: cache.as_of(s, t), "test", exclusions)


def _truncated_split(
    approach: SplitApproach,
    c: Cohort,
    t: Term,
    spec: FeatureSetSpec | None,
    cache: VectorCache | None,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Shared construction for the three leakage-free approaches.

    They share the test set (vectors pinned at the reference term) and differ
    only in the training rows built per exited student.
    """
    cache = _cache_for(c, spec, cache)
    before, onward = _populations(c, t)
    train_excl: list[Exclusion] = []
    test_excl: list[Exclusion] = []
    train_vecs: list[FeatureVector] = []
    for s in before:
        if approach is SplitApproach.B2T:
            try:
                train_vecs.append(cache.at_last(s))
            except UndefinedFeatureVector as exc:
                train_excl.append(Exclusion(s.student_id, "train", exc.reason))
            continue
        history = cache.history(s)
        if not history:
            train_excl.append(Exclusion(s.student_id, "train", "single_term_history"))
            continue
        train_vecs.extend(history)
        if approach is SplitApproach.B4T:
            train_vecs.append(cache.at_end(s))
    test_vecs = _reference_test(onward, t, cache, test_excl)
    _require_nonempty(train_vecs, "train", t)
    _require_nonempty(test_vecs, "test", t)
    names = cache.spec.names
    return (
        _materialize(train_vecs, approach, t, "train", names, train_excl, c.terms_per_year),
        _materialize(test_vecs, approach, t, "test", names, test_excl, c.terms_per_year),
    )


def split_B2T(c, t, spec=None, cache=None):
    """Final-term vectors for training; test vectors pinned at the reference term."""
    return _truncated_split(SplitApproach.B2T, c, t, spec, cache)


def split_B3T(c, t, spec=None, cache=None):
    """Training expanded to one vector per enrolled term; reference-term test."""
    return _truncated_split(SplitApproach.B3T, c, t, spec, cache)


def split_B4T(c, t, spec=None, cache=None):
    """Expanded training rows plus each student's full-history vector."""
    return _truncated_split(SplitApproach.B4T, c, t, spec, cache)


def build_split(
    c: Cohort,
    request: SplitRequest,
    spec: FeatureSetSpec | None = None,
    cache: VectorCache | None = None,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Dispatch a SplitRequest to its approach."""
    a = request.approach
    if a is SplitApproach.A:
        return split_A(c, request.reference_term, request.seed, spec, cache)
    builder = {
        SplitApproach.B1: split_B1,
        SplitApproach.B2: split_B2,
        SplitApproach.B2T: split_B2T,
        SplitApproach.B3T: split_B3T,
        SplitApproach.B4T: split_B4T,
    }[a]
    return builder(c, request.reference_term, spec, cache)
