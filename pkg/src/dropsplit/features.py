"""Incremental per-student feature vectors.

A student's vector as of term t summarizes only the course records strictly
before t, so walking t forward replays exactly what was knowable at the start
of each term. The canonical layout is the student's static attributes followed
by five history aggregates; vectors over an empty history are undefined rather
than zero-filled, and callers decide how to count the exclusion.
"""

from __future__ import annotations

from dataclasses import dataclass

from .records import Cohort, EnrollmentStatus, StudentStructure
from .terms import DEFAULT_TERMS_PER_YEAR, Term, iter_terms, next_term, term_distance

CANONICAL_TIME_FEATURES = (
    "completed_terms",
    "courses_taken",
    "courses_failed",
    "mean_attendance",
    "mean_score",
)


class FeatureWindowError(ValueError):
    """Requested as-of term lies outside the student's valid domain."""


class UndefinedFeatureVector(Exception):
    """The vector is not computable; callers exclude the student and log why."""

    def __init__(self, student_id: str, reason: str) -> None:
        super().__init__(f"student {student_id}: {reason}")
        self.student_id = student_id
        self.reason = reason


def _completed_terms(s: StudentStructure, t: Term, window, tpy: int) -> float:
    return float(len({c.term for c in window}))


def _courses_taken(s, t, window, tpy) -> float:
    return float(len(window))


def _courses_failed(s, t, window, tpy) -> float:
    return float(sum(1 for c in window if c.result == 0))


def _mean_attendance(s, t, window, tpy) -> float:
    return sum(c.attendance_pct for c in window) / len(window)


def _mean_score(s, t, window, tpy) -> float:
    return sum(c.score for c in window) / len(window)


def _elapsed_terms(s: StudentStructure, t: Term, window, tpy: int) -> float:
    # Calendar terms since entrance, counting gap terms; the alternative to
    # completed_terms for callers who want wall-clock progress.
    return float(term_distance(s.entrance, t, tpy))


TIME_FEATURES = {
    "completed_terms": _completed_terms,
    "courses_taken": _courses_taken,
    "courses_failed": _courses_failed,
    "mean_attendance": _mean_attendance,
    "mean_score": _mean_score,
    "elapsed_terms": _elapsed_terms,
}


@dataclass(frozen=True)
class FeatureSetSpec:
    """Which static attributes and history aggregates make up a vector."""

    static_names: tuple[str, ...]
    time_features: tuple[str, ...] = CANONICAL_TIME_FEATURES

    def __post_init__(self) -> None:
        unknown = [name for name in self.time_features if name not in TIME_FEATURES]
        if unknown:
            raise ValueError(f"unknown time-based features: {unknown}")

    @property
    def names(self) -> tuple[str, ...]:
        return self.static_names + self.time_features

    @staticmethod
    def for_cohort(cohort: Cohort, time_features: tuple[str, ...] = CANONICAL_TIME_FEATURES) -> "FeatureSetSpec":
        return FeatureSetSpec(static_names=cohort.static_attr_names, time_features=time_features)


@dataclass(frozen=True)
class FeatureVector:
    student_id: str
    as_of: Term
    values: tuple[float, ...]
    label: int | None


def student_label(s: StudentStructure) -> int | None:
    """0 for dropout, 1 for graduated, None while still enrolled."""
    if s.status is EnrollmentStatus.DROPOUT:
        return 0
    if s.status is EnrollmentStatus.GRADUATED:
        return 1
    return None


def _spec_for(s: StudentStructure, spec: FeatureSetSpec | None) -> FeatureSetSpec:
    if spec is not None:
        return spec
    return FeatureSetSpec(static_names=tuple(name for name, _ in s.static_attrs))


def _compute(
    s: StudentStructure,
    as_of: Term,
    spec: FeatureSetSpec,
    terms_per_year: int,
    empty_reason: str,
) -> FeatureVector:
    window = [c for c in s.courses if c.term < as_of]
    if not window:
        raise UndefinedFeatureVector(s.student_id, empty_reason)
    static = dict(s.static_attrs)
    values = [static[name] for name in spec.static_names]
    for name in spec.time_features:
        values.append(TIME_FEATURES[name](s, as_of, window, terms_per_year))
    return FeatureVector(
        student_id=s.student_id,
        as_of=as_of,
        values=tuple(values),
        label=student_label(s),
    )


def feature_vector(
    s: StudentStructure,
    t: Term,
    spec: FeatureSetSpec | None = None,
    terms_per_year: int = DEFAULT_TERMS_PER_YEAR,
) -> FeatureVector:
    """Vector as of the start of term t, over records in [entrance .. t).

    t must lie strictly after the entrance term (an entrance-term vector would
    have no history) and at most one term past the last recorded activity.
    """
    end = next_term(s.last, terms_per_year)
    if t <= s.entrance or t > end:
        raise FeatureWindowError(
            f"student {s.student_id}: as-of term {t} outside ({s.entrance} .. {end}]"
        )
    return _compute(s, t, _spec_for(s, spec), terms_per_year, "empty_window")


def vector_as_of(
    s: StudentStructure,
    t: Term,
    spec: FeatureSetSpec | None = None,
    terms_per_year: int = DEFAULT_TERMS_PER_YEAR,
) -> FeatureVector:
    """Reference-term vector: everything recorded before t, however old.

    Unlike :func:`feature_vector` this accepts t past the student's final
    activity, where the vector simply covers the full history. Used for test
    rows pinned to a prediction term.
    """
    if t <= s.entrance:
        raise UndefinedFeatureVector(s.student_id, "starts_at_reference_term")
    return _compute(s, t, _spec_for(s, spec), terms_per_year, "no_records_before_reference")


def vector_at_last(
    s: StudentStructure,
    spec: FeatureSetSpec | None = None,
    terms_per_year: int = DEFAULT_TERMS_PER_YEAR,
) -> FeatureVector:
    """Vector at the start of the student's final active term.

    Undefined for single-term students (their final term is the entrance term,
    and entrance-term vectors are out of scope); signalled, not raised as a
    crash, so callers can count the exclusion.
    """
    if s.last <= s.entrance:
        raise UndefinedFeatureVector(s.student_id, "single_term_history")
    return feature_vector(s, s.last, spec, terms_per_year)


def vector_at_end(
    s: StudentStructure,
    spec: FeatureSetSpec | None = None,
    terms_per_year: int = DEFAULT_TERMS_PER_YEAR,
) -> FeatureVector:
    """Vector one term past the final activity, i.e. over the complete history."""
    end = next_term(s.last, terms_per_year)
    return _compute(s, end, _spec_for(s, spec), terms_per_year, "no_course_records")


def expand_history(
    s: StudentStructure,
    lo: Term,
    hi: Term,
    spec: FeatureSetSpec | None = None,
    terms_per_year: int = DEFAULT_TERMS_PER_YEAR,
) -> list[FeatureVector]:
    """One vector per term in [lo .. hi], sharing the student's label.

    lo is clamped up to the term after entrance (entrance-term vectors are out
    of scope); terms whose window is still empty are skipped. An empty clamped
    range yields an empty list.
    """
    end = next_term(s.last, terms_per_year)
    if hi > end:
        raise FeatureWindowError(f"student {s.student_id}: range end {hi} past {end}")
    floor = next_term(s.entrance, terms_per_year)
    if lo < floor:
        lo = floor
    if lo > hi:
        return []
    resolved = _spec_for(s, spec)
    out = []
    for t in iter_terms(lo, hi, terms_per_year):
        try:
            out.append(_compute(s, t, resolved, terms_per_year, "empty_window"))
        except UndefinedFeatureVector:
            continue
    return out


class VectorCache:
    """Memoized per-student vectors for repeated split construction.

    Outcomes are cached including the undefined-vector signal, so replaying a
    split rebuilds byte-identical datasets without recomputing histories.
    """

    def __init__(self, cohort: Cohort, spec: FeatureSetSpec | None = None) -> None:
        self.cohort = cohort
        self.spec = spec if spec is not None else FeatureSetSpec.for_cohort(cohort)
        self.terms_per_year = cohort.terms_per_year
        self._at_end: dict[str, FeatureVector | UndefinedFeatureVector] = {}
        self._at_last: dict[str, FeatureVector | UndefinedFeatureVector] = {}
        self._history: dict[str, tuple[FeatureVector, ...]] = {}
        self._as_of: dict[tuple[str, Term], FeatureVector | UndefinedFeatureVector] = {}

    @staticmethod
    def _unwrap(outcome: FeatureVector | UndefinedFeatureVector) -> FeatureVector:
        if isinstance(outcome, UndefinedFeatureVector):
            raise outcome
        return outcome

    def at_end(self, s: StudentStructure) -> FeatureVector:
        if s.student_id not in self._at_end:
            try:
                self._at_end[s.student_id] = vector_at_end(s, self.spec, self.terms_per_year)
            except UndefinedFeatureVector as exc:
                self._at_end[s.student_id] = exc
        return self._unwrap(self._at_end[s.student_id])

    def at_last(self, s: StudentStructure) -> FeatureVector:
        if s.student_id not in self._at_last:
            try:
                self._at_last[s.student_id] = vector_at_last(s, self.spec, self.terms_per_year)
            except UndefinedFeatureVector as exc:
                self._at_last[s.student_id] = exc
        return self._unwrap(self._at_last[s.student_id])

    def history(self, s: StudentStructure) -> tuple[FeatureVector, ...]:
        """Vectors for every term from just after entrance through the final one."""
        if s.student_id not in self._history:
            lo = next_term(s.entrance, self.terms_per_year)
            vectors = expand_history(s, lo, s.last, self.spec, self.terms_per_year) if s.last > s.entrance else []
            self._history[s.student_id] = tuple(vectors)
        return self._history[s.student_id]

    def as_of(self, s: StudentStructure, t: Term) -> FeatureVector:
        key = (s.student_id, t)
        if key not in self._as_of:
            try:
                self._as_of[key] = vector_as_of(s, t, self.spec, self.terms_per_year)
            except UndefinedFeatureVector as exc:
                self._as_of[key] = exc
        return self._unwrap(self._as_of[key])
