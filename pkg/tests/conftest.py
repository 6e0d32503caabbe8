from __future__ import annotations

import pytest

from dropsplit.records import Cohort, CourseRecord, EnrollmentStatus, StudentStructure
from dropsplit.synthgen import GeneratorConfig, generate
from dropsplit.terms import Term, TermRange

ATTRS = (("entrance_age", 18.0), ("sex_code", 1.0), ("degree_code", 2.0))


def course(year: int, index: int, score: float, att: float, result: int, code: str = "C0") -> CourseRecord:
    return CourseRecord(course_code=code, term=Term(year, index), score=score, attendance_pct=att, result=result)


def make_student(
    sid: str,
    entrance: tuple[int, int],
    status: str,
    exit_term: tuple[int, int] | None,
    courses: list[CourseRecord],
    attrs: tuple = ATTRS,
) -> StudentStructure:
    return StudentStructure(
        student_id=sid,
        static_attrs=attrs,
        entrance=Term(*entrance),
        status=EnrollmentStatus(status),
        exit_term=Term(*exit_term) if exit_term else None,
        courses=tuple(sorted(courses, key=lambda c: (c.term.year, c.term.index))),
    )


@pytest.fixture
def alice() -> StudentStructure:
    # Matches the worked arithmetic example used across the feature tests.
    return make_student(
        "alice",
        (2012, 1),
        "graduated",
        (2013, 2),
        [
            course(2012, 1, 8.0, 90.0, 1, "C1"),
            course(2012, 1, 4.0, 70.0, 0, "C2"),
            course(2012, 2, 6.0, 80.0, 1, "C3"),
            course(2013, 1, 7.0, 85.0, 1, "C4"),
            course(2013, 2, 9.0, 95.0, 1, "C5"),
        ],
    )


@pytest.fixture
def tiny_cohort(alice) -> Cohort:
    students = [
        alice,
        make_student(
            "bob",
            (2012, 1),
            "dropout",
            (2012, 2),
            [course(2012, 1, 5.0, 60.0, 1), course(2012, 2, 2.0, 40.0, 0)],
        ),
        make_student("carol", (2013, 1), "dropout", (2013, 1), [course(2013, 1, 3.0, 50.0, 0)]),
        make_student(
            "dave",
            (2012, 2),
            "enrolled",
            None,
            [
                course(2012, 2, 7.0, 88.0, 1),
                course(2013, 1, 7.5, 90.0, 1),
                course(2013, 2, 8.0, 92.0, 1),
                course(2014, 1, 6.5, 85.0, 1),
            ],
        ),
        make_student(
            "erin",
            (2013, 2),
            "graduated",
            (2015, 2),
            [
                course(2013, 2, 9.0, 96.0, 1),
                course(2014, 1, 8.5, 94.0, 1),
                course(2014, 2, 9.5, 97.0, 1),
                course(2015, 1, 8.0, 93.0, 1),
                course(2015, 2, 9.0, 95.0, 1),
            ],
        ),
        # Registered exit well after the last recorded activity.
        make_student("frank", (2014, 1), "dropout", (2015, 1), [course(2014, 1, 1.0, 20.0, 0)]),
        # No records at all: inactive, still enrolled.
        make_student("gina", (2014, 2), "enrolled", None, []),
    ]
    return Cohort(students=tuple(students), range=TermRange(Term(2012, 1), Term(2016, 2)), terms_per_year=2)


@pytest.fixture(scope="session")
def medium_synth() -> Cohort:
    cfg = GeneratorConfig(seed=2024, range_start=Term(2009, 1), range_end=Term(2015, 2), intake_per_term=12)
    return generate(cfg).cohort
