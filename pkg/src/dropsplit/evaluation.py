"""Walk-forward evaluation of splitting approaches and classifiers.

The grid runner walks the reference term across a range, materializes every
requested (approach, classifier) cell, and records accuracy, confusion counts,
and set sizes. Cells that cannot be built are skip-marked with the reason and
never abort the grid. Method selection uses a point rule: a classifier earns a
point for holding the top accuracy at two consecutive evaluated terms, with
period means breaking ties.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifiers import ClassifierSpec, accuracy, confusion, fit, predict
from .features import FeatureSetSpec, UndefinedFeatureVector, VectorCache
from .records import Cohort, subset_enrolled, subset_exited_before, subset_exited_from
from .splits import (
    LabeledDataset,
    SplitApproach,
    SplitError,
    SplitRequest,
    build_split,
)
from .terms import Term, format_term, to_ordinal


class EvaluationError(RuntimeError):
    """The evaluation cannot proceed (e.g. every cell was skipped)."""


@dataclass(frozen=True)
class SetSizes:
    train_students: int
    train_rows: int
    test_students: int
    test_rows: int


@dataclass
class EvaluationGrid:
    approaches: tuple[SplitApproach, ...]
    classifiers: tuple[str, ...]
    t_values: tuple[Term, ...]
    terms_per_year: int
    accuracy: dict[tuple[str, str, Term], float] = field(default_factory=dict)
    skips: dict[tuple[str, str, Term], str] = field(default_factory=dict)
    confusions: dict[tuple[str, str, Term], np.ndarray] = field(default_factory=dict)
    sizes: dict[tuple[str, Term], SetSizes] = field(default_factory=dict)
    enrolled: dict[Term, int] = field(default_factory=dict)
    exclusion_counts: dict[tuple[str, Term], int] = field(default_factory=dict)

    def cell(self, approach: str, classifier: str, t: Term) -> float | None:
        return self.accuracy.get((approach, classifier, t))

    def skip_reason(self, approach: str, classifier: str, t: Term) -> str | None:
        return self.skips.get((approach, classifier, t))

    def per_t_mean(self, approach: str, t: Term) -> float | None:
        cells = [v for c in self.classifiers if (v := self.cell(approach, c, t)) is not None]
        return sum(cells) / len(cells) if cells else None

    def period_mean(self, approach: str, classifier: str) -> float | None:
        cells = [v for t in self.t_values if (v := self.cell(approach, classifier, t)) is not None]
        return sum(cells) / len(cells) if cells else None

    def block_mean(self, approach: str) -> float | None:
        cells = [
            v
            for c in self.classifiers
            for t in self.t_values
            if (v := self.cell(approach, c, t)) is not None
        ]
        return sum(cells) / len(cells) if cells else None


def run_grid(
    cohort: Cohort,
    approaches: list[SplitApproach],
    specs: list[ClassifierSpec],
    t_values: list[Term],
    split_seed: int = 0,
    feature_spec: FeatureSetSpec | None = None,
) -> EvaluationGrid:
    """Fit and score every (reference term, approach, classifier) cell.

    One vector cache is shared across the whole walk, and cells are visited in
    a fixed order so results do not depend on scheduling.
    """
    if not specs:
        raise EvaluationError("no classifier specs given")
    labels = [s.label for s in specs]
    if len(set(labels)) != len(labels):
        raise EvaluationError(f"duplicate classifier labels: {labels}")
    for t in t_values:
        if t not in cohort.range:
            raise EvaluationError(f"reference term {t} outside cohort range")
    cache = VectorCache(cohort, feature_spec)
    grid = EvaluationGrid(
        approaches=tuple(approaches),
        classifiers=tuple(labels),
        t_values=tuple(t_values),
        terms_per_year=cohort.terms_per_year,
    )
    for t in t_values:
        grid.enrolled[t] = len(subset_enrolled(cohort, t))
        for approach in approaches:
            a = approach.value
            try:
                train, test = build_split(
                    cohort, SplitRequest(approach, t, split_seed), cache=cache
                )
            except SplitError as exc:
                grid.sizes[(a, t)] = SetSizes(0, 0, 0, 0)
                for label in labels:
                    grid.skips[(a, label, t)] = str(exc)
                continue
            grid.sizes[(a, t)] = SetSizes(
                train_students=len(train.student_ids),
                train_rows=train.n,
                test_students=len(test.student_ids),
                test_rows=test.n,
            )
            grid.exclusion_counts[(a, t)] = len(train.meta.exclusions) + len(test.meta.exclusions)
            for spec in specs:
                model = fit(spec, train)
                y_pred = predict(model, test.X)
                grid.accuracy[(a, spec.label, t)] = accuracy(test.y, y_pred)
                grid.confusions[(a, spec.label, t)] = confusion(test.y, y_pred)
    return grid


@dataclass
class PointTable:
    approach: str
    points: dict[str, int]
    period_means: dict[str, float]
    winner: str
    runner_up: str | None
    tiebreak_used: bool


def _award_points(
    grid: EvaluationGrid, approach: str, classifiers: tuple[str, ...], mode: str
) -> dict[str, int]:
    """Points per classifier under the consecutive-top rule.

    A pair of adjacent terms only counts when every classifier has a value at
    both; in "pairs" mode a streak of L consecutive tops earns L-1 points, in
    "streaks" mode each maximal streak of length >= 2 earns one.
    """
    usable = [
        t
        for t in grid.t_values
        if all(grid.cell(approach, c, t) is not None for c in classifiers)
    ]
    tops: list[set[str]] = []
    for t in usable:
        values = {c: grid.cell(approach, c, t) for c in classifiers}
        best = max(values.values())
        tops.append({c for c, v in values.items() if v == best})
    points = {c: 0 for c in classifiers}
    adjacent = [
        to_ordinal(b, grid.terms_per_year) - to_ordinal(a, grid.terms_per_year) == 1
        for a, b in zip(usable, usable[1:])
    ]
    if mode == "pairs":
        for i, adj in enumerate(adjacent):
            if not adj:
                continue
            for c in tops[i] & tops[i + 1]:
                points[c] += 1
    elif mode == "streaks":
        for c in classifiers:
            run = 1 if tops and c in tops[0] else 0
            for i, adj in enumerate(adjacent):
                if adj and c in tops[i] and c in tops[i + 1]:
                    run += 1
                else:
                    if run >= 2:
                        points[c] += 1
                    run = 1 if c in tops[i + 1] else 0
            if run >= 2:
                points[c] += 1
    else:
        raise ValueError(f"unknown points mode {mode!r}")
    return points


def _select(
    points: dict[str, int], means: dict[str, float]
) -> tuple[str, bool]:
    best = max(points.values())
    tied = sorted(c for c, p in points.items() if p == best)
    if len(tied) == 1:
        return tied[0], False
    return max(tied, key=lambda c: (means.get(c, float("-inf")), )), True


def score_points(grid: EvaluationGrid, approach: SplitApproach | str, mode: str = "pairs") -> PointTable:
    """Pick the best and second-best classifier for one approach block."""
    a = approach.value if isinstance(approach, SplitApproach) else approach
    classifiers = grid.classifiers
    non_skipped = [
        t for t in grid.t_values if any(grid.cell(a, c, t) is not None for c in classifiers)
    ]
    if not non_skipped:
        raise EvaluationError(f"approach {a}: every cell was skipped")
    if len(non_skipped) < 2:
        raise EvaluationError(f"approach {a}: need at least two evaluated terms")
    means = {
        c: m for c in classifiers if (m := grid.period_mean(a, c)) is not None
    }
    points = _award_points(grid, a, classifiers, mode)
    winner, tiebreak = _select(points, means)
    runner_up = None
    if len(classifiers) > 1:
        remaining = tuple(c for c in classifiers if c != winner)
        rest_points = _award_points(grid, a, remaining, mode)
        runner_up, _ = _select(rest_points, means)
    return PointTable(
        approach=a,
        points=points,
        period_means=means,
        winner=winner,
        runner_up=runner_up,
        tiebreak_used=tiebreak,
    )


# --- final stage: predicting currently enrolled students ---------------------


@dataclass
class EnrolledPredictions:
    approach: str
    classifier: str
    reference_term: Term
    predictions: list[tuple[str, int]]
    exclusions: list[tuple[str, str]]


def _train_rows_for_final(
    cohort: Cohort,
    approach: SplitApproach,
    cache: VectorCache,
) -> LabeledDataset:
    """All exited students, rows built per the approach's training rule."""
    horizon = cohort.range.hi
    exited = subset_exited_before(cohort, horizon) + subset_exited_from(cohort, horizon)
    exited.sort(key=lambda s: s.student_id)
    vectors = []
    for s in exited:
        try:
            if approach in (SplitApproach.A, SplitApproach.B1):
                vectors.append(cache.at_end(s))
            elif approach in (SplitApproach.B2, SplitApproach.B2T):
                vectors.append(cache.at_last(s))
            else:
                history = cache.history(s)
                if not history:
                    raise UndefinedFeatureVector(s.student_id, "single_term_history")
                vectors.extend(history)
                if approach is SplitApproach.B4T:
                    vectors.append(cache.at_end(s))
        except UndefinedFeatureVector:
            continue
    if not vectors:
        raise EvaluationError("no exited students with computable training vectors")
    X = np.array([v.values for v in vectors], dtype=np.float64)
    y = np.array([v.label for v in vectors], dtype=np.int64)
    ds = LabeledDataset.from_arrays(X, y, feature_names=cache.spec.names)
    return ds


def predict_enrolled(
    cohort: Cohort,
    winning_spec: ClassifierSpec,
    approach: SplitApproach = SplitApproach.B4T,
    feature_spec: FeatureSetSpec | None = None,
    cache: VectorCache | None = None,
) -> EnrolledPredictions:
    """Refit on every exited student and predict each enrolled student's outcome.

    Enrolled students without a computable vector at the horizon are listed as
    exclusions, so predictions plus exclusions always account for the whole
    enrolled population.
    """
    if cache is None:
        cache = VectorCache(cohort, feature_spec)
    horizon = cohort.range.hi
    enrolled = subset_enrolled(cohort, horizon)
    if not enrolled:
        return EnrolledPredictions(
            approach=approach.value,
            classifier=winning_spec.label,
            reference_term=horizon,
            predictions=[],
            exclusions=[],
        )
    train = _train_rows_for_final(cohort, approach, cache)
    model = fit(winning_spec, train)
    rows = []
    exclusions: list[tuple[str, str]] = []
    for s in enrolled:
        try:
            rows.append(cache.as_of(s, horizon))
        except UndefinedFeatureVector as exc:
            exclusions.append((s.student_id, exc.reason))
    predictions: list[tuple[str, int]] = []
    if rows:
        X = np.array([v.values for v in rows], dtype=np.float64)
        labels = predict(model, X)
        predictions = [(v.student_id, int(lb)) for v, lb in zip(rows, labels)]
    return EnrolledPredictions(
        approach=approach.value,
        classifier=winning_spec.label,
        reference_term=horizon,
        predictions=predictions,
        exclusions=exclusions,
    )


# --- report rendering ---------------------------------------------------------

_PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
)


def _accuracy_csv(grid: EvaluationGrid, approach: str) -> str:
    header = ["classifier"] + [format_term(t) for t in grid.t_values] + ["mean"]
    lines = [",".join(header)]
    for c in grid.classifiers:
        cells = []
        for t in grid.t_values:
            v = grid.cell(approach, c, t)
            cells.append(repr(v) if v is not None else "")
        mean = grid.period_mean(approach, c)
        cells.append(repr(mean) if mean is not None else "")
        lines.append(",".join([c] + cells))
    means = []
    for t in grid.t_values:
        v = grid.per_t_mean(approach, t)
        means.append(repr(v) if v is not None else "")
    block = grid.block_mean(approach)
    means.append(repr(block) if block is not None else "")
    lines.append(",".join(["mean"] + means))
    return "\n".join(lines) + "\n"


def _setsizes_csv(grid: EvaluationGrid) -> str:
    header = ["set"] + [format_term(t) for t in grid.t_values]
    lines = [",".join(header)]
    for approach in grid.approaches:
        a = approach.value
        for role, attr in (("train", "train_students"), ("test", "test_students")):
            cells = [str(getattr(grid.sizes[(a, t)], attr)) for t in grid.t_values]
            lines.append(",".join([f"{a} {role}"] + cells))
        if approach in (SplitApproach.B3T, SplitApproach.B4T):
            cells = [str(grid.sizes[(a, t)].train_rows) for t in grid.t_values]
            lines.append(",".join([f"{a} train rows"] + cells))
    lines.append(",".join(["enrolled"] + [str(grid.enrolled[t]) for t in grid.t_values]))
    return "\n".join(lines) + "\n"


def _points_csv(table: PointTable) -> str:
    lines = ["classifier,points,period_mean,selection"]
    for c in sorted(table.points):
        mean = table.period_means.get(c)
        tag = "winner" if c == table.winner else ("runner_up" if c == table.runner_up else "")
        lines.append(f"{c},{table.points[c]},{repr(mean) if mean is not None else ''},{tag}")
    lines.append(f"# tiebreak_used={str(table.tiebreak_used).lower()}")
    return "\n".join(lines) + "\n"


def _confusion_csv(matrix: np.ndarray) -> str:
    lines = [",pred_dropout,pred_graduated"]
    lines.append(f"true_dropout,{int(matrix[0, 0])},{int(matrix[0, 1])}")
    lines.append(f"true_graduated,{int(matrix[1, 0])},{int(matrix[1, 1])}")
    return "\n".join(lines) + "\n"


def _chart_svg(grid: EvaluationGrid, approach: str) -> str:
    """One polyline per classifier: accuracy against the reference term."""
    width, height = 860, 480
    left, right, top, bottom = 60, 180, 30, 50
    plot_w, plot_h = width - left - right, height - top - bottom
    xs = [to_ordinal(t, grid.terms_per_year) for t in grid.t_values]
    x_lo, x_hi = min(xs), max(xs)
    span = max(1, x_hi - x_lo)

    def px(t_ord: int) -> float:
        return left + (t_ord - x_lo) / span * plot_w

    def py(acc: float) -> float:
        return top + (1.0 - acc) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left}" y="18" font-family="sans-serif" font-size="14">accuracy by reference term ({approach})</text>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = py(frac)
        parts.append(
            f'<line x1="{left}" y1="{y:.1f}" x2="{left + plot_w}" y2="{y:.1f}" stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end" font-family="sans-serif" font-size="11">{frac:.2f}</text>'
        )
    for t, x in zip(grid.t_values, xs):
        parts.append(
            f'<text x="{px(x):.1f}" y="{height - bottom + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{format_term(t)}</text>'
        )
    parts.append(
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="#333333"/>'
    )
    parts.append(
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" stroke="#333333"/>'
    )
    for i, c in enumerate(grid.classifiers):
        color = _PALETTE[i % len(_PALETTE)]
        pts = [
            f"{px(x):.1f},{py(v):.1f}"
            for t, x in zip(grid.t_values, xs)
            if (v := grid.cell(approach, c, t)) is not None
        ]
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}"/>'
        )
        ly = top + 16 * i + 10
        lx = left + plot_w + 12
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(
            f'<text x="{lx + 24}" y="{ly + 4}" font-family="sans-serif" font-size="11">{c}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_report(
    grid: EvaluationGrid,
    point_tables: dict[str, PointTable],
    out_dir: str | Path,
    confusion_terms: list[Term] | None = None,
) -> list[Path]:
    """Write the per-approach accuracy tables, set sizes, points, confusion
    matrices for each block's winner and runner-up, and one chart per approach.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str, text: str) -> None:
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    for approach in grid.approaches:
        a = approach.value
        emit(f"accuracy_{a}.csv", _accuracy_csv(grid, a))
        emit(f"chart_{a}.svg", _chart_svg(grid, a))
        table = point_tables.get(a)
        if table is not None:
            emit(f"points_{a}.csv", _points_csv(table))
            methods = [m for m in (table.winner, table.runner_up) if m]
            for t in confusion_terms or []:
                for method in methods:
                    matrix = grid.confusions.get((a, method, t))
                    if matrix is not None:
                        emit(f"confusion_{a}_{method}_{format_term(t)}.csv", _confusion_csv(matrix))
    emit("setsizes.csv", _setsizes_csv(grid))
    return written


def read_accuracy_csv(path: str | Path, terms_per_year: int = 2):
    """Parse an emitted accuracy CSV back into (t_values, rows, mean_row).

    Used by report tooling and by tests verifying the round trip.
    """
    from .terms import parse_term

    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = text[0].split(",")
    t_values = [parse_term(tok, terms_per_year) for tok in header[1:-1]]
    rows: dict[str, list[float | None]] = {}
    mean_row: list[float | None] = []
    for line in text[1:]:
        cells = line.split(",")
        values = [float(v) if v else None for v in cells[1:]]
        if cells[0] == "mean":
            mean_row = values
        else:
            rows[cells[0]] = values
    return t_values, rows, mean_row
