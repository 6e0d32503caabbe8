"""Temporal train/test splitting and evaluation for longitudinal academic records."""

__version__ = "0.1.0"

from .classifiers import ClassifierSpec, TrainedModel, accuracy, confusion, fit, predict
from .features import (
    FeatureSetSpec,
    FeatureVector,
    UndefinedFeatureVector,
    expand_history,
    feature_vector,
    vector_at_end,
    vector_at_last,
)
from .records import (
    Cohort,
    CourseRecord,
    EnrollmentStatus,
    IngestConfig,
    StudentStructure,
    ingest,
    subset_enrolled,
    subset_exited_before,
    subset_exited_from,
)
from .splits import (
    LabeledDataset,
    SplitApproach,
    SplitRequest,
    build_split,
    split_A,
    split_B1,
    split_B2,
    split_B2T,
    split_B3T,
    split_B4T,
)
from .evaluation import predict_enrolled, render_report, run_grid, score_points
from .synthgen import GeneratorConfig, generate
from .terms import Term, TermRange, format_term, next_term, parse_term, prev_term, term_distance
