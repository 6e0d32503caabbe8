"""Flat key=value run configuration.

One assignment per line, ``#`` starts a comment; values are plain text so the
format can be written and diffed from any tooling. This module also turns
config mappings into the typed objects the library modules expect.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .classifiers import KINDS, ClassifierSpec
from .records import IngestConfig
from .splits import SplitApproach
from .synthgen import GeneratorConfig, RegimeChange
from .terms import Term, parse_term


class ConfigError(ValueError):
    """Config file is malformed or inconsistent."""


def load_kv(path: str | Path) -> dict[str, str]:
    """Parse a flat key=value file, ignoring blanks and # comments."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _get_int(kv: dict[str, str], key: str, default: int | None = None) -> int:
    if key not in kv:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(kv[key])
    except ValueError:
        raise ConfigError(f"key {key!r}: expected integer, got {kv[key]!r}") from None


def _get_float(kv: dict[str, str], key: str, default: float) -> float:
    if key not in kv:
        return default
    try:
        return float(kv[key])
    except ValueError:
        raise ConfigError(f"key {key!r}: expected number, got {kv[key]!r}") from None


def _get_term(kv: dict[str, str], key: str, terms_per_year: int) -> Term:
    if key not in kv:
        raise ConfigError(f"missing required key {key!r}")
    return parse_term(kv[key], terms_per_year)


def ingest_config_from(kv: dict[str, str]) -> IngestConfig:
    tpy = _get_int(kv, "terms_per_year", 2)
    miniterm = {
        key.split(".", 1)[1]: int(value)
        for key, value in kv.items()
        if key.startswith("map.")
    }
    attr_codes = None
    if "attr_codes" in kv and kv["attr_codes"]:
        attr_codes = _read_attr_codes(kv["attr_codes"])
    return IngestConfig(
        range_start=_get_term(kv, "range_start", tpy),
        range_end=_get_term(kv, "range_end", tpy),
        terms_per_year=tpy,
        miniterm_map=miniterm,
        attr_codes=attr_codes,
    )


def _read_attr_codes(path: str) -> dict[str, dict[str, int]]:
    import csv

    out: dict[str, dict[str, int]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["attribute"], {})[row["value"]] = int(row["code"])
    return out


def write_attr_codes(codes: dict[str, dict[str, int]], path: str | Path) -> None:
    lines = ["attribute,value,code"]
    for attr in sorted(codes):
        for value, code in sorted(codes[attr].items(), key=lambda kv: kv[1]):
            lines.append(f"{attr},{value},{code}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def generator_config_from(kv: dict[str, str]) -> GeneratorConfig:
    tpy = _get_int(kv, "terms_per_year", 2)
    regime = None
    if kv.get("regime_change_term"):
        regime = RegimeChange(
            term=parse_term(kv["regime_change_term"], tpy),
            hazard_shift=_get_float(kv, "regime_change_shift", 0.0),
        )
    defaults = GeneratorConfig()
    return GeneratorConfig(
        seed=_get_int(kv, "seed", defaults.seed),
        terms_per_year=tpy,
        range_start=_get_term(kv, "range_start", tpy),
        range_end=_get_term(kv, "range_end", tpy),
        intake_per_term=_get_int(kv, "intake_per_term", defaults.intake_per_term),
        degree_length_terms=_get_int(kv, "degree_length_terms", defaults.degree_length_terms),
        courses_min=_get_int(kv, "courses_min", defaults.courses_min),
        courses_max=_get_int(kv, "courses_max", defaults.courses_max),
        ability_mean=_get_float(kv, "ability_mean", defaults.ability_mean),
        ability_std=_get_float(kv, "ability_std", defaults.ability_std),
        score_base=_get_float(kv, "score_base", defaults.score_base),
        score_ability_gain=_get_float(kv, "score_ability_gain", defaults.score_ability_gain),
        score_noise_std=_get_float(kv, "score_noise_std", defaults.score_noise_std),
        attendance_base=_get_float(kv, "attendance_base", defaults.attendance_base),
        attendance_ability_gain=_get_float(kv, "attendance_ability_gain", defaults.attendance_ability_gain),
        attendance_noise_std=_get_float(kv, "attendance_noise_std", defaults.attendance_noise_std),
        pass_score=_get_float(kv, "pass_score", defaults.pass_score),
        hazard_baseline=_get_float(kv, "hazard_baseline", defaults.hazard_baseline),
        hazard_ability_weight=_get_float(kv, "hazard_ability_weight", defaults.hazard_ability_weight),
        hazard_fail_weight=_get_float(kv, "hazard_fail_weight", defaults.hazard_fail_weight),
        hazard_early_multiplier=_get_float(kv, "hazard_early_multiplier", defaults.hazard_early_multiplier),
        early_terms=_get_int(kv, "early_terms", defaults.early_terms),
        regime_change=regime,
        degree_count=_get_int(kv, "degree_count", defaults.degree_count),
    )


_SPEC_FIELDS = {
    "max_depth": int,
    "min_samples_split": int,
    "n_trees": int,
    "feature_subsample": str,
    "seed": int,
    "k": int,
    "variance_floor": float,
    "kind": str,
}


def classifier_specs_from(kv: dict[str, str]) -> list[ClassifierSpec]:
    """Build specs from `classifiers=` plus per-name `<name>.<param>=` keys."""
    names = [n.strip() for n in kv.get("classifiers", ",".join(KINDS)).split(",") if n.strip()]
    specs = []
    for name in names:
        params: dict = {"kind": name, "label": name}
        for key, value in kv.items():
            if not key.startswith(name + "."):
                continue
            param = key.split(".", 1)[1]
            if param not in _SPEC_FIELDS:
                raise ConfigError(f"unknown classifier parameter {key!r}")
            caster = _SPEC_FIELDS[param]
            if param == "feature_subsample" and value not in ("sqrt", "log2"):
                params[param] = int(value)
            elif param == "max_depth" and value.lower() == "none":
                params[param] = None
            else:
                params[param] = caster(value)
        if params.get("kind") not in KINDS:
            raise ConfigError(
                f"classifier {name!r}: set {name}.kind to one of {KINDS} when the name is not a kind"
            )
        try:
            specs.append(ClassifierSpec(**params))
        except ValueError as exc:
            raise ConfigError(f"classifier {name!r}: {exc}") from None
    if not specs:
        raise ConfigError("no classifiers configured")
    return specs


def approaches_from(text: str) -> list[SplitApproach]:
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            out.append(SplitApproach(token))
        except ValueError:
            valid = ",".join(a.value for a in SplitApproach)
            raise ConfigError(f"unknown approach {token!r}, expected one of {valid}") from None
    if not out:
        raise ConfigError("no approaches given")
    return out


@dataclass
class RunConfig:
    """Everything one evaluation run needs, resolved from a kv file + CLI flags."""

    raw: dict[str, str]
    base_dir: Path
    terms_per_year: int
    ingest: IngestConfig | None = None
    students_path: Path | None = None
    courses_path: Path | None = None
    generator: GeneratorConfig | None = None

    @staticmethod
    def load(path: str | Path) -> "RunConfig":
        path = Path(path)
        kv = load_kv(path)
        base = path.parent
        tpy = _get_int(kv, "terms_per_year", 2)
        cfg = RunConfig(raw=kv, base_dir=base, terms_per_year=tpy)
        if "students" in kv or "courses" in kv:
            if not ("students" in kv and "courses" in kv):
                raise ConfigError("both 'students' and 'courses' paths are required")
            cfg.students_path = _resolve(base, kv["students"])
            cfg.courses_path = _resolve(base, kv["courses"])
            cfg.ingest = ingest_config_from(kv)
        elif "generator_config" in kv:
            gen_kv = load_kv(_resolve(base, kv["generator_config"]))
            cfg.generator = generator_config_from(gen_kv)
        else:
            raise ConfigError("config needs either students/courses paths or generator_config")
        return cfg


def _resolve(base: Path, text: str) -> Path:
    p = Path(text)
    return p if p.is_absolute() else base / p
