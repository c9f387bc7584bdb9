"""Patient records, cohort selection, and diagnosis-code rollups.

Records arrive as one JSON array of patients.  Continuous enrollment is
modeled as an explicit coverage interval per patient rather than as
month-by-month eligibility flags, which is all the cohort rule needs.

The CCS table is the standard multi-level diagnosis-category CSV.  Of
its columns we keep four: the category, the per-code description, the
multi-level-2 category and its description.  Codes roll up to that
level-2 description, or "Unmapped" if the table has never heard of
them.
"""

from __future__ import annotations

import calendar
import csv
import json
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import LoadError

UNMAPPED = "Unmapped"


class AgeGroup(str, Enum):
    LE_44 = "<=44"
    MID_45_54 = "45-54"
    GE_55 = ">=55"


class Sex(str, Enum):
    FEMALE = "FEMALE"
    MALE = "MALE"


@dataclass(frozen=True)
class Visit:
    date: date
    codes: tuple[str, ...]


@dataclass(frozen=True)
class LabResult:
    name: str
    value: float
    unit: str | None
    date: date


@dataclass(frozen=True)
class Medication:
    name: str
    drug_class: str


@dataclass(frozen=True)
class FeatureImportance:
    name: str
    weight: float
    kind: str = "diagnosis"
    code: str | None = None


@dataclass(frozen=True)
class RiskOutput:
    condition: str
    score: float
    features: tuple[FeatureImportance, ...] = ()


@dataclass(frozen=True)
class CoverageInterval:
    start: date
    end: date


@dataclass(frozen=True)
class PatientRecord:
    id: str
    birth_date: date
    sex: Sex
    age_group: AgeGroup
    coverage: CoverageInterval
    visits: tuple[Visit, ...] = ()
    labs: tuple[LabResult, ...] = ()
    medications: tuple[Medication, ...] = ()
    risk: RiskOutput | None = None

    def latest_lab(self, name: str) -> LabResult | None:
        """Most recent lab with the given name; later list position wins ties."""
        best: LabResult | None = None
        for lab in self.labs:
            if lab.name == name and (best is None or lab.date >= best.date):
                best = lab
        return best


# --- loading --------------------------------------------------------------


def _parse_date(value: str) -> date:
    return date.fromisoformat(value)


def load_patients(path: str | Path) -> list[PatientRecord]:
    """Read a JSON array of patient records, validating as we go."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise LoadError(str(path), str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise LoadError(str(path), f"invalid JSON: {exc.msg}", exc.lineno) from exc
    if not isinstance(data, list):
        raise LoadError(str(path), "expected a JSON array of patients")

    out: list[PatientRecord] = []
    seen: set[str] = set()
    for i, rec in enumerate(data):
        where = f"patient[{i}]"
        try:
            patient = _parse_patient(rec)
        except (KeyError, ValueError, TypeError) as exc:
            raise LoadError(str(path), f"{where}: {exc}") from exc
        if patient.id in seen:
            raise LoadError(str(path), f"{where}: duplicate id {patient.id!r}")
        seen.add(patient.id)
        out.append(patient)
    return out


def _parse_patient(rec: dict) -> PatientRecord:
    risk = None
    if rec.get("risk") is not None:
        r = rec["risk"]
        score = float(r["score"])
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"risk score {score} outside [0, 1]")
        risk = RiskOutput(
            condition=r["condition"],
            score=score,
            features=tuple(
                FeatureImportance(
                    name=f["name"],
                    weight=float(f["weight"]),
                    kind=f.get("kind", "diagnosis"),
                    code=f.get("code"),
                )
                for f in r.get("features", [])
            ),
        )
    coverage = CoverageInterval(
        start=_parse_date(rec["coverage"]["start"]),
        end=_parse_date(rec["coverage"]["end"]),
    )
    if coverage.end < coverage.start:
        raise ValueError("coverage interval ends before it starts")
    return PatientRecord(
        id=rec["id"],
        birth_date=_parse_date(rec["birth_date"]),
        sex=Sex(rec["sex"]),
        age_group=AgeGroup(rec["age_group"]),
        coverage=coverage,
        visits=tuple(
            Visit(date=_parse_date(v["date"]), codes=tuple(v["codes"]))
            for v in rec.get("visits", [])
        ),
        labs=tuple(
            LabResult(
                name=lab["name"],
                value=float(lab["value"]),
                unit=lab.get("unit"),
                date=_parse_date(lab["date"]),
            )
            for lab in rec.get("labs", [])
        ),
        medications=tuple(
            Medication(name=m["name"], drug_class=m["drug_class"])
            for m in rec.get("medications", [])
        ),
        risk=risk,
    )


# --- cohort selection -----------------------------------------------------


@dataclass(frozen=True)
class CohortCriteria:
    min_t2dm_visits: int = 2
    enrollment_months: int = 12
    age_min: int = 19
    age_max: int = 64
    t2dm_prefixes: tuple[str, ...] = ("E11",)
    other_diabetes_prefixes: tuple[str, ...] = ("E10", "E13", "O24")


def normalize_code(code: str) -> str:
    return code.upper().replace(".", "").strip("'\" ")


def _has_prefix(code: str, prefixes: Sequence[str]) -> bool:
    norm = normalize_code(code)
    return any(norm.startswith(normalize_code(p)) for p in prefixes)


def _visit_matches(visit: Visit, prefixes: Sequence[str]) -> bool:
    return any(_has_prefix(c, prefixes) for c in visit.codes)


def first_t2dm_date(patient: PatientRecord, criteria: CohortCriteria = CohortCriteria()) -> date | None:
    dates = [v.date for v in patient.visits if _visit_matches(v, criteria.t2dm_prefixes)]
    return min(dates) if dates else None


def age_at(birth: date, when: date) -> int:
    years = when.year - birth.year
    if (when.month, when.day) < (birth.month, birth.day):
        years -= 1
    return years


def months_before(when: date, months: int) -> date:
    total = when.year * 12 + (when.month - 1) - months
    year, month = divmod(total, 12)
    month += 1
    day = min(when.day, calendar.monthrange(year, month)[1])
    return date(year, month, day)


def cohort_filter(
    patients: Iterable[PatientRecord],
    criteria: CohortCriteria = CohortCriteria(),
) -> set[str]:
    """Ids of patients passing all four cohort rules.

    The rules: enough type-2-diabetes visits, continuous enrollment for
    the lookback window before the first such diagnosis, strictly more
    type-2 visits than other-diabetes visits, and onset age within the
    configured working-age band.
    """
    keep: set[str] = set()
    for p in patients:
        t2dm_visits = sum(_visit_matches(v, criteria.t2dm_prefixes) for v in p.visits)
        if t2dm_visits < criteria.min_t2dm_visits:
            continue
        first = first_t2dm_date(p, criteria)
        if first is None:
            continue
        window_start = months_before(first, criteria.enrollment_months)
        if p.coverage.start > window_start or p.coverage.end < first:
            continue
        other_visits = sum(
            _visit_matches(v, criteria.other_diabetes_prefixes) for v in p.visits
        )
        if t2dm_visits <= other_visits:
            continue
        onset_age = age_at(p.birth_date, first)
        if not criteria.age_min <= onset_age <= criteria.age_max:
            continue
        keep.add(p.id)
    return keep


# --- CCS rollup -----------------------------------------------------------


@dataclass(frozen=True)
class CcsEntry:
    category: str
    description: str
    level2_category: str
    level2_description: str


class CcsTable:
    """Diagnosis code lookups against the multi-level CCS CSV."""

    def __init__(self, entries: dict[str, CcsEntry]):
        self._entries = entries

    def entry(self, code: str) -> CcsEntry | None:
        return self._entries.get(normalize_code(code))

    def rollup(self, code: str) -> str:
        e = self.entry(code)
        return e.level2_description if e else UNMAPPED

    def description(self, code: str) -> str:
        e = self.entry(code)
        return e.description if e else code

    def __len__(self) -> int:
        return len(self._entries)


def _strip_quotes(value: str) -> str:
    return value.strip().strip("'")


def load_ccs(path: str | Path) -> CcsTable:
    """Parse the CCS CSV, keeping fields 2, 3, 7 and 8 per code.

    The distributed file wraps every value in single quotes (commas
    appear inside descriptions) and leads with a header row; both are
    handled here.
    """
    entries: dict[str, CcsEntry] = {}
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh, quotechar="'")
            for lineno, row in enumerate(reader, start=1):
                if lineno == 1 or not row:
                    continue
                if len(row) < 8:
                    raise LoadError(str(path), f"expected >= 8 fields, got {len(row)}", lineno)
                code = normalize_code(_strip_quotes(row[0]))
                entries[code] = CcsEntry(
                    category=_strip_quotes(row[1]),
                    description=_strip_quotes(row[2]),
                    level2_category=_strip_quotes(row[6]),
                    level2_description=_strip_quotes(row[7]),
                )
    except OSError as exc:
        raise LoadError(str(path), str(exc)) from exc
    return CcsTable(entries)


# --- prototype summary ----------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    feature: str
    count: int
    percent: float
    highlighted: bool


def _row(feature: str, count: int, total: int) -> SummaryRow:
    percent = round(100.0 * count / total, 1)
    return SummaryRow(feature=feature, count=count, percent=percent, highlighted=percent > 50.0)


def prototype_summary(patients: Sequence[PatientRecord], ccs: CcsTable) -> list[SummaryRow]:
    """Demographic and level-2 disease-grouping breakdown of a cohort.

    One row per age bucket (always all three), per observed sex, and
    per disease grouping any patient's visit codes roll up to.  Counts
    are distinct patients; rows past the 50% mark are highlighted.
    """
    if not patients:
        raise ValueError("prototype_summary needs at least one patient")
    total = len(patients)
    rows: list[SummaryRow] = []

    for bucket in (AgeGroup.LE_44, AgeGroup.MID_45_54, AgeGroup.GE_55):
        count = sum(p.age_group == bucket for p in patients)
        rows.append(_row(f"Age at onset {bucket.value}", count, total))

    for sex in sorted({p.sex for p in patients}, key=lambda s: s.value):
        count = sum(p.sex == sex for p in patients)
        rows.append(_row(f"SEX - {sex.value}", count, total))

    grouping_patients: dict[str, set[str]] = {}
    for p in patients:
        for visit in p.visits:
            for code in visit.codes:
                grouping_patients.setdefault(ccs.rollup(code), set()).add(p.id)
    for grouping in sorted(grouping_patients):
        rows.append(_row(grouping, len(grouping_patients[grouping]), total))
    return rows
