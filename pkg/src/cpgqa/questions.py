"""Per-patient question generation and template-based answers.

Five question types cover a patient's situation: a diabetes summary,
a risk summary, one question per diagnostic feature the risk model
weighted, one per medication, and lab-value range questions produced
from configured lab templates crossed with the three comparison
operators.  Types 1 and 2 are answered directly from patient data and
population statistics; the rest go through retrieval.

Patterns are ``string.Template`` strings so a deployment can swap the
wording without touching code.  Question ids are deterministic
functions of patient id, type and slot, which keeps reports, caches
and dashboards in agreement across runs.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum, IntEnum
from pathlib import Path
from string import Template

from .errors import ContractError, LoadError
from .patients import CcsTable, PatientRecord

# --- vocabulary -----------------------------------------------------------


class QuestionType(IntEnum):
    T2DM_SUMMARY = 1
    RISK_SUMMARY = 2
    FEATURE_IMPORTANCE = 3
    MEDICATION = 4
    LAB_VALUE = 5


class EntityKind(str, Enum):
    PATIENT = "Patient"
    RISK_PREDICTION = "RiskPrediction"
    POST_HOC_EXPLANATION = "PostHocExplanation"


# Types 4 and 5 stay patient-scoped; the risk tie-in for type 4 rides
# on the medication list rather than a separate entity.
ENTITY_BY_TYPE = {
    QuestionType.T2DM_SUMMARY: EntityKind.PATIENT,
    QuestionType.RISK_SUMMARY: EntityKind.RISK_PREDICTION,
    QuestionType.FEATURE_IMPORTANCE: EntityKind.POST_HOC_EXPLANATION,
    QuestionType.MEDICATION: EntityKind.PATIENT,
    QuestionType.LAB_VALUE: EntityKind.PATIENT,
}


class Operator(str, Enum):
    LESSER = "lesser"
    EQUAL = "equal"
    GREATER = "greater"

    @property
    def comparator_text(self) -> str:
        return {"lesser": "lesser than", "equal": "equal to", "greater": "greater than"}[self.value]

    @property
    def code(self) -> str:
        return {"lesser": "lt", "equal": "eq", "greater": "gt"}[self.value]


class AnswerSource(str, Enum):
    PATIENT_DATA = "PatientData"
    RISK_MODEL = "RiskModel"
    POPULATION_STATS = "PopulationStats"
    GUIDELINE = "Guideline"


# --- templates ------------------------------------------------------------


@dataclass(frozen=True)
class QuestionTemplate:
    id: str
    qtype: QuestionType
    pattern: str
    lab: str | None = None
    operators: tuple[Operator, ...] = ()


DEFAULT_TEMPLATES: dict[str, QuestionTemplate] = {
    t.id: t
    for t in (
        QuestionTemplate(
            id="t2dm_summary",
            qtype=QuestionType.T2DM_SUMMARY,
            pattern="What is the patient's A1C value? What are their most frequent diagnoses codes?",
        ),
        QuestionTemplate(
            id="risk_summary",
            qtype=QuestionType.RISK_SUMMARY,
            pattern="How does the predicted risk of the patient compare against the population?",
        ),
        QuestionTemplate(
            id="feature",
            qtype=QuestionType.FEATURE_IMPORTANCE,
            pattern="What can be done for this patient's ${feature}?",
        ),
        QuestionTemplate(
            id="medication",
            qtype=QuestionType.MEDICATION,
            pattern="What do the guidelines state about the ${drug_class} drug the patient is taking?",
        ),
        QuestionTemplate(
            id="lab_a1c",
            qtype=QuestionType.LAB_VALUE,
            pattern="What should be done for this patient, whose ${lab} levels are ${comparator} ${value} ?",
            lab="A1C",
            operators=(Operator.LESSER, Operator.EQUAL, Operator.GREATER),
        ),
    )
}


def load_templates(path: str | Path) -> dict[str, QuestionTemplate]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise LoadError(str(path), str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise LoadError(str(path), f"invalid JSON: {exc.msg}", exc.lineno) from exc
    out: dict[str, QuestionTemplate] = {}
    for template_id, spec in raw.items():
        try:
            out[template_id] = QuestionTemplate(
                id=template_id,
                qtype=QuestionType(int(spec["qtype"])),
                pattern=spec["pattern"],
                lab=spec.get("lab"),
                operators=tuple(Operator(op) for op in spec.get("operators", [])),
            )
        except (KeyError, ValueError) as exc:
            raise LoadError(str(path), f"template {template_id!r}: {exc}") from exc
    return out


# --- question instances ---------------------------------------------------


@dataclass(frozen=True)
class QuestionInstance:
    id: str
    patient_id: str
    qtype: QuestionType
    entity: EntityKind
    text: str
    slots: tuple[tuple[str, str], ...] = ()
    operator: Operator | None = None

    def slot(self, name: str) -> str | None:
        for key, value in self.slots:
            if key == name:
                return value
        return None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "patient_id": self.patient_id,
            "qtype": int(self.qtype),
            "entity": self.entity.value,
            "text": self.text,
            "slots": dict(self.slots),
            "operator": self.operator.value if self.operator else None,
        }


@dataclass(frozen=True)
class QuestionSet:
    questions: tuple[QuestionInstance, ...]
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class TemplateAnswer:
    text: str
    source: AnswerSource


@dataclass(frozen=True)
class PopulationStats:
    condition: str
    medicare_rate: float
    cci3_rate: float


# --- formatting helpers ---------------------------------------------------


def fmt_number(value: float) -> str:
    """Locale-independent rendering; whole numbers lose the decimal."""
    if value == int(value):
        return str(int(value))
    return f"{value:.1f}"


def fmt_percent(rate: float) -> str:
    return f"{rate * 100:.1f}"


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


# --- generation -----------------------------------------------------------


def generate_questions(
    patient: PatientRecord,
    ccs: CcsTable | None = None,
    templates: dict[str, QuestionTemplate] | None = None,
) -> QuestionSet:
    """Build every applicable question for one patient.

    Without a risk output the risk summary and feature questions are
    dropped and a warning recorded; lab templates only fire when the
    patient has that lab on record.  Ordering is by type, then by the
    source feature/medication/template rank, so regeneration is
    byte-stable.
    """
    templates = templates if templates is not None else DEFAULT_TEMPLATES
    by_type: dict[QuestionType, list[QuestionTemplate]] = {}
    for t in sorted(templates.values(), key=lambda t: t.id):
        by_type.setdefault(t.qtype, []).append(t)

    questions: list[QuestionInstance] = []
    warnings: list[str] = []
    used_ids: set[str] = set()

    def add(qid: str, qtype: QuestionType, text: str, slots: list[tuple[str, str]], operator: Operator | None = None):
        if qid in used_ids:  # two features sharing a code, etc.
            qid = f"{qid}-{sum(1 for u in used_ids if u.startswith(qid)) + 1}"
        used_ids.add(qid)
        questions.append(
            QuestionInstance(
                id=qid,
                patient_id=patient.id,
                qtype=qtype,
                entity=ENTITY_BY_TYPE[qtype],
                text=text,
                slots=tuple(slots),
                operator=operator,
            )
        )

    for t in by_type.get(QuestionType.T2DM_SUMMARY, []):
        add(f"{patient.id}:t1", QuestionType.T2DM_SUMMARY, t.pattern, [])

    has_risk = patient.risk is not None
    if not has_risk:
        warnings.append(f"patient {patient.id}: no risk output; skipping risk and feature questions")

    if has_risk:
        for t in by_type.get(QuestionType.RISK_SUMMARY, []):
            add(f"{patient.id}:t2", QuestionType.RISK_SUMMARY, t.pattern, [])
        feature_templates = by_type.get(QuestionType.FEATURE_IMPORTANCE, [])
        if feature_templates:
            t = feature_templates[0]
            rank = 0
            for feat in patient.risk.features:
                if feat.kind != "diagnosis":
                    continue
                rank += 1
                name = feat.name or (ccs.description(feat.code) if ccs and feat.code else feat.code or "")
                key = feat.code or name
                add(
                    f"{patient.id}:t3:{_slug(key)}",
                    QuestionType.FEATURE_IMPORTANCE,
                    Template(t.pattern).substitute(feature=name),
                    [("feature", name), ("code", feat.code or ""), ("rank", str(rank))],
                )

    med_templates = by_type.get(QuestionType.MEDICATION, [])
    if med_templates:
        t = med_templates[0]
        for med in patient.medications:
            add(
                f"{patient.id}:t4:{_slug(med.drug_class)}",
                QuestionType.MEDICATION,
                Template(t.pattern).substitute(drug_class=med.drug_class),
                [("drug_class", med.drug_class), ("name", med.name)],
            )

    for t in by_type.get(QuestionType.LAB_VALUE, []):
        if not t.lab:
            warnings.append(f"template {t.id}: type-5 template without a lab name")
            continue
        lab = patient.latest_lab(t.lab)
        if lab is None:
            continue
        value = fmt_number(lab.value)
        for op in t.operators:
            add(
                f"{patient.id}:t5:{_slug(t.lab)}:{op.code}",
                QuestionType.LAB_VALUE,
                Template(t.pattern).substitute(lab=t.lab, comparator=op.comparator_text, value=value),
                [("lab", t.lab), ("comparator", op.comparator_text), ("value", value)],
                operator=op,
            )

    return QuestionSet(questions=tuple(questions), warnings=tuple(warnings))


def questions_to_json(questions: "list[QuestionInstance] | tuple[QuestionInstance, ...]") -> str:
    return json.dumps([q.to_dict() for q in questions], indent=2, sort_keys=True)


# --- template answers -----------------------------------------------------

_T1_PATTERN = Template(
    "Patient's A1C is ${a1c}. Their most frequent diagnosis codes are ${diagnoses}."
)
_T1_NO_A1C_PATTERN = Template(
    "Patient has no A1C on record. Their most frequent diagnosis codes are ${diagnoses}."
)
_T2_PATTERN = Template(
    "The predicted risk of ${condition} the patient is ${risk} %. "
    "The population averages for the same condition are as follows: "
    "For Medicare patients: ${medicare} % "
    "For patients with Charlson Comorbidity Index (CCI) score of 3 : ${cci3} %"
)


def most_frequent_diagnoses(patient: PatientRecord, ccs: CcsTable | None, top: int = 3) -> list[str]:
    counts = Counter(code for visit in patient.visits for code in visit.codes)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top]
    return [(ccs.description(code) if ccs else code).lower() for code, _ in ranked]


def answer_summary(
    question: QuestionInstance,
    patient: PatientRecord,
    pop: PopulationStats,
    ccs: CcsTable | None = None,
) -> TemplateAnswer:
    """Answer types 1 and 2 from patient data; other types are a misuse."""
    if question.qtype == QuestionType.T2DM_SUMMARY:
        diagnoses = most_frequent_diagnoses(patient, ccs)
        rendered = ", ".join(diagnoses) if diagnoses else "none on record"
        lab = patient.latest_lab("A1C")
        if lab is None:
            text = _T1_NO_A1C_PATTERN.substitute(diagnoses=rendered)
        else:
            text = _T1_PATTERN.substitute(a1c=fmt_number(lab.value), diagnoses=rendered)
        return TemplateAnswer(text=text, source=AnswerSource.PATIENT_DATA)

    if question.qtype == QuestionType.RISK_SUMMARY:
        if patient.risk is None:
            raise ContractError(f"patient {patient.id} has no risk output")
        text = _T2_PATTERN.substitute(
            condition=patient.risk.condition,
            risk=fmt_percent(patient.risk.score),
            medicare=fmt_percent(pop.medicare_rate),
            cci3=fmt_percent(pop.cci3_rate),
        )
        return TemplateAnswer(text=text, source=AnswerSource.RISK_MODEL)

    raise ContractError(f"answer_summary only covers types 1 and 2, got type {int(question.qtype)}")
