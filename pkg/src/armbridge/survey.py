"""Likert questionnaire definition and aggregation.

The bundled instrument has 9 questions grouped into 7 categories, answered
on a 5-level satisfaction scale. Aggregation works in exact rationals
(counts over subjects x questions per category); rendering rounds half-up
to 2 decimals. Comparisons against previously printed tables should use a
+/-0.01 band, since printed figures mix truncation and rounding.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .errors import IncompleteResponse, Unreconstructable

MAX_RECONSTRUCT_TOTAL = 1000


class Level(Enum):
    VERY_SATISFIED = "very_satisfied"
    SATISFIED = "satisfied"
    NEUTRAL = "neutral"
    UNSATISFIED = "unsatisfied"
    VERY_UNSATISFIED = "very_unsatisfied"

    @property
    def display(self) -> str:
        return self.value.replace("_", " ").title()


LEVELS = tuple(Level)

_LEVEL_ALIASES = {level.value: level for level in LEVELS}
_LEVEL_ALIASES.update({level.display.lower(): level for level in LEVELS})
_LEVEL_ALIASES["natural"] = Level.NEUTRAL  # historical table header spelling


def parse_level(text: str) -> Level:
    key = text.strip().lower()
    if key not in _LEVEL_ALIASES:
        raise ValueError(f"unknown satisfaction level {text!r}")
    return _LEVEL_ALIASES[key]


@dataclass(frozen=True)
class Category:
    name: str
    question_ids: tuple[str, ...]


@dataclass(frozen=True)
class Questionnaire:
    categories: tuple[Category, ...]

    def __post_init__(self):
        seen: set[str] = set()
        for cat in self.categories:
            if not cat.question_ids:
                raise ValueError(f"category {cat.name!r} has no questions")
            for qid in cat.question_ids:
                if qid in seen:
                    raise ValueError(f"question {qid!r} appears in two categories")
                seen.add(qid)
        if not seen:
            raise ValueError("questionnaire has no questions")

    @property
    def question_ids(self) -> tuple[str, ...]:
        return tuple(q for cat in self.categories for q in cat.question_ids)

    def to_dict(self) -> dict:
        return {
            "categories": [
                {"name": c.name, "questions": list(c.question_ids)}
                for c in self.categories
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> Questionnaire:
        return cls(tuple(
            Category(name=str(c["name"]), question_ids=tuple(str(q) for q in c["questions"]))
            for c in data["categories"]
        ))

    @classmethod
    def load(cls, path) -> Questionnaire:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def default_questionnaire() -> Questionnaire:
    """The 9-question, 7-category satisfaction instrument."""
    rows = [
        ("Robot Convenience", 3),
        ("Robot Safety", 1),
        ("Making Entertainment and Motivation with Games", 1),
        ("Concentration", 1),
        ("Simplicity in Use", 1),
        ("Tolerance for Tasks and the Degree of Difficulty", 1),
        ("Causes Pain and Fatigue", 1),
    ]
    categories = []
    qnum = 1
    for name, count in rows:
        ids = tuple(f"q{qnum + i}" for i in range(count))
        qnum += count
        categories.append(Category(name, ids))
    return Questionnaire(tuple(categories))


@dataclass(frozen=True)
class SurveyResponse:
    subject_id: str
    answers: dict  # question_id -> Level

    def __post_init__(self):
        for qid, level in self.answers.items():
            if not isinstance(level, Level):
                raise ValueError(f"answer for {qid!r} is not a Level")


def render_hundredths(fraction: Fraction) -> int:
    """Percentage in integer hundredths, rounded half-up."""
    n = fraction.numerator * 10_000
    d = fraction.denominator
    q, r = divmod(n, d)
    if 2 * r >= d:
        q += 1
    return q


def format_percent(fraction: Fraction) -> str:
    q = render_hundredths(fraction)
    return f"{q // 100}.{q % 100:02d}"


@dataclass(frozen=True)
class CategorySummary:
    name: str
    question_count: int
    counts: tuple[int, ...]            # per level, over subjects x questions
    fractions: tuple[Fraction, ...]    # exact shares per level, sum to 1

    @property
    def percents(self) -> tuple[float, ...]:
        return tuple(render_hundredths(f) / 100 for f in self.fractions)

    @property
    def percent_strings(self) -> tuple[str, ...]:
        return tuple(format_percent(f) for f in self.fractions)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "question_count": self.question_count,
            "counts": list(self.counts),
            "percents": {
                level.value: pct for level, pct in zip(LEVELS, self.percents)
            },
        }


def aggregate(responses, questionnaire: Questionnaire) -> list[CategorySummary]:
    """Per category and level: answer share over subjects x questions."""
    responses = list(responses)
    if not responses:
        raise ValueError("need at least one response")
    for response in responses:
        for qid in questionnaire.question_ids:
            if qid not in response.answers:
                raise IncompleteResponse(response.subject_id, qid)

    summaries = []
    for cat in questionnaire.categories:
        counts = [0] * len(LEVELS)
        for response in responses:
            for qid in cat.question_ids:
                counts[LEVELS.index(response.answers[qid])] += 1
        total = len(responses) * len(cat.question_ids)
        fractions = tuple(Fraction(c, total) for c in counts)
        summaries.append(CategorySummary(
            name=cat.name,
            question_count=len(cat.question_ids),
            counts=tuple(counts),
            fractions=fractions,
        ))
    return summaries


def reconstruct_counts(percentages, total_answers: int) -> list[tuple[int, ...]]:
    """All nonnegative integer count vectors over the scale levels summing to
    `total_answers` whose 2-decimal rendering matches the given percentages
    within +/-0.01. Raises Unreconstructable when none exists."""
    if total_answers <= 0 or total_answers > MAX_RECONSTRUCT_TOTAL:
        raise ValueError(f"total_answers must be in [1, {MAX_RECONSTRUCT_TOTAL}]")
    targets = [round(float(p) * 100) for p in percentages]  # integer hundredths
    if len(targets) != len(LEVELS):
        raise ValueError(f"expected {len(LEVELS)} percentages")

    candidates: list[list[int]] = []
    for target in targets:
        level_candidates = [
            c for c in range(total_answers + 1)
            if abs(render_hundredths(Fraction(c, total_answers)) - target) <= 1
        ]
        if not level_candidates:
            raise Unreconstructable(f"no count renders near {target / 100:.2f}%")
        candidates.append(level_candidates)

    matches: list[tuple[int, ...]] = []

    def walk(level: int, remaining: int, acc: list[int]) -> None:
        if level == len(candidates) - 1:
            if remaining in candidates[level]:
                matches.append(tuple(acc + [remaining]))
            return
        for c in candidates[level]:
            if c <= remaining:
                walk(level + 1, remaining - c, acc + [c])

    walk(0, total_answers, [])
    if not matches:
        raise Unreconstructable(
            f"no count vector over {total_answers} answers renders to {targets}"
        )
    return sorted(matches)


def render_table(summaries) -> str:
    """Fixed-width text table: one category row, five percentage columns."""
    headers = ["Type of Questions", "Questions"] + [level.display for level in LEVELS]
    rows = [
        [s.name, str(s.question_count)] + [f"{p}%" for p in s.percent_strings]
        for s in summaries
    ]
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in rows)) if rows else len(headers[i])
        for i in range(len(headers))
    ]

    def fmt(cells) -> str:
        parts = [cells[0].ljust(widths[0])]
        parts += [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join(parts).rstrip()

    lines = [fmt(headers), "-" * (sum(widths) + 2 * (len(widths) - 1))]
    lines += [fmt(r) for r in rows]
    return "\n".join(lines) + "\n"


# --- CSV and JSON interchange ---

def responses_from_csv(text: str) -> list[SurveyResponse]:
    """One row per subject; columns: subject_id, then one per question id."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or "subject_id" not in reader.fieldnames:
        raise ValueError("responses CSV needs a subject_id column")
    question_ids = [f for f in reader.fieldnames if f != "subject_id"]
    responses = []
    for row in reader:
        answers = {}
        for qid in question_ids:
            raw = (row.get(qid) or "").strip()
            if raw:
                answers[qid] = parse_level(raw)
        responses.append(SurveyResponse(subject_id=row["subject_id"], answers=answers))
    return responses


def responses_to_csv(responses, questionnaire: Questionnaire) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    qids = list(questionnaire.question_ids)
    writer.writerow(["subject_id"] + qids)
    for r in responses:
        writer.writerow([r.subject_id] + [r.answers[q].value for q in qids])
    return out.getvalue()


def summaries_to_csv(summaries) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["category", "question_count"] + [level.value for level in LEVELS])
    for s in summaries:
        writer.writerow([s.name, s.question_count] + list(s.percent_strings))
    return out.getvalue()


def summaries_to_json(summaries) -> dict:
    return {"categories": [s.to_dict() for s in summaries]}
