"""Multiple-choice exam benchmark harness.

Grades a model on architecture exam questions where each item declares
how many of its options are correct. Scoring is exact-set match: partial
credit is never awarded, and an answer that does not parse to exactly the
declared number of option letters is ungradable (counted as incorrect,
logged per question).

Question file format (YAML or JSON): an object with a ``questions`` list;
each question carries ``id``, ``stem``, ``options`` (list of
``{label, text}`` with labels consecutive from A), ``correct`` (list of
labels), and ``n_correct``.
"""

from __future__ import annotations

import json
import re
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .gateway import Gateway, GatewayError
from .state import SchemaError

__all__ = [
    "ExamOption",
    "ExamQuestion",
    "ModelParams",
    "ModelScore",
    "QuestionResult",
    "BenchReport",
    "UNGRADABLE",
    "Ungradable",
    "load_question_set",
    "save_question_set",
    "parse_model_answer",
    "grade",
    "build_exam_prompt",
    "run_benchmark",
]


class Ungradable:
    """Sentinel: the model's reply did not yield a gradable answer set."""

    _instance: "Ungradable | None" = None

    def __new__(cls) -> "Ungradable":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Ungradable"


UNGRADABLE = Ungradable()

_LETTER_TOKEN_RE = re.compile(r"(?<![A-Za-z0-9])([A-Z])(?![A-Za-z0-9])")


@dataclass(frozen=True)
class ExamOption:
    label: str
    text: str


@dataclass(frozen=True)
class ExamQuestion:
    id: str
    stem: str
    options: list[ExamOption]
    correct: frozenset[str]
    n_correct: int

    @property
    def labels(self) -> list[str]:
        return [option.label for option in self.options]


@dataclass(frozen=True)
class ModelParams:
    model: str
    temperature: float = 0.0
    max_output_tokens: int = 256


@dataclass(frozen=True)
class ModelScore:
    correct_count: int
    total: int

    @property
    def accuracy(self) -> float:
        return self.correct_count / self.total if self.total else 0.0

    def render(self) -> str:
        return f"{self.correct_count}/{self.total} ({self.accuracy * 100:.0f}%)"


@dataclass(frozen=True)
class QuestionResult:
    predicted: frozenset[str] | Ungradable
    verdict: str  # "Correct" | "Incorrect"

    @property
    def ungradable(self) -> bool:
        return isinstance(self.predicted, Ungradable)

    def to_dict(self) -> dict[str, Any]:
        return {
            "predicted": (
                None if self.ungradable else sorted(self.predicted)  # type: ignore[arg-type]
            ),
            "ungradable": self.ungradable,
            "verdict": self.verdict,
        }


@dataclass
class BenchReport:
    set_name: str
    per_model: dict[str, ModelScore]
    per_question: dict[str, QuestionResult]
    incomplete: bool = False
    note: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "set_name": self.set_name,
            "per_model": {
                model: {
                    "correct_count": score.correct_count,
                    "total": score.total,
                    "accuracy": score.accuracy,
                }
                for model, score in self.per_model.items()
            },
            "per_question": {
                qid: result.to_dict()
                for qid, result in self.per_question.items()
            },
            "incomplete": self.incomplete,
            "note": self.note,
        }

    def render_table(self) -> str:
        header_model = "Model"
        width = max(
            len(header_model), *(len(model) for model in self.per_model)
        ) if self.per_model else len(header_model)
        lines = [f"{header_model:<{width}}  {self.set_name}"]
        for model, score in self.per_model.items():
            lines.append(f"{model:<{width}}  {score.render()}")
        if self.incomplete:
            lines.append(f"(incomplete: {self.note})")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Question sets
# ---------------------------------------------------------------------------

def _question_from_dict(obj: Any, where: str) -> ExamQuestion:
    if not isinstance(obj, dict):
        raise SchemaError(where, "question must be an object")
    qid = obj.get("id")
    if not isinstance(qid, str) or not qid:
        raise SchemaError(f"{where}.id", "must be a non-empty string")
    where = f"{where}(id={qid})"
    stem = obj.get("stem")
    if not isinstance(stem, str) or not stem:
        raise SchemaError(f"{where}.stem", "must be a non-empty string")
    raw_options = obj.get("options")
    if not isinstance(raw_options, list) or not raw_options:
        raise SchemaError(f"{where}.options", "must be a non-empty list")
    options: list[ExamOption] = []
    for i, item in enumerate(raw_options):
        expected = string.ascii_uppercase[i]
        if (
            not isinstance(item, dict)
            or not isinstance(item.get("label"), str)
            or not isinstance(item.get("text"), str)
        ):
            raise SchemaError(
                f"{where}.options[{i}]", 'must be {"label", "text"}'
            )
        if item["label"] != expected:
            raise SchemaError(
                f"{where}.options[{i}].label",
                f"labels must be consecutive from A; expected {expected!r}, "
                f"got {item['label']!r}",
            )
        options.append(ExamOption(label=item["label"], text=item["text"]))
    raw_correct = obj.get("correct")
    if not isinstance(raw_correct, list) or not all(
        isinstance(c, str) for c in raw_correct
    ):
        raise SchemaError(f"{where}.correct", "must be a list of labels")
    correct = frozenset(raw_correct)
    if len(correct) != len(raw_correct):
        raise SchemaError(f"{where}.correct", "labels must be unique")
    labels = {option.label for option in options}
    stray = correct - labels
    if stray:
        raise SchemaError(
            f"{where}.correct", f"labels {sorted(stray)} not among the options"
        )
    n_correct = obj.get("n_correct")
    if not isinstance(n_correct, int) or n_correct < 1:
        raise SchemaError(f"{where}.n_correct", "must be a positive integer")
    if n_correct > len(options):
        raise SchemaError(
            f"{where}.n_correct", "cannot exceed the number of options"
        )
    if len(correct) != n_correct:
        raise SchemaError(
            f"{where}.correct",
            f"declares {n_correct} correct answers but lists {len(correct)}",
        )
    return ExamQuestion(
        id=qid, stem=stem, options=options, correct=correct, n_correct=n_correct
    )


def load_question_set(path: str | Path) -> list[ExamQuestion]:
    """Load and validate a question file (YAML or JSON), order preserved."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(str(path), f"cannot read question set: {exc}") from exc
    try:
        doc = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise SchemaError(str(path), f"invalid document: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("questions"), list):
        raise SchemaError(str(path), 'expected an object with a "questions" list')
    questions = [
        _question_from_dict(item, f"{path.name}: questions[{i}]")
        for i, item in enumerate(doc["questions"])
    ]
    seen: set[str] = set()
    for question in questions:
        if question.id in seen:
            raise SchemaError(
                f"{path.name}: questions", f"duplicate question id {question.id!r}"
            )
        seen.add(question.id)
    return questions


def save_question_set(questions: list[ExamQuestion], path: str | Path) -> None:
    doc = {
        "questions": [
            {
                "id": q.id,
                "stem": q.stem,
                "options": [
                    {"label": o.label, "text": o.text} for o in q.options
                ],
                "correct": sorted(q.correct),
                "n_correct": q.n_correct,
            }
            for q in questions
        ]
    }
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(
            json.dumps(doc, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
    else:
        path.write_text(
            yaml.safe_dump(doc, sort_keys=False, allow_unicode=True),
            encoding="utf-8",
        )


# ---------------------------------------------------------------------------
# Answer extraction and grading
# ---------------------------------------------------------------------------

def parse_model_answer(
    raw: str, question: ExamQuestion
) -> frozenset[str] | Ungradable:
    """Extract the chosen option letters from a model reply.

    Rule: every standalone uppercase letter (delimited by non-alphanumeric
    characters) that is one of the question's option labels counts as a
    choice; duplicates collapse. The result is gradable only when exactly
    ``n_correct`` distinct labels were extracted.
    """
    valid = set(question.labels)
    extracted: list[str] = []
    for match in _LETTER_TOKEN_RE.finditer(raw):
        letter = match.group(1)
        if letter in valid and letter not in extracted:
            extracted.append(letter)
    if len(extracted) != question.n_correct:
        return UNGRADABLE
    return frozenset(extracted)


def grade(
    predicted: frozenset[str] | set[str] | Ungradable, correct: frozenset[str]
) -> str:
    """Exact-set verdict: ``Correct`` only when predicted equals correct.

    An ungradable prediction is Incorrect. Depends only on set equality,
    so option order never matters.
    """
    if isinstance(predicted, Ungradable):
        return "Incorrect"
    return "Correct" if frozenset(predicted) == correct else "Incorrect"


def build_exam_prompt(question: ExamQuestion) -> tuple[str, str]:
    """The (system, user) texts for one question.

    The declared number of correct answers is included in the prompt.
    """
    system_text = (
        "You are taking a multiple-choice cloud architecture certification "
        "exam. Reply with exactly the requested number of option letters "
        "and nothing else."
    )
    options = "\n".join(
        f"{option.label}. {option.text}" for option in question.options
    )
    plural = "s" if question.n_correct > 1 else ""
    user_text = (
        f"{question.stem}\n\nOptions:\n{options}\n\n"
        f"Select exactly {question.n_correct} option{plural}. "
        "Reply with the letter" + plural + " only, separated by commas."
    )
    return system_text, user_text


def run_benchmark(
    questions: list[ExamQuestion],
    model_params: ModelParams,
    gateway: Gateway,
    *,
    parallelism: int = 1,
    set_name: str = "questions",
) -> BenchReport:
    """One completion per question, graded by exact set match.

    A provider failure aborts the run: already-answered questions stay
    graded and the report is flagged incomplete. ``total`` is always the
    question count.
    """

    def ask(question: ExamQuestion) -> QuestionResult:
        system_text, user_text = build_exam_prompt(question)
        result = gateway.complete(
            gateway.request(
                system_text,
                user_text,
                model=model_params.model,
                temperature=model_params.temperature,
                max_output_tokens=model_params.max_output_tokens,
            )
        )
        predicted = parse_model_answer(result.text, question)
        return QuestionResult(
            predicted=predicted, verdict=grade(predicted, question.correct)
        )

    per_question: dict[str, QuestionResult] = {}
    incomplete = False
    note: str | None = None
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        futures = {q.id: pool.submit(ask, q) for q in questions}
        for question in questions:
            try:
                per_question[question.id] = futures[question.id].result()
            except GatewayError as exc:
                incomplete = True
                note = f"{getattr(exc, 'code', 'GatewayError')}: {exc}"
                break

    correct_count = sum(
        1 for result in per_question.values() if result.verdict == "Correct"
    )
    return BenchReport(
        set_name=set_name,
        per_model={
            model_params.model: ModelScore(
                correct_count=correct_count, total=len(questions)
            )
        },
        per_question=per_question,
        incomplete=incomplete,
        note=note,
    )
