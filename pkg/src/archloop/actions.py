"""The four generation actions that produce an architecture state.

Each action loads its prompt template (a versioned text asset, one file
per action), injects the serialized design state it needs into the user
message, requests a completion through the gateway, and parses the reply
against the action's output schema. Parse or validation failures are fed
back to the model with the offending output for repair, at most three
completions per invocation; persistent failures surface as
:class:`ParseFailure` (or :class:`PinnedViolation` when a mandatory
pinned service is still missing on the last attempt).

Context discipline: the user message carries exactly the inputs each
action needs — subject always, preferences once any exist, plus the
action-specific state — and never a chat transcript.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Any

from .gateway import Gateway
from .state import (
    SUMMARY_ASPECT_KEYS,
    DIAGRAM_FIRST_TOKENS,
    ArchitectureState,
    Issue,
    ServiceEntry,
    Summary,
    UserState,
    dumps_canonical,
    encode,
    issues_to_dict,
    pinned_services,
    preferences_to_dict,
    services_to_dict,
    summary_to_dict,
)

__all__ = [
    "ActionKind",
    "PartialArchitecture",
    "PromptBundle",
    "RepairAttempt",
    "ActionError",
    "MissingContext",
    "ParseFailure",
    "PinnedViolation",
    "MAX_ATTEMPTS",
    "load_template",
    "template_checksum",
    "build_prompt",
    "run_proposal",
    "run_summarization",
    "run_inspection",
    "run_inquiry",
    "strip_fences",
]

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 3

_FENCE_BLOCK_RE = re.compile(r"```[a-zA-Z0-9_-]*\s*\n(.*?)\n?\s*```", re.DOTALL)


class ActionKind(str, Enum):
    PROPOSAL = "proposal"
    SUMMARIZATION = "summarization"
    INSPECTION = "inspection"
    INQUIRY_GENERATION = "inquiry"


class ActionError(Exception):
    """Base class for action-layer errors."""

    code = "ActionError"


class MissingContext(ActionError):
    """A required input for the action kind was absent."""

    code = "MissingContext"


@dataclass(frozen=True)
class RepairAttempt:
    attempt_index: int
    parse_error: str
    raw_output: str


class ParseFailure(ActionError):
    """The model never produced usable output within the attempt budget."""

    code = "ParseFailure"

    def __init__(self, message: str, attempts: list[RepairAttempt]):
        super().__init__(message)
        self.attempts = attempts


class PinnedViolation(ActionError):
    """A pinned service was still missing after every repair attempt."""

    code = "PinnedViolation"

    def __init__(
        self, missing: list[str], attempts: list[RepairAttempt]
    ):
        super().__init__(f"proposal omitted pinned services: {', '.join(missing)}")
        self.missing = missing
        self.attempts = attempts


@dataclass(frozen=True)
class PartialArchitecture:
    """The already-generated pieces of the iteration in progress."""

    services: list[ServiceEntry] | None = None
    summary: Summary | None = None
    inspection: list[Issue] | None = None


@dataclass(frozen=True)
class PromptBundle:
    kind: ActionKind
    system_text: str
    user_text: str
    schema_id: str


_SCHEMA_IDS = {
    ActionKind.PROPOSAL: "services.v1",
    ActionKind.SUMMARIZATION: "summary.v1",
    ActionKind.INSPECTION: "issues.v1",
    ActionKind.INQUIRY_GENERATION: "questions.v1",
}


@lru_cache(maxsize=None)
def load_template(kind: ActionKind) -> str:
    """Load the prompt template asset for an action, logging its checksum."""
    text = (
        resources.files("archloop")
        .joinpath(f"templates/{kind.value}.txt")
        .read_text(encoding="utf-8")
    )
    logger.info(
        "loaded template %s (sha256=%s)", kind.value, template_checksum(kind)
    )
    return text


def template_checksum(kind: ActionKind) -> str:
    raw = (
        resources.files("archloop")
        .joinpath(f"templates/{kind.value}.txt")
        .read_bytes()
    )
    return hashlib.sha256(raw).hexdigest()


def _context_sections(
    user: UserState,
    *,
    prev: ArchitectureState | None = None,
    services: list[ServiceEntry] | None = None,
    summary: Summary | None = None,
    inspection: list[Issue] | None = None,
) -> str:
    parts = [f"[Subject]\n{user.subject}"]
    if user.preferences:
        parts.append(
            "[Preferences]\n" + dumps_canonical(preferences_to_dict(user))
        )
    if prev is not None:
        parts.append("[Previous Architecture]\n" + encode(prev))
    if services is not None:
        parts.append(
            "[Proposed Services]\n" + dumps_canonical(services_to_dict(services))
        )
    if summary is not None:
        parts.append("[Summary]\n" + dumps_canonical(summary_to_dict(summary)))
    if inspection is not None:
        parts.append(
            "[Inspection]\n" + dumps_canonical(issues_to_dict(inspection))
        )
    return "\n\n".join(parts)


def build_prompt(
    kind: ActionKind,
    user: UserState,
    prev: ArchitectureState | None = None,
    partial: PartialArchitecture | None = None,
) -> PromptBundle:
    """Assemble the prompt for one action.

    The system text is the stored template, byte-exact; the user text
    carries the serialized inputs the action kind requires.
    """
    if kind is ActionKind.PROPOSAL:
        user_text = _context_sections(user, prev=prev)
    elif kind in (ActionKind.SUMMARIZATION, ActionKind.INSPECTION):
        if partial is None or partial.services is None:
            raise MissingContext(f"{kind.value} requires the proposed services")
        user_text = _context_sections(user, services=partial.services)
    elif kind is ActionKind.INQUIRY_GENERATION:
        if partial is None or partial.services is None:
            raise MissingContext("inquiry generation requires the proposed services")
        if partial.summary is None:
            raise MissingContext("inquiry generation requires the summary")
        if partial.inspection is None:
            raise MissingContext("inquiry generation requires the inspection")
        user_text = _context_sections(
            user,
            services=partial.services,
            summary=partial.summary,
            inspection=partial.inspection,
        )
    else:  # pragma: no cover - enum is closed
        raise MissingContext(f"unknown action kind {kind!r}")
    return PromptBundle(
        kind=kind,
        system_text=load_template(kind),
        user_text=user_text,
        schema_id=_SCHEMA_IDS[kind],
    )


# ---------------------------------------------------------------------------
# Output parsing
# ---------------------------------------------------------------------------

class _RepairNeeded(Exception):
    """Internal: output unusable; message is sent back to the model."""

    def __init__(
        self,
        message: str,
        category: str = "parse",
        missing: list[str] | None = None,
    ):
        super().__init__(message)
        self.category = category
        self.missing = missing or []


def strip_fences(text: str) -> str:
    """Remove surrounding code-fence markers, keeping the inner body."""
    match = _FENCE_BLOCK_RE.search(text)
    if match:
        return match.group(1).strip()
    return text.replace("```", "").strip()


def _extract_json_object(text: str) -> dict[str, Any]:
    candidates = [text]
    fenced = _FENCE_BLOCK_RE.findall(text)
    candidates.extend(fenced)
    start, end = text.find("{"), text.rfind("}")
    if start != -1 and end > start:
        candidates.append(text[start : end + 1])
    for candidate in candidates:
        try:
            data = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(data, dict):
            return data
        raise _RepairNeeded("output must be a single JSON object")
    raise _RepairNeeded("output is not parseable JSON")


def _as_text(value: Any, what: str, *, nonempty: bool = True) -> str:
    if isinstance(value, (int, float, bool)):
        value = json.dumps(value)
    if not isinstance(value, str):
        raise _RepairNeeded(f"{what} must be a string")
    if nonempty and not value.strip():
        raise _RepairNeeded(f"{what} must be non-empty")
    return value


def _parse_services(
    text: str, pinned: list[str], final: bool
) -> list[ServiceEntry]:
    data = _extract_json_object(text)
    raw = data.get("services")
    if not isinstance(raw, list):
        raise _RepairNeeded('output must contain a "services" list')
    if not raw:
        raise _RepairNeeded("the services list must not be empty")
    entries: list[ServiceEntry] = []
    seen: set[str] = set()
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise _RepairNeeded(f"services[{i}] must be an object")
        name = _as_text(item.get("name"), f"services[{i}].name")
        usage = _as_text(item.get("usage"), f"services[{i}].usage")
        raw_settings = item.get("settings", {})
        if not isinstance(raw_settings, dict):
            raise _RepairNeeded(f"services[{i}].settings must be an object")
        settings = {
            str(key): _as_text(
                value, f"services[{i}].settings[{key!r}]", nonempty=False
            )
            for key, value in raw_settings.items()
        }
        if name in seen:
            raise _RepairNeeded(f"duplicate service name {name!r}")
        seen.add(name)
        entries.append(ServiceEntry(name=name, usage=usage, settings=settings))

    folded = {entry.name.lower() for entry in entries}
    missing = [p for p in pinned if p.lower() not in folded]
    if missing:
        raise _RepairNeeded(
            "these pinned services are mandatory but missing from the "
            "proposal: " + ", ".join(missing),
            category="pinned",
            missing=missing,
        )
    return entries


def _parse_summary(text: str, final: bool) -> Summary:
    data = _extract_json_object(text)
    unknown = [key for key in data if key != "adl" and key not in SUMMARY_ASPECT_KEYS]
    if unknown:
        raise _RepairNeeded(
            "unknown summary keys: "
            + ", ".join(repr(k) for k in unknown)
            + '; allowed keys are "adl" and '
            + ", ".join(repr(k) for k in SUMMARY_ASPECT_KEYS)
        )
    diagram = _as_text(data.get("adl"), '"adl" diagram')
    if "```" in diagram:
        if not final:
            raise _RepairNeeded(
                "the diagram must be raw Mermaid source without code fences",
                category="fenced",
            )
        diagram = strip_fences(diagram)
    stripped = diagram.strip()
    if not stripped:
        raise _RepairNeeded('"adl" diagram must be non-empty')
    first = stripped.split(None, 1)[0]
    if first not in DIAGRAM_FIRST_TOKENS:
        raise _RepairNeeded(
            f'the diagram must start with one of {DIAGRAM_FIRST_TOKENS}, '
            f"got {first!r}"
        )
    aspects = {
        key: _as_text(value, f"summary aspect {key!r}")
        for key, value in data.items()
        if key in SUMMARY_ASPECT_KEYS
    }
    return Summary(diagram=diagram, aspects=aspects)


def _parse_issues(text: str, final: bool) -> list[Issue]:
    data = _extract_json_object(text)
    raw = data.get("issues")
    if not isinstance(raw, list):
        raise _RepairNeeded('output must contain an "issues" list')
    issues: list[Issue] = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise _RepairNeeded(f"issues[{i}] must be an object")
        raw_alternatives = item.get("alternatives", [])
        if not isinstance(raw_alternatives, list):
            raise _RepairNeeded(f"issues[{i}].alternatives must be a list")
        issues.append(
            Issue(
                service=_as_text(item.get("service"), f"issues[{i}].service"),
                issue=_as_text(item.get("issue"), f"issues[{i}].issue"),
                reason=_as_text(item.get("reason"), f"issues[{i}].reason"),
                alternatives=[
                    _as_text(alt, f"issues[{i}].alternatives[{j}]")
                    for j, alt in enumerate(raw_alternatives)
                ],
            )
        )
    return issues


def _parse_questions(text: str, final: bool) -> list[str]:
    data = _extract_json_object(text)
    raw = data.get("questions")
    if not isinstance(raw, list):
        raise _RepairNeeded('output must contain a "questions" list')
    return [_as_text(item, f"questions[{i}]") for i, item in enumerate(raw)]


# ---------------------------------------------------------------------------
# Repair loop
# ---------------------------------------------------------------------------

def _with_repair_note(
    original_user_text: str, error: str, raw_output: str, attempt_index: int
) -> str:
    return (
        f"{original_user_text}\n\n"
        f"[Repair attempt {attempt_index}]\n"
        f"Your previous reply could not be used: {error}\n\n"
        "Previous reply:\n"
        f"{raw_output}\n\n"
        "Reply again, following the [Output Format] exactly."
    )


def _run_with_repair(gateway: Gateway, bundle: PromptBundle, parse):
    attempts: list[RepairAttempt] = []
    user_text = bundle.user_text
    last: _RepairNeeded | None = None
    for index in range(1, MAX_ATTEMPTS + 1):
        result = gateway.complete(
            gateway.request(bundle.system_text, user_text)
        )
        try:
            return parse(result.text, index == MAX_ATTEMPTS)
        except _RepairNeeded as exc:
            attempts.append(RepairAttempt(index, str(exc), result.text))
            last = exc
            user_text = _with_repair_note(
                bundle.user_text, str(exc), result.text, index + 1
            )
    assert last is not None
    if last.category == "pinned":
        raise PinnedViolation(last.missing, attempts)
    raise ParseFailure(
        f"{bundle.kind.value} output unusable after {MAX_ATTEMPTS} attempts: "
        f"{last}",
        attempts,
    )


# ---------------------------------------------------------------------------
# The four actions
# ---------------------------------------------------------------------------

def run_proposal(
    gateway: Gateway,
    user: UserState,
    prev: ArchitectureState | None = None,
) -> list[ServiceEntry]:
    """Generate the service list from the requirement state.

    The first iteration sees the subject only; later iterations also see
    the preferences and the full previous architecture state. Pinned
    services are verified after parsing, not just requested in the prompt.
    """
    bundle = build_prompt(ActionKind.PROPOSAL, user, prev=prev)
    pinned = pinned_services(user)
    return _run_with_repair(
        gateway, bundle, lambda text, final: _parse_services(text, pinned, final)
    )


def run_summarization(
    gateway: Gateway, user: UserState, services: list[ServiceEntry]
) -> Summary:
    """Generate the diagram and aspect write-ups for the proposed services.

    The template's "adl" output key carries the diagram. A fenced diagram
    triggers a repair round; on the final attempt the fences are stripped
    and the diagram accepted if otherwise valid.
    """
    if not services:
        raise MissingContext("summarization requires a non-empty service list")
    bundle = build_prompt(
        ActionKind.SUMMARIZATION, user, partial=PartialArchitecture(services=services)
    )
    return _run_with_repair(gateway, bundle, _parse_summary)


def run_inspection(
    gateway: Gateway, user: UserState, services: list[ServiceEntry]
) -> list[Issue]:
    """Generate prioritized concerns with reasons and alternatives."""
    if not services:
        raise MissingContext("inspection requires a non-empty service list")
    bundle = build_prompt(
        ActionKind.INSPECTION, user, partial=PartialArchitecture(services=services)
    )
    return _run_with_repair(gateway, bundle, _parse_issues)


def run_inquiry(
    gateway: Gateway,
    user: UserState,
    services: list[ServiceEntry],
    summary: Summary,
    inspection: list[Issue],
) -> list[str]:
    """Generate the prioritized Yes/No questions.

    Questions whose exact text already exists as a preference key are
    filtered out after parsing, so the no-duplicates rule holds even when
    the model ignores it.
    """
    bundle = build_prompt(
        ActionKind.INQUIRY_GENERATION,
        user,
        partial=PartialArchitecture(
            services=services, summary=summary, inspection=inspection
        ),
    )
    questions = _run_with_repair(gateway, bundle, _parse_questions)
    return [q for q in questions if q not in user.preferences]
