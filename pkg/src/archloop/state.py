"""Design-state types, their merge algebra, validation, diffing, and
canonical serialization.

Two state shapes flow through the system: the designer's requirement state
(an immutable subject plus an ordered ``key -> value`` preference map) and
a generated architecture state (proposed services, a summary holding a
diagram and aspect evaluations, inspection issues, and follow-up
questions).

All types are plain frozen dataclasses treated as immutable values; the
operations below are pure functions returning new states. The canonical
machine format is JSON using exactly these field names: ``subject``,
``preferences``, ``services``, ``name``, ``usage``, ``settings``,
``summary``, ``diagram``, ``aspects``, ``inspection``, ``service``,
``issue``, ``reason``, ``alternatives``, ``inquiry``. Map key order is
meaningful everywhere (insertion order), and :func:`encode` is
deterministic over it. A YAML rendering is provided for human exports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import yaml

__all__ = [
    "SUMMARY_ASPECT_KEYS",
    "DIAGRAM_FIRST_TOKENS",
    "PreferenceValue",
    "UserState",
    "ServiceEntry",
    "Summary",
    "Issue",
    "ArchitectureState",
    "ServiceChange",
    "StateDiff",
    "ViolationKind",
    "Violation",
    "ValidationReport",
    "StateError",
    "EmptyKey",
    "KeyConflict",
    "SchemaError",
    "apply_preference",
    "toggle_pin",
    "pinned_services",
    "validate_architecture",
    "diff_services",
    "encode",
    "decode",
    "render_yaml",
    "dumps_canonical",
    "user_to_dict",
    "architecture_to_dict",
    "services_to_dict",
    "summary_to_dict",
    "issues_to_dict",
    "preferences_to_dict",
]

# The closed set of summary aspect keys, in their conventional order.
SUMMARY_ASPECT_KEYS = (
    "security",
    "reliability",
    "scalability",
    "cost",
    "performance",
    "storage",
    "analytics",
    "operation",
)

# Accepted leading keywords for the summary diagram source.
DIAGRAM_FIRST_TOKENS = ("graph", "flowchart")

_FENCE_MARKER = "```"


class StateError(Exception):
    """Base class for state-layer errors."""

    code = "StateError"


class EmptyKey(StateError):
    """A preference key or service name was empty."""

    code = "EmptyKey"


class KeyConflict(StateError):
    """A pin toggle hit a key already holding a non-pin value."""

    code = "KeyConflict"


class SchemaError(StateError):
    """Canonical-format decode failure, pointing at the first violation."""

    code = "SchemaError"

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class PreferenceValue(str, Enum):
    """The five values a preference entry may carry.

    ``Yes``/``No`` record inquiry answers, ``Good``/``Bad`` record
    alternative ratings, and ``Pinned`` marks a mandatory service.
    """

    YES = "Yes"
    NO = "No"
    GOOD = "Good"
    BAD = "Bad"
    PINNED = "Pinned"


@dataclass(frozen=True)
class UserState:
    """The designer's requirement state.

    ``subject`` is the initial free-text requirement, fixed for the life
    of a session. ``preferences`` is an insertion-ordered map; re-applying
    an existing key overwrites its value in place.
    """

    subject: str
    preferences: dict[str, PreferenceValue] = field(default_factory=dict)


@dataclass(frozen=True)
class ServiceEntry:
    """One cloud resource with its purpose and configuration settings."""

    name: str
    usage: str
    settings: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Summary:
    """A diagram (Mermaid source, no code fences) plus aspect write-ups.

    Aspect keys are expected to stay within :data:`SUMMARY_ASPECT_KEYS`;
    strays are reported by :func:`validate_architecture`, not rejected
    here.
    """

    diagram: str
    aspects: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Issue:
    """One architectural concern tied to a service or cross-cutting label."""

    service: str
    issue: str
    reason: str
    alternatives: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class ArchitectureState:
    """One iteration's generated design: services, summary, inspection,
    and the prioritized inquiry questions."""

    services: list[ServiceEntry]
    summary: Summary
    inspection: list[Issue]
    inquiry: list[str]


@dataclass(frozen=True)
class ServiceChange:
    """A shared service whose usage or settings changed between states."""

    name: str
    setting_keys: tuple[str, ...]


@dataclass(frozen=True)
class StateDiff:
    """Service-level difference between two architecture states."""

    added: list[str]
    removed: list[str]
    changed: list[ServiceChange]

    @property
    def empty(self) -> bool:
        return not (self.added or self.removed or self.changed)

    def to_dict(self) -> dict[str, Any]:
        return {
            "added": list(self.added),
            "removed": list(self.removed),
            "changed": [
                {"name": c.name, "setting_keys": list(c.setting_keys)}
                for c in self.changed
            ],
        }


class ViolationKind(str, Enum):
    MISSING_PINNED_SERVICE = "MissingPinnedService"
    DUPLICATE_SERVICE_NAME = "DuplicateServiceName"
    EMPTY_SERVICES = "EmptyServices"
    FENCED_DIAGRAM = "FencedDiagram"
    MALFORMED_DIAGRAM = "MalformedDiagram"
    UNKNOWN_SUMMARY_ASPECT = "UnknownSummaryAspect"
    DUPLICATE_INQUIRY_KEY = "DuplicateInquiryKey"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    detail: str

    def __str__(self) -> str:
        return f"{self.kind.value}({self.detail})"


@dataclass(frozen=True)
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[ViolationKind]:
        return {v.kind for v in self.violations}


# ---------------------------------------------------------------------------
# Merge algebra
# ---------------------------------------------------------------------------

def apply_preference(
    state: UserState, key: str, value: PreferenceValue
) -> UserState:
    """Return a state with ``key -> value`` set, all else untouched.

    Existing keys are overwritten in place (position preserved); new keys
    are appended. Idempotent for a fixed (key, value).
    """
    if not key:
        raise EmptyKey("preference key must be non-empty")
    prefs = dict(state.preferences)
    prefs[key] = value
    return UserState(subject=state.subject, preferences=prefs)


def toggle_pin(state: UserState, service_name: str) -> UserState:
    """Pin a service, or unpin it if already pinned.

    Raises :class:`KeyConflict` when the key already holds a non-pin value
    (an inquiry answer or a rating must not be silently clobbered).
    """
    if not service_name:
        raise EmptyKey("service name must be non-empty")
    current = state.preferences.get(service_name)
    prefs = dict(state.preferences)
    if current is None:
        prefs[service_name] = PreferenceValue.PINNED
    elif current is PreferenceValue.PINNED:
        del prefs[service_name]
    else:
        raise KeyConflict(
            f"preference {service_name!r} holds {current.value!r}, not Pinned"
        )
    return UserState(subject=state.subject, preferences=prefs)


def pinned_services(state: UserState) -> list[str]:
    """Keys currently pinned, in insertion order."""
    return [
        key
        for key, value in state.preferences.items()
        if value is PreferenceValue.PINNED
    ]


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_architecture(
    arch: ArchitectureState, user: UserState
) -> ValidationReport:
    """Check an architecture state against its invariants and the user's
    pinned services. Pure; never raises — an empty report means valid.

    Pinned-service matching is case-insensitive and exact (no fuzzy
    matching). Diagram checks are syntactic only: non-empty, no code-fence
    markers, and a leading ``graph``/``flowchart`` token.
    """
    violations: list[Violation] = []

    if not arch.services:
        violations.append(Violation(ViolationKind.EMPTY_SERVICES, ""))
    seen: set[str] = set()
    for entry in arch.services:
        if entry.name in seen:
            violations.append(
                Violation(ViolationKind.DUPLICATE_SERVICE_NAME, entry.name)
            )
        seen.add(entry.name)

    names_folded = {entry.name.lower() for entry in arch.services}
    for pinned in pinned_services(user):
        if pinned.lower() not in names_folded:
            violations.append(
                Violation(ViolationKind.MISSING_PINNED_SERVICE, pinned)
            )

    diagram = arch.summary.diagram
    if _FENCE_MARKER in diagram:
        violations.append(Violation(ViolationKind.FENCED_DIAGRAM, ""))
    stripped = diagram.strip()
    if not stripped:
        violations.append(
            Violation(ViolationKind.MALFORMED_DIAGRAM, "empty diagram")
        )
    else:
        first = stripped.split(None, 1)[0].lstrip(_FENCE_MARKER)
        if first not in DIAGRAM_FIRST_TOKENS:
            violations.append(
                Violation(
                    ViolationKind.MALFORMED_DIAGRAM,
                    f"leading token {first!r}",
                )
            )

    for key in arch.summary.aspects:
        if key not in SUMMARY_ASPECT_KEYS:
            violations.append(
                Violation(ViolationKind.UNKNOWN_SUMMARY_ASPECT, key)
            )

    for question in arch.inquiry:
        if question in user.preferences:
            violations.append(
                Violation(ViolationKind.DUPLICATE_INQUIRY_KEY, question)
            )

    return ValidationReport(violations)


# ---------------------------------------------------------------------------
# Diffing
# ---------------------------------------------------------------------------

def diff_services(
    prev: ArchitectureState, next: ArchitectureState
) -> StateDiff:
    """Service-name diff between two states.

    ``added``/``removed`` keep the order of the state they come from;
    ``changed`` lists shared names (in ``next`` order) whose usage or
    settings differ, with the differing setting keys sorted.
    """
    prev_by_name = {entry.name: entry for entry in prev.services}
    next_by_name = {entry.name: entry for entry in next.services}

    added = [name for name in next_by_name if name not in prev_by_name]
    removed = [name for name in prev_by_name if name not in next_by_name]

    changed: list[ServiceChange] = []
    for name, after in next_by_name.items():
        before = prev_by_name.get(name)
        if before is None:
            continue
        keys = set(before.settings) | set(after.settings)
        differing = sorted(
            key
            for key in keys
            if before.settings.get(key) != after.settings.get(key)
        )
        if differing or before.usage != after.usage:
            changed.append(ServiceChange(name, tuple(differing)))

    return StateDiff(added=added, removed=removed, changed=changed)


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------

def dumps_canonical(obj: Any) -> str:
    """Canonical JSON text: insertion-ordered keys, 2-space indent."""
    return json.dumps(obj, indent=2, ensure_ascii=False)


def preferences_to_dict(state: UserState) -> dict[str, str]:
    return {key: value.value for key, value in state.preferences.items()}


def user_to_dict(state: UserState) -> dict[str, Any]:
    return {
        "subject": state.subject,
        "preferences": preferences_to_dict(state),
    }


def service_to_dict(entry: ServiceEntry) -> dict[str, Any]:
    return {
        "name": entry.name,
        "usage": entry.usage,
        "settings": dict(entry.settings),
    }


def services_to_dict(services: list[ServiceEntry]) -> list[dict[str, Any]]:
    return [service_to_dict(entry) for entry in services]


def summary_to_dict(summary: Summary) -> dict[str, Any]:
    return {"diagram": summary.diagram, "aspects": dict(summary.aspects)}


def issue_to_dict(issue: Issue) -> dict[str, Any]:
    return {
        "service": issue.service,
        "issue": issue.issue,
        "reason": issue.reason,
        "alternatives": list(issue.alternatives),
    }


def issues_to_dict(issues: list[Issue]) -> list[dict[str, Any]]:
    return [issue_to_dict(issue) for issue in issues]


def architecture_to_dict(arch: ArchitectureState) -> dict[str, Any]:
    return {
        "services": services_to_dict(arch.services),
        "summary": summary_to_dict(arch.summary),
        "inspection": issues_to_dict(arch.inspection),
        "inquiry": list(arch.inquiry),
    }


def encode(state: UserState | ArchitectureState) -> str:
    """Encode a state as canonical JSON text.

    Deterministic: key order is insertion order, so ``encode`` of equal
    construction histories is byte-identical.
    """
    if isinstance(state, UserState):
        return dumps_canonical(user_to_dict(state))
    if isinstance(state, ArchitectureState):
        return dumps_canonical(architecture_to_dict(state))
    raise TypeError(f"cannot encode {type(state).__name__}")


def _expect_obj(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(path, f"expected an object, got {type(value).__name__}")
    return value


def _expect_list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise SchemaError(path, f"expected a list, got {type(value).__name__}")
    return value


def _expect_str(value: Any, path: str, *, nonempty: bool = False) -> str:
    if not isinstance(value, str):
        raise SchemaError(path, f"expected a string, got {type(value).__name__}")
    if nonempty and not value:
        raise SchemaError(path, "must be non-empty")
    return value


def _require(obj: dict, key: str, path: str) -> Any:
    if key not in obj:
        raise SchemaError(path, f"missing required field {key!r}")
    return obj[key]


def _reject_unknown(obj: dict, allowed: set[str], path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}", "unknown field")


def _decode_str_map(value: Any, path: str) -> dict[str, str]:
    obj = _expect_obj(value, path)
    out: dict[str, str] = {}
    for key, val in obj.items():
        _expect_str(key, f"{path}[{key!r}]")
        out[key] = _expect_str(val, f"{path}[{key!r}]")
    return out


def _decode_user(obj: dict) -> UserState:
    _reject_unknown(obj, {"subject", "preferences"}, "$")
    subject = _expect_str(_require(obj, "subject", "$"), "$.subject", nonempty=True)
    raw_prefs = _expect_obj(_require(obj, "preferences", "$"), "$.preferences")
    prefs: dict[str, PreferenceValue] = {}
    for key, val in raw_prefs.items():
        path = f"$.preferences[{key!r}]"
        if not key:
            raise SchemaError(path, "preference key must be non-empty")
        text = _expect_str(val, path)
        try:
            prefs[key] = PreferenceValue(text)
        except ValueError:
            raise SchemaError(
                path,
                f"invalid preference value {text!r}; expected one of "
                + ", ".join(v.value for v in PreferenceValue),
            ) from None
    return UserState(subject=subject, preferences=prefs)


def _decode_service(obj: Any, path: str) -> ServiceEntry:
    entry = _expect_obj(obj, path)
    _reject_unknown(entry, {"name", "usage", "settings"}, path)
    name = _expect_str(_require(entry, "name", path), f"{path}.name", nonempty=True)
    usage = _expect_str(_require(entry, "usage", path), f"{path}.usage")
    settings = _decode_str_map(entry.get("settings", {}), f"{path}.settings")
    return ServiceEntry(name=name, usage=usage, settings=settings)


def _decode_issue(obj: Any, path: str) -> Issue:
    entry = _expect_obj(obj, path)
    _reject_unknown(entry, {"service", "issue", "reason", "alternatives"}, path)
    alternatives = [
        _expect_str(item, f"{path}.alternatives[{i}]")
        for i, item in enumerate(
            _expect_list(entry.get("alternatives", []), f"{path}.alternatives")
        )
    ]
    return Issue(
        service=_expect_str(_require(entry, "service", path), f"{path}.service"),
        issue=_expect_str(_require(entry, "issue", path), f"{path}.issue"),
        reason=_expect_str(_require(entry, "reason", path), f"{path}.reason"),
        alternatives=alternatives,
    )


def _decode_architecture(obj: dict) -> ArchitectureState:
    _reject_unknown(obj, {"services", "summary", "inspection", "inquiry"}, "$")
    services = [
        _decode_service(item, f"$.services[{i}]")
        for i, item in enumerate(
            _expect_list(_require(obj, "services", "$"), "$.services")
        )
    ]
    raw_summary = _expect_obj(_require(obj, "summary", "$"), "$.summary")
    _reject_unknown(raw_summary, {"diagram", "aspects"}, "$.summary")
    summary = Summary(
        diagram=_expect_str(
            _require(raw_summary, "diagram", "$.summary"), "$.summary.diagram"
        ),
        aspects=_decode_str_map(
            raw_summary.get("aspects", {}), "$.summary.aspects"
        ),
    )
    inspection = [
        _decode_issue(item, f"$.inspection[{i}]")
        for i, item in enumerate(
            _expect_list(_require(obj, "inspection", "$"), "$.inspection")
        )
    ]
    inquiry = [
        _expect_str(item, f"$.inquiry[{i}]")
        for i, item in enumerate(
            _expect_list(_require(obj, "inquiry", "$"), "$.inquiry")
        )
    ]
    return ArchitectureState(
        services=services, summary=summary, inspection=inspection, inquiry=inquiry
    )


def decode(text: str) -> UserState | ArchitectureState:
    """Decode canonical JSON text into a state value.

    Distinguishes the two shapes by their top-level fields. Raises
    :class:`SchemaError` naming the path of the first violation;
    ``decode(encode(x)) == x`` for every state ``x``.
    """
    if not text.strip():
        raise SchemaError("$", "empty input")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    obj = _expect_obj(obj, "$")
    if "subject" in obj:
        return _decode_user(obj)
    if "services" in obj:
        return _decode_architecture(obj)
    raise SchemaError("$", "expected a user state or an architecture state")


def render_yaml(state: UserState | ArchitectureState) -> str:
    """Human-oriented YAML rendering of a state (export format)."""
    if isinstance(state, UserState):
        payload: Any = user_to_dict(state)
    elif isinstance(state, ArchitectureState):
        payload = architecture_to_dict(state)
    else:
        raise TypeError(f"cannot render {type(state).__name__}")
    return yaml.safe_dump(
        payload, sort_keys=False, allow_unicode=True, default_flow_style=False
    )
