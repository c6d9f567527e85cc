"""Session lifecycle and the system-driven iteration loop.

A session starts from a subject, then alternates between system-generated
iterations (proposal, summarization, inspection, inquiry — in that order)
and user responses (answers, ratings, pins) that refine the preference
map feeding the next iteration. Iteration history is append-only: a
stored architecture state is never mutated, and the requirement state is
only changed by user actions, never by the loop itself.

Every mutation is journaled as one JSON object per line in
``<data-dir>/sessions/<id>.journal.jsonl`` (fsync on append), and
:func:`replay_journal` folds a journal back into an equal session.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any

from . import actions
from .gateway import Gateway
from .state import (
    ArchitectureState,
    KeyConflict,
    PreferenceValue,
    SchemaError,
    UserState,
    apply_preference,
    architecture_to_dict,
    decode,
    dumps_canonical,
    toggle_pin,
    validate_architecture,
)

__all__ = [
    "SessionStatus",
    "Session",
    "JournalEventKind",
    "JournalEvent",
    "EngineError",
    "EmptySubject",
    "UnknownSession",
    "UnknownIteration",
    "IterationInFlight",
    "NoIterationYet",
    "UnknownQuestion",
    "UnknownAlternative",
    "UnknownService",
    "InvalidAnswer",
    "InvalidRating",
    "ArchitectureInvalid",
    "CorruptJournal",
    "ExportRow",
    "DesignExport",
    "Engine",
    "replay_journal",
    "load_journal",
    "example_seeds",
]


class EngineError(Exception):
    """Base class for engine errors; ``code`` is the machine token."""

    code = "EngineError"


class EmptySubject(EngineError):
    code = "EmptySubject"


class UnknownSession(EngineError):
    code = "UnknownSession"


class UnknownIteration(EngineError):
    code = "UnknownIteration"


class IterationInFlight(EngineError):
    code = "IterationInFlight"


class NoIterationYet(EngineError):
    code = "NoIterationYet"


class UnknownQuestion(EngineError):
    code = "UnknownQuestion"


class UnknownAlternative(EngineError):
    code = "UnknownAlternative"


class UnknownService(EngineError):
    code = "UnknownService"


class InvalidAnswer(EngineError):
    code = "InvalidAnswer"


class InvalidRating(EngineError):
    code = "InvalidRating"


class ArchitectureInvalid(EngineError):
    code = "ArchitectureInvalid"


class CorruptJournal(EngineError):
    code = "CorruptJournal"

    def __init__(self, message: str, seq: int | None = None):
        super().__init__(message)
        self.seq = seq


class SessionStatus(str, Enum):
    IDLE = "Idle"
    ITERATING = "Iterating"
    FAILED = "Failed"


@dataclass
class Session:
    """One design session: immutable subject, evolving preferences, and
    the append-only iteration history."""

    id: str
    created_at: str
    user_state: UserState
    iterations: list[ArchitectureState] = field(default_factory=list)
    status: SessionStatus = SessionStatus.IDLE


class JournalEventKind(str, Enum):
    SESSION_CREATED = "SessionCreated"
    PREFERENCE_APPLIED = "PreferenceApplied"
    PIN_TOGGLED = "PinToggled"
    ITERATION_STARTED = "IterationStarted"
    ITERATION_COMPLETED = "IterationCompleted"
    ITERATION_FAILED = "IterationFailed"


@dataclass(frozen=True)
class JournalEvent:
    seq: int
    kind: JournalEventKind
    payload: dict[str, Any]
    at: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "kind": self.kind.value,
            "at": self.at,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "JournalEvent":
        try:
            return cls(
                seq=int(obj["seq"]),
                kind=JournalEventKind(obj["kind"]),
                payload=dict(obj["payload"]),
                at=str(obj["at"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptJournal(f"undecodable journal event: {exc}") from exc


@dataclass(frozen=True)
class ExportRow:
    service: str
    purpose: str
    configuration: str


@dataclass(frozen=True)
class DesignExport:
    """The latest iteration's services as (service, purpose, configuration)
    rows, one per service, order preserved."""

    rows: list[ExportRow]

    def to_dict(self) -> dict[str, Any]:
        return {
            "rows": [
                {
                    "service": row.service,
                    "purpose": row.purpose,
                    "configuration": row.configuration,
                }
                for row in self.rows
            ]
        }

    def to_markdown(self) -> str:
        def cell(text: str) -> str:
            return text.replace("|", "\\|")

        lines = [
            "| Service | Purpose | Configuration |",
            "| --- | --- | --- |",
        ]
        lines.extend(
            f"| {cell(row.service)} | {cell(row.purpose)} | "
            f"{cell(row.configuration)} |"
            for row in self.rows
        )
        return "\n".join(lines) + "\n"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def example_seeds() -> list[dict[str, str]]:
    """Bundled example subjects for seeding demo sessions."""
    raw = (
        resources.files("archloop")
        .joinpath("assets/session_seeds.json")
        .read_text(encoding="utf-8")
    )
    return json.loads(raw)


class Engine:
    """Orchestrates sessions over one gateway and one data directory.

    Mutations are serialized per session; reads return the live session
    object whose state values are themselves immutable. Iterations run
    synchronously here — callers needing a background job wrap
    :meth:`begin_iteration` plus :meth:`run_reserved_iteration`, which is
    exactly what :meth:`run_iteration` composes.
    """

    def __init__(self, gateway: Gateway, data_dir: str | Path):
        self._gateway = gateway
        self._data_dir = Path(data_dir)
        self._sessions_dir = self._data_dir / "sessions"
        self._sessions_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._seq: dict[str, int] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    # -- plumbing ----------------------------------------------------------

    def _journal_path(self, session_id: str) -> Path:
        return self._sessions_dir / f"{session_id}.journal.jsonl"

    def _lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def _append_event(
        self, session_id: str, kind: JournalEventKind, payload: dict[str, Any]
    ) -> JournalEvent:
        # Caller holds the session lock.
        seq = self._seq[session_id] + 1
        event = JournalEvent(seq=seq, kind=kind, payload=payload, at=_now())
        path = self._journal_path(session_id)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event.to_dict(), ensure_ascii=False) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._seq[session_id] = seq
        return event

    def get_session(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        return session

    def get_iteration(self, session_id: str, index: int) -> ArchitectureState:
        """1-based access into the iteration history."""
        session = self.get_session(session_id)
        if not 1 <= index <= len(session.iterations):
            raise UnknownIteration(
                f"session {session_id!r} has no iteration {index}"
            )
        return session.iterations[index - 1]

    def session_ids(self) -> list[str]:
        return list(self._sessions)

    def journal_events(self, session_id: str) -> list[JournalEvent]:
        self.get_session(session_id)
        return load_journal(self._journal_path(session_id))

    # -- session lifecycle --------------------------------------------------

    def create_session(self, subject: str) -> Session:
        if not subject or not subject.strip():
            raise EmptySubject("subject must be non-empty")
        session = Session(
            id=uuid.uuid4().hex,
            created_at=_now(),
            user_state=UserState(subject=subject),
        )
        with self._registry_lock:
            self._sessions[session.id] = session
            self._seq[session.id] = 0
            self._locks[session.id] = threading.Lock()
        with self._lock(session.id):
            self._append_event(
                session.id,
                JournalEventKind.SESSION_CREATED,
                {
                    "session_id": session.id,
                    "subject": subject,
                    "created_at": session.created_at,
                },
            )
        return session

    def load_existing(self) -> list[str]:
        """Replay every journal in the data directory into memory."""
        loaded: list[str] = []
        for path in sorted(self._sessions_dir.glob("*.journal.jsonl")):
            events = load_journal(path)
            session = replay_journal(events)
            with self._registry_lock:
                self._sessions[session.id] = session
                self._seq[session.id] = events[-1].seq if events else 0
                self._locks.setdefault(session.id, threading.Lock())
            loaded.append(session.id)
        return loaded

    # -- the iteration loop --------------------------------------------------

    def begin_iteration(self, session_id: str) -> int:
        """Reserve the session for one iteration; returns its 1-based index."""
        session = self.get_session(session_id)
        with self._lock(session_id):
            if session.status is SessionStatus.ITERATING:
                raise IterationInFlight(
                    f"session {session_id!r} already has an iteration in flight"
                )
            index = len(session.iterations) + 1
            session.status = SessionStatus.ITERATING
            self._append_event(
                session_id, JournalEventKind.ITERATION_STARTED, {"index": index}
            )
            return index

    def run_reserved_iteration(self, session_id: str) -> ArchitectureState:
        """Execute the four actions for a session reserved via
        :meth:`begin_iteration` and append the resulting state."""
        session = self.get_session(session_id)
        if session.status is not SessionStatus.ITERATING:
            raise EngineError("run_reserved_iteration without a reservation")
        index = len(session.iterations) + 1
        user = session.user_state  # snapshot; immutable value
        prev = session.iterations[-1] if session.iterations else None
        try:
            services = actions.run_proposal(self._gateway, user, prev)
            summary = actions.run_summarization(self._gateway, user, services)
            inspection = actions.run_inspection(self._gateway, user, services)
            inquiry = actions.run_inquiry(
                self._gateway, user, services, summary, inspection
            )
            arch = ArchitectureState(
                services=services,
                summary=summary,
                inspection=inspection,
                inquiry=inquiry,
            )
            report = validate_architecture(arch, user)
            if not report.ok:
                raise ArchitectureInvalid(
                    "generated state failed validation: "
                    + "; ".join(str(v) for v in report.violations)
                )
        except Exception as exc:
            with self._lock(session_id):
                self._append_event(
                    session_id,
                    JournalEventKind.ITERATION_FAILED,
                    {
                        "index": index,
                        "error_code": getattr(exc, "code", "Error"),
                        "message": str(exc),
                    },
                )
                session.status = SessionStatus.IDLE
            raise
        with self._lock(session_id):
            session.iterations.append(arch)
            self._append_event(
                session_id,
                JournalEventKind.ITERATION_COMPLETED,
                {"index": index, "architecture": architecture_to_dict(arch)},
            )
            session.status = SessionStatus.IDLE
        return arch

    def run_iteration(self, session_id: str) -> ArchitectureState:
        """One full pass: proposal, summarization, inspection, inquiry.

        On action failure the session keeps its prior iterations and
        preferences, journals the failure, and returns to idle.
        """
        self.begin_iteration(session_id)
        return self.run_reserved_iteration(session_id)

    # -- user responses ------------------------------------------------------

    def _latest(self, session: Session) -> ArchitectureState:
        if not session.iterations:
            raise NoIterationYet(
                f"session {session.id!r} has no iterations yet"
            )
        return session.iterations[-1]

    def answer_inquiry(
        self, session_id: str, question: str, answer: PreferenceValue | str
    ) -> Session:
        """Record a Yes/No answer to a question from the latest inquiry."""
        try:
            value = PreferenceValue(answer)
        except ValueError:
            raise InvalidAnswer(f"invalid answer {answer!r}") from None
        if value not in (PreferenceValue.YES, PreferenceValue.NO):
            raise InvalidAnswer("answers must be Yes or No")
        session = self.get_session(session_id)
        with self._lock(session_id):
            latest = self._latest(session)
            if question not in latest.inquiry:
                raise UnknownQuestion(
                    f"{question!r} is not in the latest inquiry"
                )
            session.user_state = apply_preference(
                session.user_state, question, value
            )
            self._append_event(
                session_id,
                JournalEventKind.PREFERENCE_APPLIED,
                {"key": question, "value": value.value},
            )
        return session

    def rate_alternative(
        self, session_id: str, alternative: str, rating: PreferenceValue | str
    ) -> Session:
        """Record a Good/Bad rating of an inspection alternative."""
        try:
            value = PreferenceValue(rating)
        except ValueError:
            raise InvalidRating(f"invalid rating {rating!r}") from None
        if value not in (PreferenceValue.GOOD, PreferenceValue.BAD):
            raise InvalidRating("ratings must be Good or Bad")
        session = self.get_session(session_id)
        with self._lock(session_id):
            latest = self._latest(session)
            known = {
                alt for issue in latest.inspection for alt in issue.alternatives
            }
            if alternative not in known:
                raise UnknownAlternative(
                    f"{alternative!r} is not among the latest alternatives"
                )
            session.user_state = apply_preference(
                session.user_state, alternative, value
            )
            self._append_event(
                session_id,
                JournalEventKind.PREFERENCE_APPLIED,
                {"key": alternative, "value": value.value},
            )
        return session

    def pin_service(self, session_id: str, name: str) -> Session:
        """Toggle the pin on a service proposed in the latest iteration."""
        session = self.get_session(session_id)
        with self._lock(session_id):
            latest = self._latest(session)
            if name not in {entry.name for entry in latest.services}:
                raise UnknownService(
                    f"{name!r} is not a service in the latest iteration"
                )
            session.user_state = toggle_pin(session.user_state, name)
            self._append_event(
                session_id, JournalEventKind.PIN_TOGGLED, {"service": name}
            )
        return session

    # -- export ---------------------------------------------------------------

    def export_design(self, session_id: str) -> DesignExport:
        """Tabular export of the latest iteration's services."""
        session = self.get_session(session_id)
        latest = self._latest(session)
        rows = [
            ExportRow(
                service=entry.name,
                purpose=entry.usage,
                configuration=", ".join(
                    f"{key}: {value}" for key, value in entry.settings.items()
                ),
            )
            for entry in latest.services
        ]
        return DesignExport(rows=rows)


# ---------------------------------------------------------------------------
# Journal replay
# ---------------------------------------------------------------------------

def load_journal(path: str | Path) -> list[JournalEvent]:
    """Parse a journal file into events (no replay, no validation)."""
    events: list[JournalEvent] = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorruptJournal(f"cannot read journal {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorruptJournal(
                f"journal {path} line {lineno}: invalid JSON: {exc}"
            ) from exc
        events.append(JournalEvent.from_dict(obj))
    return events


def replay_journal(events: list[JournalEvent]) -> Session:
    """Fold a journal back into the session that produced it.

    The result is field-for-field equal to the live session for any
    complete journal. A journal that ends mid-iteration (a crash between
    start and completion) replays with status ``Failed``.
    """
    if not events:
        raise CorruptJournal("empty journal (missing SessionCreated)", seq=1)
    for position, event in enumerate(events, start=1):
        if event.seq != position:
            raise CorruptJournal(
                f"sequence gap: expected {position}, found {event.seq}",
                seq=position,
            )
    first = events[0]
    if first.kind is not JournalEventKind.SESSION_CREATED:
        raise CorruptJournal(
            f"journal must start with SessionCreated, found {first.kind.value}",
            seq=1,
        )
    try:
        session = Session(
            id=str(first.payload["session_id"]),
            created_at=str(first.payload["created_at"]),
            user_state=UserState(subject=str(first.payload["subject"])),
        )
    except KeyError as exc:
        raise CorruptJournal(f"SessionCreated payload missing {exc}", seq=1) from exc

    in_flight = False
    for event in events[1:]:
        payload = event.payload
        try:
            if event.kind is JournalEventKind.SESSION_CREATED:
                raise CorruptJournal(
                    "duplicate SessionCreated", seq=event.seq
                )
            elif event.kind is JournalEventKind.PREFERENCE_APPLIED:
                session.user_state = apply_preference(
                    session.user_state,
                    str(payload["key"]),
                    PreferenceValue(payload["value"]),
                )
            elif event.kind is JournalEventKind.PIN_TOGGLED:
                session.user_state = toggle_pin(
                    session.user_state, str(payload["service"])
                )
            elif event.kind is JournalEventKind.ITERATION_STARTED:
                in_flight = True
            elif event.kind is JournalEventKind.ITERATION_COMPLETED:
                arch = decode(dumps_canonical(payload["architecture"]))
                assert isinstance(arch, ArchitectureState)
                session.iterations.append(arch)
                in_flight = False
            elif event.kind is JournalEventKind.ITERATION_FAILED:
                in_flight = False
        except (KeyError, ValueError, SchemaError, KeyConflict) as exc:
            raise CorruptJournal(
                f"cannot apply event {event.seq}: {exc}", seq=event.seq
            ) from exc
    session.status = SessionStatus.FAILED if in_flight else SessionStatus.IDLE
    return session
