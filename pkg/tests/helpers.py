"""Shared fixture states, canned responses, and walkthrough drivers.

The golden fixtures model the two-iteration reference session: a Jupyter
host on AWS, refined after the user answers two questions, rates an
alternative, and pins EC2.
"""

from __future__ import annotations

import json

from archloop.engine import Engine, Session
from archloop.state import (
    ArchitectureState,
    Issue,
    PreferenceValue,
    ServiceEntry,
    Summary,
    UserState,
    issues_to_dict,
    services_to_dict,
)

GOLDEN_SUBJECT = "Host Jupyter on AWS and coding in local"

ITERATION_1_DIAGRAM = (
    "flowchart LR\n"
    "    Dev[Local Developer] -->|Port 8888| SG[Security Group]\n"
    "    SG --> EC2[EC2: Jupyter Server]"
)

ITERATION_2_DIAGRAM = (
    "flowchart LR\n"
    "    Dev[Local Developer] --> SM[SessionManager]\n"
    "    SM --> EC2[EC2: Jupyter Server]\n"
    "    EC2 --> EBS[(EBS Volume)]"
)


def golden_user_initial() -> UserState:
    return UserState(subject=GOLDEN_SUBJECT)


def golden_architecture_1() -> ArchitectureState:
    return ArchitectureState(
        services=[
            ServiceEntry(
                name="EC2",
                usage="Hosting Jupyter notebook server",
                settings={
                    "Instance type": "t3.medium",
                    "Access": "Public IP with Security Group",
                },
            ),
            ServiceEntry(
                name="Security Group",
                usage="Control network access",
                settings={"Inbound": "Port 8888 open to specific IPs"},
            ),
        ],
        summary=Summary(
            diagram=ITERATION_1_DIAGRAM,
            aspects={
                "security": "IP-based access restriction",
                "scalability": "Limited to single user",
            },
        ),
        inspection=[
            Issue(
                service="EC2",
                issue="No data persistence",
                reason="Data lost on instance termination",
                alternatives=["Use of EBS volumes"],
            ),
            Issue(
                service="Security Group",
                issue="Security risk",
                reason="Direct exposure to internet",
                alternatives=["Use of Session Manager"],
            ),
        ],
        inquiry=["Require GPU?", "Save Data?"],
    )


def golden_user_refined() -> UserState:
    return UserState(
        subject=GOLDEN_SUBJECT,
        preferences={
            "Require GPU?": PreferenceValue.YES,
            "Save Data?": PreferenceValue.YES,
            "Use of Session Manager": PreferenceValue.GOOD,
            "EC2": PreferenceValue.PINNED,
        },
    )


def golden_architecture_2() -> ArchitectureState:
    return ArchitectureState(
        services=[
            ServiceEntry(
                name="EC2",
                usage="Hosting Jupyter notebook server",
                settings={
                    "Instance type": "p3.2xlarge",
                    "Storage": "100GB EBS volume (gp3)",
                },
            ),
            ServiceEntry(
                name="SessionManager",
                usage="Provide secure access to the server",
                settings={"Authentication": "IAM user authentication"},
            ),
        ],
        summary=Summary(
            diagram=ITERATION_2_DIAGRAM,
            aspects={
                "security": "Secure access with SessionManager",
                "reliability": "Single instance with EBS",
                "scalability": "Limited to single user",
            },
        ),
        inspection=[
            Issue(
                service="Cost",
                issue="High instance cost",
                reason="GPU instances are expensive",
                alternatives=[
                    "Use Spot instances",
                    "Implement auto shutdown when idle",
                ],
            ),
        ],
        inquiry=["Expected duration of workloads?", "Need automated backups?"],
    )


# ---------------------------------------------------------------------------
# Canned model responses (what a compliant model would reply)
# ---------------------------------------------------------------------------

def proposal_response(arch: ArchitectureState) -> str:
    return json.dumps({"services": services_to_dict(arch.services)}, indent=1)


def summarization_response(arch: ArchitectureState) -> str:
    payload: dict[str, str] = {"adl": arch.summary.diagram}
    payload.update(arch.summary.aspects)
    return json.dumps(payload, indent=1)


def inspection_response(arch: ArchitectureState) -> str:
    return json.dumps({"issues": issues_to_dict(arch.inspection)}, indent=1)


def inquiry_response(arch: ArchitectureState) -> str:
    return json.dumps({"questions": list(arch.inquiry)}, indent=1)


def iteration_responses(arch: ArchitectureState) -> list[str]:
    """The four replies, in action order, that reproduce ``arch``."""
    return [
        proposal_response(arch),
        summarization_response(arch),
        inspection_response(arch),
        inquiry_response(arch),
    ]


def golden_responses() -> list[str]:
    """All eight replies for the two-iteration golden walkthrough."""
    return iteration_responses(golden_architecture_1()) + iteration_responses(
        golden_architecture_2()
    )


def drive_golden_walkthrough(engine: Engine) -> Session:
    """Create the session, iterate, apply the four responses, iterate."""
    session = engine.create_session(GOLDEN_SUBJECT)
    engine.run_iteration(session.id)
    engine.answer_inquiry(session.id, "Require GPU?", "Yes")
    engine.answer_inquiry(session.id, "Save Data?", "Yes")
    engine.rate_alternative(session.id, "Use of Session Manager", "Good")
    engine.pin_service(session.id, "EC2")
    engine.run_iteration(session.id)
    return session
