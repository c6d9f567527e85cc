from __future__ import annotations

import json
from pathlib import Path

import pytest

from archloop.actions import (
    MAX_ATTEMPTS,
    ActionKind,
    MissingContext,
    ParseFailure,
    PartialArchitecture,
    PinnedViolation,
    build_prompt,
    load_template,
    run_inquiry,
    run_inspection,
    run_proposal,
    run_summarization,
    strip_fences,
)
from archloop.gateway import Gateway, ScriptedBackend
from archloop.state import (
    PreferenceValue,
    dumps_canonical,
    encode,
    issues_to_dict,
    preferences_to_dict,
    services_to_dict,
    summary_to_dict,
)

from helpers import (
    golden_architecture_1,
    golden_architecture_2,
    golden_user_initial,
    golden_user_refined,
    inquiry_response,
    inspection_response,
    proposal_response,
    summarization_response,
)

TEMPLATE_DIR = Path("src/archloop/templates")


def scripted_gateway(*responses) -> tuple[Gateway, ScriptedBackend]:
    backend = ScriptedBackend(list(responses))
    return Gateway(backend), backend


# ---------------------------------------------------------------------------
# Template fidelity and context discipline
# ---------------------------------------------------------------------------

class TestBuildPrompt:
    @pytest.mark.parametrize("kind", list(ActionKind))
    def test_system_text_matches_stored_template_byte_exact(self, kind):
        asset = (TEMPLATE_DIR / f"{kind.value}.txt").read_text(encoding="utf-8")
        user = golden_user_refined()
        partial = PartialArchitecture(
            services=golden_architecture_1().services,
            summary=golden_architecture_1().summary,
            inspection=golden_architecture_1().inspection,
        )
        bundle = build_prompt(
            kind, user, prev=golden_architecture_1(), partial=partial
        )
        assert bundle.system_text == asset
        assert bundle.system_text == load_template(kind)

    def test_first_iteration_proposal_carries_subject_only(self):
        user = golden_user_initial()
        bundle = build_prompt(ActionKind.PROPOSAL, user)
        assert f"[Subject]\n{user.subject}" in bundle.user_text
        assert "[Preferences]" not in bundle.user_text
        assert "[Previous Architecture]" not in bundle.user_text

    def test_later_proposal_carries_preferences_and_full_previous_state(self):
        user = golden_user_refined()
        prev = golden_architecture_1()
        bundle = build_prompt(ActionKind.PROPOSAL, user, prev=prev)
        assert f"[Subject]\n{user.subject}" in bundle.user_text
        assert dumps_canonical(preferences_to_dict(user)) in bundle.user_text
        # Full previous state: all four fields, canonically serialized.
        assert encode(prev) in bundle.user_text
        for needle in ("Security Group", "Require GPU?", "Use of Session Manager"):
            assert needle in bundle.user_text

    def test_summarization_context(self):
        user = golden_user_initial()
        services = golden_architecture_1().services
        bundle = build_prompt(
            ActionKind.SUMMARIZATION, user, partial=PartialArchitecture(services=services)
        )
        assert dumps_canonical(services_to_dict(services)) in bundle.user_text
        assert "[Summary]" not in bundle.user_text
        assert "[Inspection]" not in bundle.user_text

    def test_inquiry_context_carries_all_four_inputs(self):
        user = golden_user_initial()
        arch = golden_architecture_1()
        bundle = build_prompt(
            ActionKind.INQUIRY_GENERATION,
            user,
            partial=PartialArchitecture(
                services=arch.services,
                summary=arch.summary,
                inspection=arch.inspection,
            ),
        )
        assert f"[Subject]\n{user.subject}" in bundle.user_text
        assert dumps_canonical(services_to_dict(arch.services)) in bundle.user_text
        assert dumps_canonical(summary_to_dict(arch.summary)) in bundle.user_text
        assert dumps_canonical(issues_to_dict(arch.inspection)) in bundle.user_text

    def test_missing_context_rejected(self):
        user = golden_user_initial()
        with pytest.raises(MissingContext):
            build_prompt(ActionKind.SUMMARIZATION, user, partial=None)
        with pytest.raises(MissingContext):
            build_prompt(
                ActionKind.SUMMARIZATION, user, partial=PartialArchitecture()
            )
        with pytest.raises(MissingContext):
            build_prompt(
                ActionKind.INQUIRY_GENERATION,
                user,
                partial=PartialArchitecture(
                    services=golden_architecture_1().services
                ),
            )

    def test_no_transcript_accumulation(self):
        # Ten rebuilds of the same prompt stay byte-identical.
        user = golden_user_refined()
        texts = {
            build_prompt(ActionKind.PROPOSAL, user, prev=golden_architecture_1()).user_text
            for _ in range(10)
        }
        assert len(texts) == 1


# ---------------------------------------------------------------------------
# run_proposal
# ---------------------------------------------------------------------------

class TestRunProposal:
    def test_parses_recorded_initial_proposal(self):
        gateway, backend = scripted_gateway(proposal_response(golden_architecture_1()))
        services = run_proposal(gateway, golden_user_initial())
        assert services == golden_architecture_1().services
        assert len(backend.requests) == 1

    def test_redesign_includes_pinned_service(self):
        gateway, _ = scripted_gateway(proposal_response(golden_architecture_2()))
        services = run_proposal(
            gateway, golden_user_refined(), golden_architecture_1()
        )
        assert "EC2" in {s.name for s in services}

    def test_pinned_violation_after_three_strikes(self):
        # Oracle: scripted cassette with 3 violating responses.
        violating = json.dumps(
            {"services": [{"name": "Lambda", "usage": "x", "settings": {}}]}
        )
        gateway, backend = scripted_gateway(violating, violating, violating)
        with pytest.raises(PinnedViolation) as err:
            run_proposal(gateway, golden_user_refined(), golden_architecture_1())
        assert err.value.missing == ["EC2"]
        assert len(backend.requests) == MAX_ATTEMPTS
        assert len(err.value.attempts) == MAX_ATTEMPTS

    def test_pinned_violation_repaired_mid_flight(self):
        violating = json.dumps(
            {"services": [{"name": "Lambda", "usage": "x", "settings": {}}]}
        )
        gateway, backend = scripted_gateway(
            violating, proposal_response(golden_architecture_2())
        )
        services = run_proposal(
            gateway, golden_user_refined(), golden_architecture_1()
        )
        assert "EC2" in {s.name for s in services}
        assert len(backend.requests) == 2
        # The repair request carries the error and the offending output.
        assert "[Repair attempt 2]" in backend.requests[1].user_text
        assert "Lambda" in backend.requests[1].user_text

    def test_malformed_output_exhausts_to_parse_failure(self):
        gateway, backend = scripted_gateway("not json", "still not", "{}")
        with pytest.raises(ParseFailure):
            run_proposal(gateway, golden_user_initial())
        assert len(backend.requests) == MAX_ATTEMPTS

    def test_duplicate_and_empty_service_lists_trigger_repair(self):
        dup = json.dumps(
            {"services": [
                {"name": "EC2", "usage": "a", "settings": {}},
                {"name": "EC2", "usage": "b", "settings": {}},
            ]}
        )
        empty = json.dumps({"services": []})
        gateway, backend = scripted_gateway(
            dup, empty, proposal_response(golden_architecture_1())
        )
        services = run_proposal(gateway, golden_user_initial())
        assert [s.name for s in services] == ["EC2", "Security Group"]
        assert len(backend.requests) == 3


# ---------------------------------------------------------------------------
# run_summarization
# ---------------------------------------------------------------------------

class TestRunSummarization:
    def test_parses_recorded_summary(self):
        gateway, _ = scripted_gateway(summarization_response(golden_architecture_1()))
        summary = run_summarization(
            gateway, golden_user_initial(), golden_architecture_1().services
        )
        assert summary.aspects["security"] == "IP-based access restriction"
        assert summary.aspects["scalability"] == "Limited to single user"
        assert summary == golden_architecture_1().summary

    def test_unknown_aspect_key_exercises_repair(self):
        bad = json.dumps({"adl": "flowchart LR\nA-->B", "compliance": "fine"})
        good = summarization_response(golden_architecture_1())
        gateway, backend = scripted_gateway(bad, good)
        summary = run_summarization(
            gateway, golden_user_initial(), golden_architecture_1().services
        )
        assert summary == golden_architecture_1().summary
        assert len(backend.requests) == 2
        assert "compliance" in backend.requests[1].user_text

    def test_fenced_diagram_stripped_on_final_attempt(self):
        diagram = golden_architecture_1().summary.diagram
        fenced = json.dumps(
            {"adl": f"```mermaid\n{diagram}\n```", "security": "ok"}
        )
        gateway, backend = scripted_gateway(fenced, fenced, fenced)
        summary = run_summarization(
            gateway, golden_user_initial(), golden_architecture_1().services
        )
        # Oracle: the fence-strip function applied to the fixture.
        assert summary.diagram == strip_fences(f"```mermaid\n{diagram}\n```")
        assert summary.diagram == diagram
        assert len(backend.requests) == MAX_ATTEMPTS

    def test_missing_services_rejected(self):
        gateway, _ = scripted_gateway()
        with pytest.raises(MissingContext):
            run_summarization(gateway, golden_user_initial(), [])


# ---------------------------------------------------------------------------
# run_inspection
# ---------------------------------------------------------------------------

class TestRunInspection:
    def test_parses_recorded_issues_in_priority_order(self):
        gateway, _ = scripted_gateway(inspection_response(golden_architecture_1()))
        issues = run_inspection(
            gateway, golden_user_initial(), golden_architecture_1().services
        )
        assert [(i.service, i.issue) for i in issues] == [
            ("EC2", "No data persistence"),
            ("Security Group", "Security risk"),
        ]
        assert "Use of Session Manager" in issues[1].alternatives

    def test_empty_issue_list_accepted(self):
        gateway, _ = scripted_gateway(json.dumps({"issues": []}))
        assert run_inspection(
            gateway, golden_user_initial(), golden_architecture_1().services
        ) == []

    def test_missing_reason_exhausts_to_parse_failure(self):
        # Oracle: scripted 3-strike cassette.
        missing_reason = json.dumps(
            {"issues": [{"service": "EC2", "issue": "x", "alternatives": []}]}
        )
        gateway, backend = scripted_gateway(*([missing_reason] * 3))
        with pytest.raises(ParseFailure):
            run_inspection(
                gateway, golden_user_initial(), golden_architecture_1().services
            )
        assert len(backend.requests) == MAX_ATTEMPTS


# ---------------------------------------------------------------------------
# run_inquiry
# ---------------------------------------------------------------------------

class TestRunInquiry:
    def _run(self, gateway, user):
        arch = golden_architecture_1()
        return run_inquiry(
            gateway, user, arch.services, arch.summary, arch.inspection
        )

    def test_parses_recorded_questions(self):
        gateway, _ = scripted_gateway(inquiry_response(golden_architecture_1()))
        assert self._run(gateway, golden_user_initial()) == [
            "Require GPU?",
            "Save Data?",
        ]

    def test_question_matching_existing_preference_filtered(self):
        gateway, _ = scripted_gateway(inquiry_response(golden_architecture_1()))
        user = golden_user_initial()
        from archloop.state import apply_preference

        user = apply_preference(user, "Require GPU?", PreferenceValue.YES)
        assert self._run(gateway, user) == ["Save Data?"]

    def test_filter_preserves_order(self):
        # Oracle: list filter against the preference key set.
        questions = ["Q1?", "Require GPU?", "Q2?", "Save Data?", "Q3?"]
        user = golden_user_refined()  # has Require GPU? and Save Data?
        expected = [q for q in questions if q not in user.preferences]
        gateway, _ = scripted_gateway(json.dumps({"questions": questions}))
        assert self._run(gateway, user) == expected == ["Q1?", "Q2?", "Q3?"]

    def test_determinism_under_fixed_responses(self):
        response = inquiry_response(golden_architecture_1())
        first = self._run(scripted_gateway(response)[0], golden_user_initial())
        second = self._run(scripted_gateway(response)[0], golden_user_initial())
        assert first == second
