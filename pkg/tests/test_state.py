from __future__ import annotations

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from archloop.state import (
    SUMMARY_ASPECT_KEYS,
    ArchitectureState,
    EmptyKey,
    Issue,
    KeyConflict,
    PreferenceValue,
    SchemaError,
    ServiceEntry,
    Summary,
    UserState,
    apply_preference,
    architecture_to_dict,
    decode,
    diff_services,
    encode,
    pinned_services,
    render_yaml,
    toggle_pin,
    user_to_dict,
    validate_architecture,
)
from archloop.state import ViolationKind as VK

from helpers import golden_architecture_1, golden_architecture_2, golden_user_refined

YES = PreferenceValue.YES
NO = PreferenceValue.NO
GOOD = PreferenceValue.GOOD
PINNED = PreferenceValue.PINNED


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

def replay_preference_ops(
    ops: list[tuple[str, PreferenceValue]]
) -> list[tuple[str, PreferenceValue]]:
    """Naive ordered-map replay: linear scan, replace in place or append."""
    items: list[tuple[str, PreferenceValue]] = []
    for key, value in ops:
        for i, (existing, _) in enumerate(items):
            if existing == key:
                items[i] = (key, value)
                break
        else:
            items.append((key, value))
    return items


def toggle_rule_table(
    prefs: dict[str, PreferenceValue], name: str
) -> dict[str, PreferenceValue] | type[KeyConflict]:
    """Rule table over the three cases: absent, Pinned, other value."""
    current = prefs.get(name)
    if current is None:
        out = dict(prefs)
        out[name] = PINNED
        return out
    if current is PINNED:
        return {k: v for k, v in prefs.items() if k != name}
    return KeyConflict


def diff_oracle(prev: ArchitectureState, next: ArchitectureState):
    """Brute-force set comparison over name/setting maps."""
    prev_names = {e.name for e in prev.services}
    next_names = {e.name for e in next.services}
    prev_map = {e.name: e for e in prev.services}
    next_map = {e.name: e for e in next.services}
    changed: dict[str, frozenset[str]] = {}
    for name in prev_names & next_names:
        before, after = prev_map[name], next_map[name]
        keys = frozenset(
            k
            for k in set(before.settings) | set(after.settings)
            if before.settings.get(k) != after.settings.get(k)
        )
        if keys or before.usage != after.usage:
            changed[name] = keys
    return next_names - prev_names, prev_names - next_names, changed


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------

pref_keys = st.text(min_size=1, max_size=12)
pref_values = st.sampled_from(list(PreferenceValue))
preferences = st.dictionaries(pref_keys, pref_values, max_size=6)
user_states = st.builds(
    UserState, subject=st.text(min_size=1, max_size=30), preferences=preferences
)

_service_names = st.sampled_from(
    ["Compute", "Queue", "Bucket", "DB", "Cache", "LB"]
)
_settings = st.dictionaries(
    st.sampled_from(["size", "zone", "tier", "port"]),
    st.text(max_size=8),
    max_size=3,
)
_services = st.lists(
    st.builds(
        ServiceEntry,
        name=_service_names,
        usage=st.text(max_size=20),
        settings=_settings,
    ),
    min_size=1,
    max_size=5,
    unique_by=lambda e: e.name,
)
_summaries = st.builds(
    Summary,
    diagram=st.text(max_size=40),
    aspects=st.dictionaries(
        st.sampled_from(SUMMARY_ASPECT_KEYS), st.text(max_size=20), max_size=4
    ),
)
_issues = st.lists(
    st.builds(
        Issue,
        service=st.text(min_size=1, max_size=8),
        issue=st.text(min_size=1, max_size=12),
        reason=st.text(min_size=1, max_size=12),
        alternatives=st.lists(st.text(max_size=10), max_size=3),
    ),
    max_size=3,
)
arch_states = st.builds(
    ArchitectureState,
    services=_services,
    summary=_summaries,
    inspection=_issues,
    inquiry=st.lists(st.text(min_size=1, max_size=15), max_size=3),
)


# ---------------------------------------------------------------------------
# apply_preference
# ---------------------------------------------------------------------------

class TestApplyPreference:
    def test_records_inquiry_answer(self):
        state = UserState(subject="Host Jupyter on AWS and coding in local")
        out = apply_preference(state, "Require GPU", YES)
        assert out.preferences == {"Require GPU": YES}
        assert state.preferences == {}  # input untouched

    def test_idempotent_overwrite(self):
        state = UserState(subject="s", preferences={"Require GPU": YES})
        assert apply_preference(state, "Require GPU", YES) == state

    def test_overwrite_keeps_position(self):
        # Oracle: naive ordered-map replay of the operation sequence.
        ops = [("Require GPU", YES), ("Save Data", NO), ("Require GPU", NO)]
        expected = replay_preference_ops(ops)
        state = UserState(subject="s")
        for key, value in ops:
            state = apply_preference(state, key, value)
        assert list(state.preferences.items()) == expected
        assert expected[0] == ("Require GPU", NO)  # position unchanged

    def test_empty_key_rejected(self):
        with pytest.raises(EmptyKey):
            apply_preference(UserState(subject="s"), "", YES)

    @given(
        ops=st.lists(st.tuples(pref_keys, pref_values), max_size=12),
        subject=st.text(min_size=1, max_size=10),
    )
    @settings(deadline=None)
    def test_matches_naive_replay(self, ops, subject):
        state = UserState(subject=subject)
        for key, value in ops:
            state = apply_preference(state, key, value)
        assert list(state.preferences.items()) == replay_preference_ops(ops)

    @given(user=user_states, key=pref_keys, value=pref_values)
    @settings(deadline=None)
    def test_idempotent_and_preserving(self, user, key, value):
        once = apply_preference(user, key, value)
        twice = apply_preference(once, key, value)
        assert once == twice
        for existing, val in user.preferences.items():
            if existing != key:
                assert once.preferences[existing] == val
        known = [k for k in user.preferences if k != key]
        assert [k for k in once.preferences if k in known] == known


# ---------------------------------------------------------------------------
# toggle_pin / pinned_services
# ---------------------------------------------------------------------------

class TestTogglePin:
    def test_pin_appends(self):
        out = toggle_pin(UserState(subject="s"), "EC2")
        assert out.preferences == {"EC2": PINNED}

    def test_toggle_inverse(self):
        pinned = UserState(subject="s", preferences={"EC2": PINNED})
        assert toggle_pin(pinned, "EC2").preferences == {}

    def test_conflicting_value_rejected(self):
        state = UserState(subject="s", preferences={"Require GPU": YES})
        with pytest.raises(KeyConflict):
            toggle_pin(state, "Require GPU")

    def test_rule_table_all_cases(self):
        # Oracle: rule table over {absent, Pinned, other}.
        for prefs in ({}, {"X": PINNED}, {"X": GOOD}):
            state = UserState(subject="s", preferences=dict(prefs))
            expected = toggle_rule_table(prefs, "X")
            if expected is KeyConflict:
                with pytest.raises(KeyConflict):
                    toggle_pin(state, "X")
            else:
                assert toggle_pin(state, "X").preferences == expected

    @given(user=user_states, name=pref_keys)
    @settings(deadline=None)
    def test_involution_on_pin_subspace(self, user, name):
        current = user.preferences.get(name)
        if current not in (None, PINNED):
            with pytest.raises(KeyConflict):
                toggle_pin(user, name)
            return
        assert toggle_pin(toggle_pin(user, name), name) == user

    def test_pinned_services_examples(self):
        assert pinned_services(UserState(subject="s")) == []
        assert pinned_services(
            UserState(subject="s", preferences={"Require GPU": YES, "EC2": PINNED})
        ) == ["EC2"]
        # Oracle: linear filter.
        prefs = {"A": PINNED, "B": GOOD, "C": PINNED}
        expected = [k for k, v in prefs.items() if v is PINNED]
        assert expected == ["A", "C"]
        assert pinned_services(UserState(subject="s", preferences=prefs)) == expected

    @given(user=user_states, name=pref_keys)
    @settings(deadline=None)
    def test_pin_then_unpin_tracks_pinned_set(self, user, name):
        if user.preferences.get(name) not in (None, PINNED):
            return
        pinned = toggle_pin(user, name) if user.preferences.get(name) is None else user
        assert name in pinned_services(pinned)
        unpinned = toggle_pin(pinned, name)
        assert name not in pinned_services(unpinned)
        assert [k for k in pinned_services(pinned) if k != name] == pinned_services(
            unpinned
        )


# ---------------------------------------------------------------------------
# validate_architecture
# ---------------------------------------------------------------------------

class TestValidateArchitecture:
    def test_golden_refined_state_is_valid(self):
        report = validate_architecture(golden_architecture_2(), golden_user_refined())
        assert report.ok

    def test_missing_pinned_service(self):
        arch = golden_architecture_1()  # EC2 + Security Group
        user = UserState(subject="s", preferences={"SessionManager": PINNED})
        report = validate_architecture(arch, user)
        assert [str(v) for v in report.violations] == [
            "MissingPinnedService(SessionManager)"
        ]

    def test_pinned_match_is_case_insensitive(self):
        user = UserState(subject="s", preferences={"ec2": PINNED})
        assert validate_architecture(golden_architecture_1(), user).ok

    def test_fenced_diagram(self):
        arch = golden_architecture_1()
        fenced = ArchitectureState(
            services=arch.services,
            summary=Summary(diagram="```mermaid\nflowchart LR\nA-->B\n```"),
            inspection=arch.inspection,
            inquiry=arch.inquiry,
        )
        report = validate_architecture(fenced, UserState(subject="s"))
        # Oracle: substring scan for fence markers.
        assert ("```" in fenced.summary.diagram) == (
            VK.FENCED_DIAGRAM in report.kinds()
        )
        assert VK.FENCED_DIAGRAM in report.kinds()

    def test_structural_violations(self):
        arch = ArchitectureState(
            services=[
                ServiceEntry(name="X", usage="u"),
                ServiceEntry(name="X", usage="u"),
            ],
            summary=Summary(diagram="digraph {}", aspects={"compliance": "n/a"}),
            inspection=[],
            inquiry=["Require GPU?"],
        )
        user = UserState(subject="s", preferences={"Require GPU?": YES})
        kinds = validate_architecture(arch, user).kinds()
        assert kinds == {
            VK.DUPLICATE_SERVICE_NAME,
            VK.MALFORMED_DIAGRAM,
            VK.UNKNOWN_SUMMARY_ASPECT,
            VK.DUPLICATE_INQUIRY_KEY,
        }

    def test_empty_services_and_empty_diagram(self):
        arch = ArchitectureState(
            services=[], summary=Summary(diagram="  "), inspection=[], inquiry=[]
        )
        kinds = validate_architecture(arch, UserState(subject="s")).kinds()
        assert VK.EMPTY_SERVICES in kinds
        assert VK.MALFORMED_DIAGRAM in kinds

    @given(arch=arch_states, user=user_states)
    @settings(deadline=None)
    def test_pure(self, arch, user):
        first = validate_architecture(arch, user)
        second = validate_architecture(arch, user)
        assert first == second


# ---------------------------------------------------------------------------
# diff_services
# ---------------------------------------------------------------------------

class TestDiffServices:
    def test_golden_iteration_diff(self):
        diff = diff_services(golden_architecture_1(), golden_architecture_2())
        assert diff.added == ["SessionManager"]
        assert diff.removed == ["Security Group"]
        assert [(c.name, set(c.setting_keys)) for c in diff.changed] == [
            ("EC2", {"Instance type", "Storage", "Access"})
        ]

    def test_identity_is_empty(self):
        arch = golden_architecture_1()
        assert diff_services(arch, arch).empty

    @given(prev=arch_states, next=arch_states)
    @settings(deadline=None)
    def test_matches_brute_force_oracle(self, prev, next):
        diff = diff_services(prev, next)
        added, removed, changed = diff_oracle(prev, next)
        assert set(diff.added) == added
        assert set(diff.removed) == removed
        assert {c.name: frozenset(c.setting_keys) for c in diff.changed} == changed
        assert not (set(diff.added) & set(diff.removed))

    @given(prev=arch_states, next=arch_states)
    @settings(deadline=None)
    def test_added_removed_are_mirror_images(self, prev, next):
        assert diff_services(prev, next).added == diff_services(next, prev).removed


# ---------------------------------------------------------------------------
# encode / decode
# ---------------------------------------------------------------------------

class TestCodec:
    def test_golden_round_trip(self):
        arch = golden_architecture_2()
        assert decode(encode(arch)) == arch
        user = golden_user_refined()
        assert decode(encode(user)) == user

    def test_empty_input_rejected(self):
        with pytest.raises(SchemaError):
            decode("")

    def test_schema_errors_carry_paths(self):
        with pytest.raises(SchemaError) as err:
            decode('{"subject": "s", "preferences": {"k": "Maybe"}}')
        assert err.value.path == "$.preferences['k']"
        with pytest.raises(SchemaError) as err:
            decode(
                '{"services": [{"name": "", "usage": ""}], '
                '"summary": {"diagram": ""}, "inspection": [], "inquiry": []}'
            )
        assert err.value.path == "$.services[0].name"
        with pytest.raises(SchemaError):
            decode('{"subject": "s", "preferences": {}, "extra": 1}')

    def test_encode_deterministic(self):
        arch = golden_architecture_1()
        assert encode(arch) == encode(arch)

    @given(user=user_states)
    @settings(deadline=None)
    def test_user_round_trip(self, user):
        decoded = decode(encode(user))
        assert decoded == user
        assert list(decoded.preferences.keys()) == list(user.preferences.keys())

    @given(arch=arch_states)
    @settings(deadline=None)
    def test_architecture_round_trip(self, arch):
        assert decode(encode(arch)) == arch

    @given(arch=arch_states)
    @settings(deadline=None)
    def test_decode_then_encode_is_identity_on_canonical_text(self, arch):
        text = encode(arch)
        assert encode(decode(text)) == text

    def test_yaml_rendering_matches_dict_form(self):
        arch = golden_architecture_2()
        assert yaml.safe_load(render_yaml(arch)) == architecture_to_dict(arch)
        user = golden_user_refined()
        assert yaml.safe_load(render_yaml(user)) == user_to_dict(user)
