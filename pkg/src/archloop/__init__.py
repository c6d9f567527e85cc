"""Session-based cloud architecture design support.

The package keeps design knowledge in two explicit states — the
designer's subject and preference map, and the generated architecture
(services, summary, inspection, inquiry) — and drives refinement through
a guided loop of four generation actions followed by user responses.
Ships with an HTTP service, deterministic record/replay testing for all
model exchanges, and a multiple-choice exam benchmark harness.
"""

from .engine import Engine, Session, replay_journal
from .gateway import Gateway, gateway_from_env
from .state import (
    ArchitectureState,
    PreferenceValue,
    UserState,
    apply_preference,
    diff_services,
    pinned_services,
    toggle_pin,
    validate_architecture,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Engine",
    "Session",
    "replay_journal",
    "Gateway",
    "gateway_from_env",
    "ArchitectureState",
    "PreferenceValue",
    "UserState",
    "apply_preference",
    "diff_services",
    "pinned_services",
    "toggle_pin",
    "validate_architecture",
]
