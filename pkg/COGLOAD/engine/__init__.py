from .rules import (LoadState, InterventionKind, Intervention, Decision, EngineConfig, CHANNELS, CHALLENGE_ROTATION,
                    CONFUSION_CUES, channel_of, classify_state, Debouncer, debounce, classify_confusion,
                    CooldownTracker, RepetitionTracker, RuleState, event_rules, hold_events, decide)
from .AdaptiveEngine import AdaptiveEngine, infer, infer_frames, replay_decisions
from .session_log import SessionLog, RECORD_TYPES
