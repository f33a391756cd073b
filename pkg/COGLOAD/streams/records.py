import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

N_CHANNELS = 14
N_STEPS = 8
N_MODULES = 2
N_LEVELS = 5


class EventKind(str, Enum):
    STEP_START = 'step_start'
    STEP_COMPLETE = 'step_complete'
    ERROR = 'error'
    OBJECT_GRAB = 'object_grab'
    HINT_SHOWN = 'hint_shown'
    CHALLENGE_ISSUED = 'challenge_issued'


class ErrorType(str, Enum):
    WHERE = 'where'
    HOW = 'how'
    WHY = 'why'


class DropReason(str, Enum):
    TOO_OLD = 'too_old'
    NAN_VALUE = 'nan_value'
    BAD_CHANNEL_COUNT = 'bad_channel_count'
    BAD_STEP = 'bad_step'
    BAD_MODULE = 'bad_module'
    BAD_KIND = 'bad_kind'
    BAD_DIFFICULTY = 'bad_difficulty'
    MISSING_FIELD = 'missing_field'


@dataclass(frozen=True)
class EegSample:
    """One 14-channel EEG sample; ``t`` in seconds, ``channels`` in microvolts."""
    t: float
    channels: Tuple[float, ...]


@dataclass(frozen=True)
class TaskEvent:
    """
        A timestamped behavioral event logged by the training task.

        Parameters
        ----------
        t : float
            Event time in seconds.
        kind : EventKind or str
        step_id : int
            Task step, 1..8.
        module_id : int
            Task module, 1..2.
        difficulty : int
            Current task difficulty level, 1..5.
        error_type : ErrorType or str, optional
            Mandatory for ``error`` events.
        object_ok : bool, optional
            Mandatory for ``object_grab`` events.
    """
    t: float
    kind: str
    step_id: int
    module_id: int
    difficulty: int = 1
    error_type: Optional[str] = None
    object_ok: Optional[bool] = None

    def shifted(self, offset):
        return replace(self, t=self.t + offset)

    def to_dict(self):
        result = {'t': self.t, 'kind': _value(self.kind), 'step': self.step_id,
                  'module': self.module_id, 'difficulty': self.difficulty}
        if self.error_type is not None:
            result['error_type'] = _value(self.error_type)
        if self.object_ok is not None:
            result['object_ok'] = self.object_ok
        return result

    @classmethod
    def from_dict(cls, d):
        return cls(t=d['t'], kind=d['kind'], step_id=d['step'], module_id=d['module'],
                   difficulty=d.get('difficulty', 1), error_type=d.get('error_type'),
                   object_ok=d.get('object_ok'))


@dataclass(frozen=True)
class PushResult:
    accepted: bool
    reason: Optional[DropReason] = None

    def __bool__(self):
        return self.accepted


ACCEPTED = PushResult(True)


def _value(x):
    return x.value if isinstance(x, Enum) else x


def validate_sample(sample):
    """
    Returns the DropReason for a malformed EEG sample, None if it is well formed.

        Examples
        --------
        >>> validate_sample(EegSample(0.0, (0.0,) * 14)) is None
        True
        >>> validate_sample(EegSample(0.0, (0.0,) * 13)).value
        'bad_channel_count'
    """
    if len(sample.channels) != N_CHANNELS:
        return DropReason.BAD_CHANNEL_COUNT
    if not math.isfinite(sample.t) or not all(math.isfinite(v) for v in sample.channels):
        return DropReason.NAN_VALUE
    return None


def validate_event(event):
    """Returns the DropReason for a malformed task event, None if it is well formed."""
    if not isinstance(event.t, (int, float)) or not math.isfinite(event.t):
        return DropReason.NAN_VALUE
    try:
        kind = EventKind(_value(event.kind))
    except ValueError:
        return DropReason.BAD_KIND
    if not isinstance(event.step_id, int) or not 1 <= event.step_id <= N_STEPS:
        return DropReason.BAD_STEP
    if not isinstance(event.module_id, int) or not 1 <= event.module_id <= N_MODULES:
        return DropReason.BAD_MODULE
    if not isinstance(event.difficulty, int) or not 1 <= event.difficulty <= N_LEVELS:
        return DropReason.BAD_DIFFICULTY
    if kind is EventKind.ERROR:
        if event.error_type is None:
            return DropReason.MISSING_FIELD
        try:
            ErrorType(_value(event.error_type))
        except ValueError:
            return DropReason.MISSING_FIELD
    if kind is EventKind.OBJECT_GRAB and event.object_ok is None:
        return DropReason.MISSING_FIELD
    return None


def normalize_event(event):
    """Coerces string kinds and error types to their enum members."""
    error_type = None if event.error_type is None else ErrorType(_value(event.error_type))
    return replace(event, kind=EventKind(_value(event.kind)), error_type=error_type)
