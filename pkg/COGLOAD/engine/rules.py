import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

from ..lstm.model_io import Thresholds
from ..streams.records import ErrorType, EventKind

logger = logging.getLogger(__name__)


class LoadState(str, Enum):
    LOW = 'low'
    OPTIMAL = 'optimal'
    HIGH = 'high'


class InterventionKind(str, Enum):
    ARROW_CUE = 'arrow_cue'
    GHOST_HAND = 'ghost_hand'
    VOICE_EXPLANATION = 'voice_explanation'
    HAPTIC_PULSE = 'haptic_pulse'
    SIMPLIFY_INTERFACE = 'simplify_interface'
    SLOW_PROGRESSION = 'slow_progression'
    ERROR_INJECTION = 'error_injection'
    REFLECTIVE_PROMPT = 'reflective_prompt'
    TIME_PRESSURE = 'time_pressure'
    NONE = 'none'


CHANNELS = {
    InterventionKind.ARROW_CUE: 'visual',
    InterventionKind.GHOST_HAND: 'visual',
    InterventionKind.VOICE_EXPLANATION: 'auditory',
    InterventionKind.HAPTIC_PULSE: 'haptic',
    InterventionKind.SIMPLIFY_INTERFACE: 'visual',
    InterventionKind.SLOW_PROGRESSION: 'visual',
    InterventionKind.ERROR_INJECTION: 'visual',
    InterventionKind.REFLECTIVE_PROMPT: 'auditory',
    InterventionKind.TIME_PRESSURE: 'auditory',
}

CONFUSION_CUES = {
    ErrorType.WHERE: InterventionKind.ARROW_CUE,
    ErrorType.HOW: InterventionKind.GHOST_HAND,
    ErrorType.WHY: InterventionKind.VOICE_EXPLANATION,
}

CHALLENGE_ROTATION = (InterventionKind.ERROR_INJECTION, InterventionKind.REFLECTIVE_PROMPT,
                      InterventionKind.TIME_PRESSURE)


@dataclass(frozen=True)
class Intervention:
    """
        A symbolic adaptation delivered to the trainee.

        Parameters
        ----------
        kind : InterventionKind
        reason : str
            Provenance, mandatory for every kind but ``none``.
        target : int, optional
            Step id the intervention refers to.
        channel : str, optional
            visual, auditory or haptic; derived from the kind when omitted.
    """
    kind: InterventionKind
    reason: str = ''
    target: Optional[int] = None
    channel: Optional[str] = None

    def __post_init__(self):
        kind = InterventionKind(self.kind)
        object.__setattr__(self, 'kind', kind)
        if kind is not InterventionKind.NONE and not self.reason:
            raise ValueError("Intervention %r needs a reason" % kind.value)
        if self.channel is None:
            object.__setattr__(self, 'channel', CHANNELS.get(kind))

    def to_dict(self):
        return {'kind': self.kind.value, 'target': self.target, 'reason': self.reason, 'channel': self.channel}

    @classmethod
    def from_dict(cls, d):
        return cls(d['kind'], d.get('reason', ''), d.get('target'), d.get('channel'))


def channel_of(interventions):
    """
    The delivery channel of a set of interventions.

        Examples
        --------
        >>> channel_of([])
        'none'
        >>> channel_of([Intervention('arrow_cue', 'r'), Intervention('voice_explanation', 'r')])
        'mixed'
    """
    channels = {i.channel for i in interventions}
    if not channels:
        return 'none'
    return channels.pop() if len(channels) == 1 else 'mixed'


@dataclass(frozen=True)
class Decision:
    """
        Outcome of one engine tick.

        ``L``, ``probs`` and ``raw_state`` are None for data-gap decisions, which never
        carry interventions. ``latency_ms`` is the window-close to decision time.
    """
    t: float
    stable_state: Optional[LoadState]
    interventions: Tuple[Intervention, ...] = ()
    L: Optional[float] = None
    probs: Optional[Tuple[float, ...]] = None
    raw_state: Optional[LoadState] = None
    latency_ms: float = 0.
    confusion: Optional[ErrorType] = None
    data_gap: bool = False

    @property
    def channel(self):
        return channel_of(self.interventions)

    def to_dict(self):
        return {
            't': self.t,
            'L': self.L,
            'probs': None if self.probs is None else list(self.probs),
            'raw_state': None if self.raw_state is None else self.raw_state.value,
            'stable_state': None if self.stable_state is None else self.stable_state.value,
            'interventions': [i.to_dict() for i in self.interventions],
            'channel': self.channel,
            'confusion': None if self.confusion is None else self.confusion.value,
            'data_gap': self.data_gap,
            'latency_ms': self.latency_ms,
        }


@dataclass(frozen=True)
class EngineConfig:
    """
        Parameters
        ----------
        debounce_n : int
            Consecutive identical raw states needed to move the stable state.
        cooldown_secs : float
            Minimal time between two interventions of the same kind.
        repetition_k : int
            Repeated (step, error type) errors after a hint that trigger a ghost hand.
        max_one_challenge_per_step : bool
        fallback_thresholds : tuple
            Thresholds used when calibration cannot order T_low < T_high.
    """
    debounce_n: int = 2
    cooldown_secs: float = 30.
    repetition_k: int = 2
    max_one_challenge_per_step: bool = True
    fallback_thresholds: Tuple[float, float] = (.33, .66)

    def __post_init__(self):
        if self.debounce_n < 1:
            raise ValueError("debounce_n should be at least 1, %r was passed" % self.debounce_n)
        if self.cooldown_secs < 0:
            raise ValueError("cooldown_secs should be non-negative, %r was passed" % self.cooldown_secs)
        if self.repetition_k < 1:
            raise ValueError("repetition_k should be at least 1, %r was passed" % self.repetition_k)
        Thresholds(*self.fallback_thresholds)


def classify_state(L, thresholds):
    """
    low iff L <= T_low, high iff L >= T_high, optimal otherwise.

        Examples
        --------
        >>> classify_state(0.33, Thresholds(0.33, 0.66)).value
        'low'
        >>> classify_state(0.5, Thresholds(0.33, 0.66)).value
        'optimal'
    """
    return LoadState(thresholds.state(L))


class Debouncer(object):
    """
        Stable load state that only moves after ``n`` consecutive identical raw states
        different from it. The first raw state initializes it.
    """

    def __init__(self, n=2):
        self.n = n
        self.stable = None
        self._candidate = None
        self._run = 0

    def update(self, raw_state):
        raw_state = LoadState(raw_state)
        if self.stable is None:
            self.stable = raw_state
        elif raw_state is self.stable:
            self._candidate, self._run = None, 0
        else:
            self._run = self._run + 1 if raw_state is self._candidate else 1
            self._candidate = raw_state
            if self._run >= self.n:
                self.stable, self._candidate, self._run = raw_state, None, 0
        return self.stable


def debounce(raw_states, debounce_n=2, stable=None):
    """
    Stable state after a history of raw states.

        Examples
        --------
        >>> debounce(['optimal', 'high']).value
        'optimal'
        >>> debounce(['optimal', 'high', 'high']).value
        'high'
    """
    debouncer = Debouncer(debounce_n)
    debouncer.stable = None if stable is None else LoadState(stable)
    for raw in raw_states:
        debouncer.update(raw)
    return debouncer.stable


def classify_confusion(events):
    """
    Error type of the most recent error event, None without errors.

        Parameters
        ----------
        events : iterable of TaskEvent
            Events of the current cadence span, in timestamp order.
    """
    latest = None
    for event in events:
        if EventKind(event.kind) is EventKind.ERROR and (latest is None or event.t >= latest.t):
            latest = event
    return None if latest is None else ErrorType(latest.error_type)


class CooldownTracker(object):
    """Per-kind suppression: a kind fired at t is blocked until t + cooldown_secs."""

    def __init__(self, cooldown_secs=30.):
        self.cooldown_secs = cooldown_secs
        self.last_fired = {}

    def ready(self, kind, t):
        last = self.last_fired.get(InterventionKind(kind))
        return last is None or t - last >= self.cooldown_secs - 1e-9

    def fire(self, kind, t):
        self.last_fired[InterventionKind(kind)] = t


class RepetitionTracker(object):
    """
        Counts errors per (step, error type) made after a hint was shown on that step.
        ``observe`` returns the keys whose count reached ``k``; their count restarts.
    """

    def __init__(self, k=2):
        self.k = k
        self.hinted = set()
        self.counts = Counter()

    def observe(self, events):
        triggered = []
        for event in events:
            kind = EventKind(event.kind)
            if kind is EventKind.HINT_SHOWN:
                self.hinted.add(event.step_id)
            elif kind is EventKind.ERROR and event.step_id in self.hinted:
                key = (event.step_id, ErrorType(event.error_type))
                self.counts[key] += 1
                if self.counts[key] >= self.k:
                    self.counts[key] = 0
                    if key not in triggered:
                        triggered.append(key)
        return triggered


@dataclass
class RuleState:
    """Mutable memory of the rule table within one session."""
    cooldowns: CooldownTracker
    repetition: RepetitionTracker
    rotation: int = 0
    step_id: Optional[int] = None
    step_challenged: bool = False
    pending_repeats: List[Tuple[int, ErrorType]] = field(default_factory=list)

    @classmethod
    def from_config(cls, cfg):
        return cls(CooldownTracker(cfg.cooldown_secs), RepetitionTracker(cfg.repetition_k))


class _Selection(object):

    def __init__(self, state, t):
        self.state = state
        self.t = t
        self.fired = []
        self.suppressed = []

    def offer(self, kind, reason, target=None):
        kind = InterventionKind(kind)
        if any(i.kind is kind for i in self.fired):
            return True
        if not self.state.cooldowns.ready(kind, self.t):
            logger.debug("%s suppressed at t=%r: reason=cooldown (%s)", kind.value, self.t, reason)
            self.suppressed.append(kind)
            return False
        self.state.cooldowns.fire(kind, self.t)
        self.fired.append(Intervention(kind, reason, target))
        return True


def hold_events(events, state):
    """
    Counts hint and error events of a window that emits no decision; repetitions
    they complete fire with the next evaluated window.
    """
    state.pending_repeats.extend(state.repetition.observe(events))


def event_rules(events, state, t):
    """
    Load-independent rules: a wrong-object grab asks for a haptic pulse, a mistake
    repeated after guidance asks for a ghost hand. Returns the fired interventions.
    """
    selection = _Selection(state, t)
    _event_rules(selection, events)
    return selection.fired


def _event_rules(selection, events):
    for event in events:
        if EventKind(event.kind) is EventKind.OBJECT_GRAB and event.object_ok is False:
            selection.offer(InterventionKind.HAPTIC_PULSE, 'wrong_object', event.step_id)
    state = selection.state
    repeats = state.pending_repeats + state.repetition.observe(events)
    del state.pending_repeats[:]
    for step_id, error_type in repeats:
        selection.offer(InterventionKind.GHOST_HAND, 'repeated_error:%s' % error_type.value, step_id)


def decide(stable_state, confusion, events, state, cfg, t, step_id=None, include_event_rules=True):
    """
    Applies the adaptation rule table, in priority order:

    1. any state, wrong-object grab: haptic_pulse;
    2. any state, the same (step, error type) repeated ``repetition_k`` times after a
       hint: ghost_hand;
    3. high load: where, how, why confusion give arrow_cue, ghost_hand,
       voice_explanation; without a recent error simplify_interface and slow_progression;
    4. low load: one challenge per task step, rotating error_injection,
       reflective_prompt, time_pressure;
    5. optimal load: nothing.

    A kind fired at t is suppressed until t + cooldown_secs.

        Parameters
        ----------
        stable_state : LoadState
        confusion : ErrorType or None
        events : sequence of TaskEvent
            Events of the current cadence span.
        state : RuleState
            Cooldowns, repetition counts and challenge rotation; updated in place.
        cfg : EngineConfig
        t : float
            Decision time in seconds.
        step_id : int, optional
            Current task step, used by the one-challenge-per-step limit.
        include_event_rules : bool
            False when rules 1 and 2 already ran as the events arrived.

        Returns
        -------
        Decision with t, stable_state and interventions set.
    """
    selection = _Selection(state, t)
    if include_event_rules:
        _event_rules(selection, events)
    if step_id != state.step_id:
        state.step_id, state.step_challenged = step_id, False
    stable_state = LoadState(stable_state)
    if stable_state is LoadState.HIGH:
        if confusion is not None:
            confusion = ErrorType(confusion)
            selection.offer(CONFUSION_CUES[confusion], 'high_load:%s' % confusion.value, step_id)
        else:
            selection.offer(InterventionKind.SIMPLIFY_INTERFACE, 'high_load:no_error', step_id)
            selection.offer(InterventionKind.SLOW_PROGRESSION, 'high_load:no_error', step_id)
    elif stable_state is LoadState.LOW:
        if cfg.max_one_challenge_per_step and step_id is not None and state.step_challenged:
            logger.debug("Challenge skipped at t=%r: step %r already challenged", t, step_id)
        else:
            n = len(CHALLENGE_ROTATION)
            for shift in range(n):
                kind = CHALLENGE_ROTATION[(state.rotation + shift) % n]
                if selection.offer(kind, 'low_load', step_id):
                    state.rotation = (state.rotation + shift + 1) % n
                    state.step_challenged = True
                    break
    interventions = tuple(selection.fired)
    return Decision(t=t, stable_state=stable_state, interventions=interventions,
                    confusion=None if confusion is None else ErrorType(confusion))
