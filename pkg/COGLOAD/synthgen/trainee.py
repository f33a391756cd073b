import math
from dataclasses import dataclass
from typing import Tuple

from sklearn.utils import check_random_state

from ..streams.records import ErrorType, EventKind, TaskEvent

ERROR_TYPES = (ErrorType.WHERE, ErrorType.HOW, ErrorType.WHY)
HINT_KINDS = ('arrow_cue', 'ghost_hand', 'voice_explanation')
CHALLENGE_KINDS = ('error_injection', 'reflective_prompt', 'time_pressure')


@dataclass(frozen=True)
class TaskStep:
    """
        One step of the milling task.

        Parameters
        ----------
        step_id, module_id : int
        name : str
        difficulty : int
            Nominal difficulty level, 1..5.
        error_mix : tuple of 3 floats
            Probabilities of where / how / why errors.
        actions : int
            Successful actions a fully skilled trainee needs at optimal load.
    """
    step_id: int
    module_id: int
    name: str
    difficulty: int
    error_mix: Tuple[float, float, float]
    actions: int


STEP_CATALOGUE = (
    TaskStep(1, 1, 'align part', 2, (.5, .3, .2), 4),
    TaskStep(2, 1, 'mount vise parallels', 3, (.4, .4, .2), 5),
    TaskStep(3, 1, 'mount tool', 4, (.3, .5, .2), 5),
    TaskStep(4, 1, 'set zero', 4, (.2, .3, .5), 5),
    TaskStep(5, 2, 'set spindle speed', 3, (.2, .2, .6), 4),
    TaskStep(6, 2, 'position axes', 4, (.5, .3, .2), 5),
    TaskStep(7, 2, 'drill', 5, (.2, .5, .3), 6),
    TaskStep(8, 2, 'deburr and inspect', 5, (.4, .3, .3), 6),
)


@dataclass(frozen=True)
class ErrorModel:
    """
        Per-action error probability p0 + a * max(0, l - 0.66) + b * [l < 0.33].

        Examples
        --------
        >>> ErrorModel().probability(0.5)
        0.02
        >>> round(ErrorModel().probability(0.2), 9)
        0.1
    """
    p0: float = .02
    a: float = .5
    b: float = .08
    high: float = .66
    low: float = .33

    def probability(self, l):
        return self.p0 + self.a * max(0., l - self.high) + (self.b if l < self.low else 0.)


def error_probability(l, model=ErrorModel()):
    return model.probability(l)


def required_actions(step, l, skill):
    """Successful actions needed to complete a step; more when overloaded or unskilled."""
    return int(math.ceil(step.actions * (1.5 - .5 * skill) * (1. + max(0., l - .66))))


def step_by_id(step_id):
    for step in STEP_CATALOGUE:
        if step.step_id == step_id:
            return step
    raise KeyError("step_id should be in 1..%d, %r was passed" % (len(STEP_CATALOGUE), step_id))


def _action_events(rng, t, l, step, difficulty, error_model):
    events = []
    if rng.uniform() < error_model.probability(l):
        error_type = ERROR_TYPES[rng.choice(3, p=step.error_mix)]
        if error_type is ErrorType.WHERE:
            events.append(TaskEvent(t, EventKind.OBJECT_GRAB, step.step_id, step.module_id, difficulty,
                                    object_ok=False))
        events.append(TaskEvent(t, EventKind.ERROR, step.step_id, step.module_id, difficulty,
                                error_type=error_type))
        return events, False
    if rng.uniform() < .25:
        events.append(TaskEvent(t, EventKind.OBJECT_GRAB, step.step_id, step.module_id, difficulty, object_ok=True))
    return events, True


def task_step(step_id, l, profile, seed=None, dt=10., t0=0., difficulty=None, action_secs=2.5,
              error_model=ErrorModel()):
    """
    Events of dt seconds spent on one step at load l, one action opportunity every
    ``action_secs``; completion is not tracked (see ``Trainee``).

        Parameters
        ----------
        step_id : int
        l : float
            Latent load.
        profile : SubjectProfile
        seed : int or RandomState
        dt : float
        t0 : float
            Time of the first action opportunity.
        difficulty : int, optional
            Level stamped on the events, defaults to the step's nominal level.

        Returns
        -------
        list of TaskEvent
    """
    rng = check_random_state(seed)
    step = step_by_id(step_id)
    difficulty = step.difficulty if difficulty is None else int(difficulty)
    events = []
    n = int(math.floor(dt / action_secs + 1e-9))
    for k in range(n):
        events.extend(_action_events(rng, t0 + k * action_secs, l, step, difficulty, error_model)[0])
    return events


class Trainee(object):
    """
        Simulated trainee working through the step catalogue in a loop.

        Parameters
        ----------
        profile : SubjectProfile
        random_state : int or RandomState
        action_secs : float
            Mean time between action opportunities.
        error_model : ErrorModel
    """

    def __init__(self, profile, random_state=None, action_secs=2.5, error_model=ErrorModel(),
                 catalogue=STEP_CATALOGUE):
        self.profile = profile
        self.rng = check_random_state(random_state)
        self.action_secs = action_secs
        self.error_model = error_model
        self.catalogue = catalogue
        self.index = 0
        self.successes = 0
        self.required = None
        self.next_action = None
        self.completed_steps = 0

    @property
    def step(self):
        return self.catalogue[self.index]

    def _interval(self):
        return self.action_secs * self.rng.uniform(.8, 1.2)

    def start(self, t, l, difficulty):
        step = self.step
        self.successes = 0
        self.required = required_actions(step, l, self.profile.skill)
        self.next_action = t + self._interval()
        return [TaskEvent(t, EventKind.STEP_START, step.step_id, step.module_id, int(difficulty))]

    def advance(self, t_end, l, difficulty):
        """
            Actions performed up to t_end at load l.

            Parameters
            ----------
            t_end : float
            l : float
            difficulty : int or callable
                Effective level, or a function of the step giving it.

            Returns
            -------
            list of TaskEvent in timestamp order
        """
        level = difficulty if callable(difficulty) else (lambda step: difficulty)
        if self.next_action is None:
            return self.start(0., l, level(self.step))
        events = []
        while self.next_action <= t_end:
            t = self.next_action
            step = self.step
            action, success = _action_events(self.rng, t, l, step, int(level(step)), self.error_model)
            events.extend(action)
            self.successes += success
            if self.successes >= self.required:
                events.append(TaskEvent(t, EventKind.STEP_COMPLETE, step.step_id, step.module_id,
                                        int(level(step))))
                self.completed_steps += 1
                self.index = (self.index + 1) % len(self.catalogue)
                events.extend(self.start(t, l, level(self.step)))
            else:
                self.next_action = t + self._interval()
        return events

    def receive(self, kind, t, difficulty):
        """Feedback events for a delivered intervention: hint_shown for scaffolds, challenge_issued for challenges."""
        kind = getattr(kind, 'value', kind)
        step = self.step
        if kind in HINT_KINDS:
            return [TaskEvent(t, EventKind.HINT_SHOWN, step.step_id, step.module_id, int(difficulty))]
        if kind in CHALLENGE_KINDS:
            return [TaskEvent(t, EventKind.CHALLENGE_ISSUED, step.step_id, step.module_id, int(difficulty))]
        return []
