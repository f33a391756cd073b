from dataclasses import dataclass

import numpy as np
from sklearn.utils import check_random_state

from ..utils.data_check import check_unit_interval
from ..utils.functions import clamp

SCAFFOLD_KINDS = ('arrow_cue', 'ghost_hand', 'voice_explanation', 'simplify_interface', 'slow_progression',
                  'haptic_pulse')
CHALLENGE_KINDS = ('error_injection', 'reflective_prompt', 'time_pressure')

NBACK_TARGETS = {'rest': .15, 1: .30, 3: .85}


@dataclass(frozen=True)
class SubjectProfile:
    """
        A simulated trainee.

        Parameters
        ----------
        skill : float
            Task proficiency in [0, 1].
        reactivity : float
            In [0, 1], how strongly the latent load moves the EEG bands.
        noise_level : float
            Standard deviation of the pink background noise, microvolts.
        tau : float
            Time constant of the latent load in seconds.
        seed : int
            Fixes the subject's channel frequencies and phases.
    """
    skill: float = .2
    reactivity: float = .8
    noise_level: float = 2.
    tau: float = 8.
    seed: int = 0

    def __post_init__(self):
        check_unit_interval(self.skill, 'skill')
        check_unit_interval(self.reactivity, 'reactivity')
        if self.tau <= 0 or self.noise_level < 0:
            raise ValueError("tau should be positive and noise_level non-negative, got %r, %r"
                             % (self.tau, self.noise_level))


@dataclass(frozen=True)
class InterventionEffects:
    """Latent-target offsets of the interventions and their caps."""
    scaffold: float = -.15
    scaffold_cap: float = -.3
    challenge: float = .15
    challenge_cap: float = .3
    noise: float = .02


@dataclass
class LatentLoad:
    """Ground-truth load ``l`` relaxing toward ``target``, both clamped to [0, 1]."""
    l: float = .5
    target: float = .5

    def __post_init__(self):
        self.l = clamp(self.l)
        self.target = clamp(self.target)


def intervention_offset(active_interventions, effects=InterventionEffects()):
    """
    Summed target offset of the active interventions.

        Examples
        --------
        >>> round(intervention_offset(['arrow_cue', 'ghost_hand', 'simplify_interface']), 9)
        -0.3
        >>> round(intervention_offset(['time_pressure']), 9)
        0.15
    """
    kinds = [getattr(k, 'value', k) for k in active_interventions]
    scaffolds = sum(1 for k in kinds if k in SCAFFOLD_KINDS)
    challenges = sum(1 for k in kinds if k in CHALLENGE_KINDS)
    return max(effects.scaffold * scaffolds, effects.scaffold_cap) + min(effects.challenge * challenges,
                                                                         effects.challenge_cap)


def latent_target(difficulty_norm, skill, active_interventions=(), effects=InterventionEffects()):
    """
    clamp(0.5 + 0.5 * (difficulty_norm - skill) + intervention offsets)

        Examples
        --------
        >>> latent_target(0.25, 0.25)
        0.5
    """
    return clamp(.5 + .5 * (difficulty_norm - skill) + intervention_offset(active_interventions, effects))


def relax(l, target, dt, tau=8., random_state=None, noise=.02):
    """
    One Euler step of the first-order load dynamics with gaussian noise of standard
    deviation ``noise * sqrt(dt)``; the result is clamped to [0, 1].
    """
    rng = check_random_state(random_state)
    drift = dt / tau * (target - l)
    return clamp(l + drift + (rng.normal(0., noise * np.sqrt(dt)) if noise > 0 else 0.))


def latent_step(l, dt, difficulty_norm, skill, active_interventions=(), tau=8., random_state=None,
                effects=InterventionEffects()):
    """
    Advances the latent load by dt seconds.

        Parameters
        ----------
        l : float
            Current load in [0, 1].
        dt : float
            Step in seconds.
        difficulty_norm : float
            Current task difficulty mapped to [0, 1].
        skill : float
        active_interventions : iterable of str
            Interventions currently acting on the trainee.
        tau : float
        random_state : int, RandomState or None
        effects : InterventionEffects

        Returns
        -------
        float, the next load

        Examples
        --------
        >>> latent_step(0.5, 1.0, 0.25, 0.25, effects=InterventionEffects(noise=0.))
        0.5
    """
    target = latent_target(difficulty_norm, skill, active_interventions, effects)
    return relax(l, target, dt, tau, random_state, effects.noise)


def nback_phase(level, profile=SubjectProfile()):
    """
    Latent target of a calibration phase: rest 0.15, 1-back 0.30, 3-back
    0.85 * (1 - 0.2 * skill).

        Examples
        --------
        >>> nback_phase(1)
        0.3
        >>> round(nback_phase(3, SubjectProfile(skill=1.)), 9)
        0.68
    """
    if level not in NBACK_TARGETS:
        raise KeyError("level should be 'rest', 1 or 3, %r was passed" % (level,))
    target = NBACK_TARGETS[level]
    if level == 3:
        target *= 1. - .2 * profile.skill
    return target
