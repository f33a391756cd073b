import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.utils import check_random_state

from .eeg import BandMixModel, EegGenerator
from .subject import InterventionEffects, SubjectProfile, latent_step
from .trainee import CHALLENGE_KINDS, ErrorModel, Trainee
from ..engine.AdaptiveEngine import AdaptiveEngine
from ..engine.rules import EngineConfig
from ..engine.session_log import SessionLog
from ..lstm.model_io import ModelBundle
from ..streams.StreamSynchronizer import StreamConfig
from ..streams.records import EegSample
from ..utils.functions import clamp

logger = logging.getLogger(__name__)

POLICIES = ('static', 'adaptive')


@dataclass(frozen=True)
class ScenarioConfig:
    """
        Closed-loop simulator settings.

        Parameters
        ----------
        chunk_secs : float
            Latent-load update step.
        action_secs : float
            Mean time between two trainee actions.
        effect_secs : float
            How long a delivered intervention acts on the latent load.
        l0 : float
            Initial latent load.
        max_level_shift : int
            Bound of the adaptive difficulty offset in levels.
    """
    chunk_secs: float = .25
    action_secs: float = 2.5
    effect_secs: float = 10.
    l0: float = .5
    max_level_shift: int = 4
    effects: InterventionEffects = field(default_factory=InterventionEffects)
    error_model: ErrorModel = field(default_factory=ErrorModel)
    band_model: BandMixModel = field(default_factory=BandMixModel)


def _log_event(log, event):
    record = event.to_dict()
    t = record.pop('t')
    log.append('event', t, **record)


def run_scenario(policy, profile, session_secs, seed, model, engine_config=EngineConfig(),
                 stream_config=StreamConfig(), scenario_config=ScenarioConfig(), feature_kwargs=None,
                 session_id=None, model_path=None):
    """
    Simulates a training session in closed loop on a virtual clock.

    Synthetic EEG and trainee events stream into an ``AdaptiveEngine``. Under the
    adaptive policy its interventions act on the latent load for ``effect_secs``,
    slow_progression lowers and challenges raise the task difficulty by one level,
    and scaffolding hints make the trainee emit ``hint_shown``. The static policy
    keeps the nominal difficulty and never intervenes.

        Parameters
        ----------
        policy : str
            'static' or 'adaptive'.
        profile : SubjectProfile
        session_secs : float
        seed : int
        model : ModelBundle
        engine_config : EngineConfig
        stream_config : StreamConfig
        scenario_config : ScenarioConfig
        feature_kwargs : dict, optional
        session_id : str, optional
            Defaults to '<policy>-<seed>'.
        model_path : str, optional
            Recorded in the meta record for replay.

        Returns
        -------
        SessionLog, the ground-truth load ``l`` is stored in every decision record
    """
    if policy not in POLICIES:
        raise KeyError("policy should be one of %r, %r was passed" % (POLICIES, policy))
    if not isinstance(model, ModelBundle):
        raise TypeError("model should be a ModelBundle, %r was passed" % type(model).__name__)
    adaptive = policy == 'adaptive'
    cfg = scenario_config
    rng = check_random_state(seed)
    fs = stream_config.sample_rate
    generator = EegGenerator(profile, rng.randint(np.iinfo(np.int32).max), cfg.band_model, fs)
    trainee = Trainee(profile, rng.randint(np.iinfo(np.int32).max), cfg.action_secs, cfg.error_model)
    log = SessionLog(session_id if session_id is not None else '%s-%s' % (policy, seed))
    log.append('meta', 0., clock='virtual', policy=policy, seed=seed, session_secs=float(session_secs),
               profile=asdict(profile), model=model_path, thresholds=model.thresholds.to_dict(),
               engine=asdict(engine_config), stream=asdict(stream_config), immediate_events=False)
    engine = AdaptiveEngine(model, config=engine_config, stream_config=stream_config, feature_kwargs=feature_kwargs,
                            log=log, adapt=adaptive)
    shift = 0
    active = {}

    def level(step):
        return int(clamp(step.difficulty + shift, 1, 5)) if adaptive else step.difficulty

    def deliver(events):
        for event in events:
            engine.push_event(event)
            _log_event(log, event)

    l = cfg.l0
    deliver(trainee.start(0., l, level(trainee.step)))
    n_total = int(round(session_secs * fs))
    chunk = max(1, int(round(cfg.chunk_secs * fs)))
    produced = 0
    while produced < n_total:
        n = min(chunk, n_total - produced)
        times, eeg = generator.generate(l, n)
        for t, x in zip(times.tolist(), eeg.tolist()):
            engine.push_eeg(EegSample(t, tuple(x)))
        produced += n
        t_end = generator.t
        deliver(trainee.advance(t_end, l, level))
        while engine.next_close <= t_end + 1e-9:
            decision = engine.tick(ground_truth=l)
            for intervention in decision.interventions:
                kind = intervention.kind.value
                active[kind] = decision.t + cfg.effect_secs
                if kind == 'slow_progression':
                    shift = max(shift - 1, -cfg.max_level_shift)
                elif kind in CHALLENGE_KINDS:
                    shift = min(shift + 1, cfg.max_level_shift)
                # feedback lands in the next window
                deliver(trainee.receive(kind, decision.t + 1. / fs, level(trainee.step)))
        acting = [kind for kind, until in active.items() if until > t_end]
        l = latent_step(l, n / fs, (level(trainee.step) - 1) / 4., profile.skill, acting, profile.tau, rng,
                        cfg.effects)
    logger.info("Session %s: %d decisions, %d steps completed", log.session_id, len(engine.decisions),
                trainee.completed_steps)
    return log


def time_in_band(log, lo=.33, hi=.66):
    """
    Fraction of the decisions of a simulated session whose ground-truth load lies in (lo, hi).

    The load is sampled at decision instants, one per cadence, so this is a
    decision-sampled estimate of the time in band and not an integral over the latent
    trajectory between decisions.
    """
    loads = [r['l'] for r in log.of_type('decision') if r.get('l') is not None]
    if not loads:
        return float('nan')
    loads = np.asarray(loads)
    return float(np.mean((loads > lo) & (loads < hi)))
