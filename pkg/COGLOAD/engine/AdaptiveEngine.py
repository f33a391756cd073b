import logging
from dataclasses import replace

import numpy as np

from .rules import (Decision, Debouncer, EngineConfig, LoadState, RuleState, classify_confusion, classify_state,
                    decide, event_rules, hold_events)
from ..features.FeatureExtractor import NormStats, raw_features
from ..lstm.model_io import ModelBundle, Thresholds
from ..lstm.network import forward, load_score
from ..streams.StreamSynchronizer import StreamConfig, StreamSynchronizer
from ..streams.records import TaskEvent

logger = logging.getLogger(__name__)


def infer(window, model, norms, thresholds=Thresholds(), **feature_kwargs):
    """
    Load score, class probabilities and raw state of one window.

        Parameters
        ----------
        window : AlignedWindow
        model : ModelParams
        norms : NormStats
        thresholds : Thresholds
        **feature_kwargs :
            Geometry forwarded to ``raw_features``.

        Returns
        -------
        (L, probs, raw_state)
    """
    frames, _ = raw_features(window, **feature_kwargs)
    return infer_frames(norms.transform(frames), model, thresholds)


def infer_frames(frames, model, thresholds=Thresholds()):
    """Same as ``infer`` for an already normalized (n_frames, 8) matrix."""
    probs = forward(np.asarray(frames, dtype=np.float64), model, mode='eval')
    L = float(load_score(probs))
    return L, tuple(float(p) for p in probs), classify_state(L, thresholds)


class AdaptiveEngine(object):
    """
        The closed-loop tick pipeline of one session: close a window, extract
        features, infer the load, debounce the state and apply the adaptation rules.

        Parameters
        ----------
        model : ModelBundle or ModelParams
            Trained network; a bundle also provides thresholds and norms.
        thresholds : Thresholds, optional
            Overrides the bundle's thresholds.
        norms : NormStats, optional
            Overrides the bundle's normalization statistics.
        config : EngineConfig
        stream_config : StreamConfig
        feature_kwargs : dict, optional
            Sub-frame geometry, bands and entropy range forwarded to feature extraction.
        log : SessionLog, optional
            Receives eeg_summary, features and decision records for every tick.
        clock : callable, optional
            Returns seconds (e.g. ``time.perf_counter``) for latency stamps; without it
            the engine runs on a virtual clock and stamps 0.0 ms.
        adapt : bool
            False computes states only and never emits interventions.
        immediate_events : bool
            Event rules run in ``react`` as events arrive instead of at the next tick.
        verbose : bool
            Log every decision at INFO instead of DEBUG.

        Examples
        --------
        >>> from COGLOAD.lstm import zero_params
        >>> engine = AdaptiveEngine(zero_params())
        >>> d = engine.evaluate(10., np.zeros((5, 8)))
        >>> d.L, d.raw_state.value, d.stable_state.value
        (0.5, 'optimal', 'optimal')
    """

    def __init__(self, model, thresholds=None, norms=None, config=EngineConfig(), stream_config=StreamConfig(),
                 feature_kwargs=None, log=None, clock=None, adapt=True, immediate_events=False, verbose=False):
        if isinstance(model, ModelBundle):
            thresholds = thresholds if thresholds is not None else model.thresholds
            norms = norms if norms is not None else model.norms
            model = model.params
        self.params = model
        self.thresholds = thresholds if thresholds is not None else Thresholds(*config.fallback_thresholds)
        self.norms = norms if norms is not None else NormStats.identity()
        self.config = config
        self.stream_config = stream_config
        self.feature_kwargs = dict(feature_kwargs or {})
        self.feature_kwargs.setdefault('sample_rate', stream_config.sample_rate)
        self.log = log
        self.clock = clock
        self.adapt = adapt
        self.immediate_events = immediate_events
        self.verbose = verbose
        self.synchronizer = StreamSynchronizer(stream_config)
        self.debouncer = Debouncer(config.debounce_n)
        self.rules = RuleState.from_config(config)
        self.decisions = []
        self._next_close = None

    def push_eeg(self, sample):
        result = self.synchronizer.push_eeg(sample)
        if result and self._next_close is None:
            # the cadence grid starts at the first accepted sample
            self._next_close = float(sample.t) + self.stream_config.first_close
        return result

    def push_event(self, event):
        return self.synchronizer.push_event(event)

    @property
    def next_close(self):
        """Close instant of the next window on the cadence grid, None before the first EEG sample."""
        return self._next_close

    def align_clocks(self, eeg_t0, event_t0):
        return self.synchronizer.align_clocks(eeg_t0, event_t0)

    def due(self):
        """True once the EEG row closing the next window has been received."""
        if self._next_close is None:
            return False
        return self.synchronizer.newest_eeg >= self._next_close - 1. / self.stream_config.sample_rate - 1e-9

    def react(self, event):
        """
            Event rules evaluated as soon as an event arrives.

            Returns
            -------
            list of Intervention, empty unless ``immediate_events`` and ``adapt`` are set.
        """
        if not (self.immediate_events and self.adapt):
            return []
        fired = event_rules([event], self.rules, event.t)
        for intervention in fired:
            logger.log(self._level, "t=%r %s (%s)", event.t, intervention.kind.value, intervention.reason)
        return fired

    @property
    def _level(self):
        return logging.INFO if self.verbose else logging.DEBUG

    def evaluate(self, t, frames, events=(), step_id=None, data_gap=False):
        """
            Decision for already normalized features; the replay entry point.

            Parameters
            ----------
            t : float
            frames : array-like, shape (n_frames, 8)
            events : sequence of TaskEvent
            step_id : int, optional
            data_gap : bool

            Returns
            -------
            Decision
        """
        if data_gap:
            if self.adapt and not self.immediate_events:
                hold_events(events, self.rules)
            decision = Decision(t=t, stable_state=self.debouncer.stable, data_gap=True)
        else:
            L, probs, raw_state = infer_frames(frames, self.params, self.thresholds)
            stable = self.debouncer.update(raw_state)
            if self.adapt:
                decision = decide(stable, classify_confusion(events), events, self.rules, self.config, t,
                                  step_id, include_event_rules=not self.immediate_events)
            else:
                decision = Decision(t=t, stable_state=stable)
            decision = replace(decision, L=L, probs=probs, raw_state=raw_state)
        logger.log(self._level, "t=%r L=%s state=%s interventions=%s", t, decision.L,
                   decision.stable_state and decision.stable_state.value,
                   [i.kind.value for i in decision.interventions])
        return decision

    def tick(self, t_close=None, ground_truth=None):
        """
            Closes the window ending at ``t_close`` (default: the next cadence instant)
            and returns its Decision. Insufficient windows give a data-gap decision.

            Parameters
            ----------
            t_close : float, optional
            ground_truth : float, optional
                Simulated latent load, recorded in the decision log record.

            Returns
            -------
            Decision
        """
        if t_close is None:
            t_close = self._next_close if self._next_close is not None else self.stream_config.first_close
        t_close = float(t_close)
        start = self.clock() if self.clock is not None else None
        window = self.synchronizer.close_window_lossy(t_close)
        frames, channel_powers = raw_features(window, **self.feature_kwargs)
        normalized = self.norms.transform(frames)
        decision = self.evaluate(t_close, normalized, window.events_in_window, window.step_id, window.lossy)
        if start is not None:
            decision = replace(decision, latency_ms=(self.clock() - start) * 1000.)
        self._next_close = t_close + self.stream_config.cadence
        self.decisions.append(decision)
        if self.log is not None:
            self._write(window, normalized, channel_powers, decision, ground_truth)
        return decision

    def _write(self, window, normalized, channel_powers, decision, ground_truth):
        t = window.t_close
        rms = np.sqrt(np.mean(np.square(window.eeg), axis=0))
        self.log.append('eeg_summary', t, rows=int(window.eeg.shape[0]), dropped_samples=window.dropped_samples,
                        lossy=window.lossy, rms=rms.tolist())
        self.log.append('features', t, frames=normalized.tolist(), channel_powers=channel_powers.tolist(),
                        events=[e.to_dict() for e in window.events_in_window], step=window.step_id,
                        error_count=window.error_count, data_gap=window.lossy)
        record = decision.to_dict()
        del record['t']
        if ground_truth is not None:
            record['l'] = float(ground_truth)
        self.log.append('decision', t, **record)


def replay_decisions(log, model, config=EngineConfig(), adapt=None, thresholds=None, norms=None):
    """
    Recomputes the decisions of a session log from its features records.

        Parameters
        ----------
        log : SessionLog
        model : ModelBundle or ModelParams
        config : EngineConfig
        adapt : bool, optional
            Defaults to the policy declared in the log's meta record.

        Returns
        -------
        (recomputed decisions, list of (t, field, logged, recomputed) mismatches)
    """
    meta = log.meta
    if adapt is None:
        adapt = meta.get('policy', 'adaptive') != 'static'
    engine = AdaptiveEngine(model, thresholds, norms, config, adapt=adapt,
                            immediate_events=meta.get('immediate_events', False))
    logged = log.of_type('decision')
    recomputed = []
    mismatches = []
    for record, expected in zip(log.of_type('features'), logged):
        events = [TaskEvent.from_dict(e) for e in record['events']]
        decision = engine.evaluate(record['t'], record['frames'], events, record['step'], record['data_gap'])
        recomputed.append(decision)
        got = decision.to_dict()
        for key in ('L', 'probs', 'raw_state', 'stable_state', 'interventions', 'channel', 'data_gap'):
            if got[key] != expected.get(key):
                mismatches.append((record['t'], key, expected.get(key), got[key]))
    if len(logged) != len(recomputed):
        mismatches.append((None, 'count', len(logged), len(recomputed)))
    return recomputed, mismatches
