import logging
from dataclasses import replace

import numpy as np
from sklearn.utils import check_random_state

from .eeg import BandMixModel, EegGenerator
from .subject import SubjectProfile, nback_phase, relax
from .trainee import ERROR_TYPES, ErrorModel
from ..features.FeatureExtractor import WindowFeatureExtractor
from ..streams.StreamSynchronizer import StreamConfig, StreamSynchronizer
from ..streams.records import EegSample, EventKind, TaskEvent

logger = logging.getLogger(__name__)


class PhaseSimulator(object):
    """
        Continuous recording of a subject held at fixed latent targets, cut into
        aligned windows. One EEG generator and one synchronizer span all phases, so
        successive ``run`` calls form a single recording.

        Parameters
        ----------
        profile : SubjectProfile
        seed : int or RandomState
        stream_config : StreamConfig
        model : BandMixModel
        chunk_secs : float
            Latent-load update step.
        trial_secs : float
            Time between two trials of the working-memory task.
        error_model : ErrorModel
        expected_step_secs : float
            Scale of the randomized step-time context.

        Examples
        --------
        >>> sim = PhaseSimulator(seed=0)
        >>> windows = sim.run(0.3, 20.)
        >>> len(windows), windows[0].t_close, windows[-1].t_close
        (2, 2.0, 12.0)
    """

    def __init__(self, profile=SubjectProfile(), seed=None, stream_config=StreamConfig(), model=BandMixModel(),
                 chunk_secs=.25, trial_secs=2.5, error_model=ErrorModel(), expected_step_secs=60.):
        self.profile = profile
        self.rng = check_random_state(seed)
        self.stream_config = stream_config
        self.generator = EegGenerator(profile, self.rng.randint(np.iinfo(np.int32).max), model,
                                      stream_config.sample_rate)
        self.synchronizer = StreamSynchronizer(stream_config)
        self.chunk_secs = chunk_secs
        self.trial_secs = trial_secs
        self.error_model = error_model
        self.expected_step_secs = expected_step_secs
        self.l = None
        self.loads = []
        self.n_samples = 0

    @property
    def t(self):
        return self.generator.t

    def run(self, target, secs, stride=None, randomize_context=True, trials=True):
        """
            Holds the subject at ``target`` for ``secs`` seconds.

            Parameters
            ----------
            target : float
                Latent load target; the load starts there.
            secs : float
            stride : float, optional
                Seconds between window closes, defaults to the cadence. Closes fall at
                phase start + window_len + k * stride within the phase.
            randomize_context : bool
                Draw every window's difficulty level and step time from their runtime
                ranges instead of the protocol's constant context.
            trials : bool
                Run working-memory trials (with load-dependent errors); off for rest.

            Returns
            -------
            list of AlignedWindow; ``loads`` holds the latent load at each close.
        """
        cfg = self.stream_config
        stride = cfg.cadence if stride is None else stride
        fs = cfg.sample_rate
        start = self.t
        end = start + secs
        closes = list(start + cfg.window_len + stride * np.arange(int(np.floor((secs - cfg.window_len) / stride
                                                                               + 1e-9)) + 1))
        self.l = target
        next_trial = start + self.trial_secs
        windows = []
        n_total = int(round(secs * fs))
        chunk = max(1, int(round(self.chunk_secs * fs)))
        produced = 0
        while produced < n_total:
            n = min(chunk, n_total - produced)
            times, eeg = self.generator.generate(self.l, n)
            for t, x in zip(times.tolist(), eeg.tolist()):
                self.synchronizer.push_eeg(EegSample(t, tuple(x)))
            produced += n
            self.n_samples += n
            chunk_end = self.t
            while next_trial < chunk_end:
                if trials and self.rng.uniform() < self.error_model.probability(self.l):
                    error_type = ERROR_TYPES[self.rng.randint(3)]
                    self.synchronizer.push_event(TaskEvent(next_trial, EventKind.ERROR, 1, 1, 1,
                                                           error_type=error_type))
                next_trial += self.trial_secs
            while closes and closes[0] <= chunk_end + 1e-9:
                windows.append(self._close(closes.pop(0), start, randomize_context))
            self.l = relax(self.l, target, n / fs, self.profile.tau, self.rng)
        if closes:
            logger.debug("%d window closes beyond the phase end %r skipped", len(closes), end)
        return windows

    def _close(self, t_close, phase_start, randomize_context):
        window = self.synchronizer.close_window_lossy(t_close)
        # behavioral counters restart with the phase
        events = tuple(e for e in window.events_in_window if e.t > phase_start)
        if len(events) < len(window.events_in_window):
            window = replace(window, events_in_window=events,
                             error_count=sum(1 for e in events if e.kind is EventKind.ERROR))
        self.loads.append(self.l)
        if randomize_context:
            window = replace(window, difficulty=int(self.rng.randint(1, 6)),
                             step_elapsed=float(self.rng.uniform(0., 2. * self.expected_step_secs)))
        return window


LOAD_TARGETS = (nback_phase(1), .5, None)


def make_load_classification(n_per_class=200, profile=SubjectProfile(), seed=None, stride=2.,
                             stream_config=StreamConfig(), return_extractor=False):
    """
    Labeled feature sequences of a simulated subject held at low (1-back), mid-range
    and high (3-back) load, normalized over the whole set.

        Parameters
        ----------
        n_per_class : int
        profile : SubjectProfile
        seed : int or RandomState
        stride : float
            Seconds between consecutive windows of one class.
        stream_config : StreamConfig
        return_extractor : bool
            Also return the fitted WindowFeatureExtractor.

        Returns
        -------
        X : array, shape (3 * n_per_class, 5, 8)
        y : array, shape (3 * n_per_class,), 0 = low, 1 = optimal, 2 = high

        Examples
        --------
        >>> X, y = make_load_classification(n_per_class=10, seed=0)
        >>> X.shape, y.tolist().count(2)
        ((30, 5, 8), 10)
    """
    sim = PhaseSimulator(profile, seed, stream_config)
    secs = stream_config.window_len + (n_per_class - 1) * stride
    windows, labels = [], []
    for label, target in enumerate(LOAD_TARGETS):
        target = nback_phase(3, profile) if target is None else target
        phase = sim.run(target, secs, stride)
        windows.extend(phase)
        labels.extend([label] * len(phase))
    extractor = WindowFeatureExtractor(sample_rate=stream_config.sample_rate).fit(windows)
    X, y = extractor.transform(windows), np.asarray(labels)
    return (X, y, extractor) if return_extractor else (X, y)
