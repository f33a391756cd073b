import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import stats
from sklearn.model_selection import train_test_split

from ..features.FeatureExtractor import (BEHAVIORAL_FEATURES, FEATURE_NAMES, NormStats,
                                         raw_features)
from ..lstm.LSTMClassifier import TrainConfig, train
from ..lstm.model_io import ModelBundle, Thresholds
from ..lstm.network import N_CLASSES, forward, load_score
from ..streams.StreamSynchronizer import StreamConfig
from ..synthgen.phases import PhaseSimulator
from ..synthgen.subject import SubjectProfile, nback_phase
from ..utils.exceptions import CalibrationError

logger = logging.getLogger(__name__)

PHASES = ('rest', 'oneback', 'threeback', 'synthetic_optimal')
PHASE_LABELS = {'rest': 0, 'oneback': 0, 'threeback': 2, 'synthetic_optimal': 1}
DEGENERATE_P_VALUE = 1e-3


@dataclass(frozen=True)
class CalibrationPlan:
    """
        Durations of the calibration phases in seconds.

        Parameters
        ----------
        rest_secs, oneback_secs, threeback_secs : float
            Rest, 1-back and 3-back recordings.
        optimal_secs : float
            Mid-range load recording supplying the optimal class.
        optimal_target : float
            Latent load of that recording.
        stride : float or None
            Seconds between consecutive windows; None uses the stream cadence.
    """
    rest_secs: float = 60.
    oneback_secs: float = 120.
    threeback_secs: float = 120.
    optimal_secs: float = 120.
    optimal_target: float = .5
    stride: Optional[float] = 2.

    def __post_init__(self):
        for name in ('rest_secs', 'oneback_secs', 'threeback_secs', 'optimal_secs'):
            if getattr(self, name) <= 0:
                raise ValueError("%s should be positive, %r was passed" % (name, getattr(self, name)))
        if self.stride is not None and self.stride <= 0:
            raise ValueError("stride should be positive, %r was passed" % self.stride)

    def phase_secs(self, phase):
        return {'rest': self.rest_secs, 'oneback': self.oneback_secs, 'threeback': self.threeback_secs,
                'synthetic_optimal': self.optimal_secs}[phase]

    @property
    def nback_secs(self):
        return self.rest_secs + self.oneback_secs + self.threeback_secs


@dataclass(frozen=True, eq=False)
class LabeledSegment:
    """
        Windows of one calibration phase.

        ``features`` holds the unnormalized (n_windows, 5, 8) matrices, ``loads`` the
        simulator's latent load at every close and ``n_samples`` the EEG samples recorded.
    """
    phase: str
    windows: Tuple
    label: int
    features: np.ndarray
    loads: Tuple[float, ...] = ()
    n_samples: int = 0

    def __post_init__(self):
        if PHASE_LABELS[self.phase] != self.label:
            raise ValueError("Phase %r is labeled %r, %r was passed" % (self.phase, PHASE_LABELS[self.phase],
                                                                       self.label))

    def __len__(self):
        return len(self.windows)


def _phase_target(phase, subject, plan):
    if phase == 'rest':
        return nback_phase('rest', subject)
    if phase == 'oneback':
        return nback_phase(1, subject)
    if phase == 'threeback':
        return nback_phase(3, subject)
    return plan.optimal_target


def run_calibration(subject=SubjectProfile(), plan=CalibrationPlan(), seed=None, stream_config=StreamConfig(),
                    feature_kwargs=None, check_degenerate=True):
    """
    Records rest, 1-back and 3-back phases plus a mid-range load phase from a simulated
    subject as one continuous 128 Hz recording and labels their windows.

        Parameters
        ----------
        subject : SubjectProfile
        plan : CalibrationPlan
        seed : int, optional
        stream_config : StreamConfig
        feature_kwargs : dict, optional
            Geometry forwarded to ``raw_features``.
        check_degenerate : bool
            Reject subjects whose 1-back and 3-back EEG features cannot be told apart.

        Returns
        -------
        list of LabeledSegment in rest, oneback, threeback, synthetic_optimal order

        Raises
        ------
        CalibrationError
            ``subject_degenerate`` when neither theta nor alpha power differ between the
            1-back and 3-back windows (two-sample t-test at p < 1e-3).
    """
    feature_kwargs = dict(feature_kwargs or {})
    feature_kwargs.setdefault('sample_rate', stream_config.sample_rate)
    sim = PhaseSimulator(subject, seed, stream_config)
    segments = []
    for phase in PHASES:
        before, loads_before = sim.n_samples, len(sim.loads)
        windows = sim.run(_phase_target(phase, subject, plan), plan.phase_secs(phase), plan.stride,
                          trials=phase != 'rest')
        features = np.stack([raw_features(w, **feature_kwargs)[0] for w in windows]) if windows else \
            np.empty((0, 0, len(FEATURE_NAMES)))
        segments.append(LabeledSegment(phase, tuple(windows), PHASE_LABELS[phase], features,
                                       tuple(sim.loads[loads_before:]), sim.n_samples - before))
        logger.debug("Calibration phase %s: %d windows", phase, len(windows))
    if check_degenerate:
        _check_degenerate(segments)
    return segments


def _segment(segments, phase):
    for segment in segments:
        if segment.phase == phase:
            return segment
    raise CalibrationError('empty_segment', "No %s segment" % phase)


def _check_degenerate(segments):
    low, high = _segment(segments, 'oneback'), _segment(segments, 'threeback')
    if len(low) < 2 or len(high) < 2:
        raise CalibrationError('empty_segment', "Too few 1-back/3-back windows to compare (%d, %d)"
                               % (len(low), len(high)))
    p_values = []
    for column in (FEATURE_NAMES.index('theta_p'), FEATURE_NAMES.index('alpha_p')):
        a = low.features[:, :, column].mean(axis=1)
        b = high.features[:, :, column].mean(axis=1)
        p_values.append(stats.ttest_ind(a, b, equal_var=False).pvalue)
    p = np.nanmin(p_values) if not np.all(np.isnan(p_values)) else 1.
    if p >= DEGENERATE_P_VALUE:
        raise CalibrationError('subject_degenerate', "1-back and 3-back EEG are indistinguishable (p = %.3g)" % p)


def baseline_stats(rest_segment):
    """
    Per-feature population mean and std over the rest windows, std floored at 1e-6.

        Parameters
        ----------
        rest_segment : LabeledSegment or array-like, shape (n_windows, n_frames, 8)

        Returns
        -------
        NormStats
    """
    features = np.asarray(getattr(rest_segment, 'features', rest_segment), dtype=np.float64)
    if features.size == 0:
        raise CalibrationError('empty_segment', "The rest segment holds no windows")
    return NormStats.fit(features)


def calibration_norms(segments):
    """
    Normalization used at run time: EEG columns from the rest baseline, behavioral
    columns pooled over every calibration window.
    """
    rest = baseline_stats(_segment(segments, 'rest'))
    pooled = NormStats.fit(np.concatenate([s.features for s in segments if len(s)]))
    mean, std = rest.mean.copy(), rest.std.copy()
    mean[BEHAVIORAL_FEATURES] = pooled.mean[BEHAVIORAL_FEATURES]
    std[BEHAVIORAL_FEATURES] = pooled.std[BEHAVIORAL_FEATURES]
    return NormStats(mean, std)


def build_dataset(segments, val_fraction=.2, seed=0, norms=None, min_per_class=2):
    """
    Stratified, seeded train/validation split of the labeled calibration windows.

        Parameters
        ----------
        segments : list of LabeledSegment
        val_fraction : float
        seed : int
        norms : NormStats, optional
            Applied to the features; raw features are returned without it.
        min_per_class : int
            Every class needs at least this many windows (and two for stratification).

        Returns
        -------
        (X_train, y_train, X_val, y_val)

        Raises
        ------
        CalibrationError
            ``too_few_samples`` when a class has fewer windows than required.
    """
    X = np.concatenate([s.features for s in segments if len(s)])
    y = np.concatenate([np.full(len(s), s.label) for s in segments if len(s)]).astype(int)
    counts = np.bincount(y, minlength=N_CLASSES)
    if np.any(counts < max(min_per_class, 2)):
        raise CalibrationError('too_few_samples', "Windows per class %r, at least %d required"
                               % (counts.tolist(), max(min_per_class, 2)))
    if norms is not None:
        X = norms.transform(X)
    X_train, X_val, y_train, y_val = train_test_split(X, y, test_size=val_fraction, random_state=seed,
                                                      stratify=y)
    return X_train, y_train, X_val, y_val


def segment_scores(params, segment, norms):
    """Load score of every window of a segment."""
    if len(segment) == 0:
        raise CalibrationError('empty_segment', "The %s segment holds no windows" % segment.phase)
    return load_score(forward(norms.transform(segment.features), params, mode='eval'))


def derive_thresholds(params, segments, norms, fallback=(.33, .66)):
    """
    T_low = 75th percentile of L over the 1-back windows, T_high = 25th percentile over
    the 3-back windows; when they do not satisfy 0 < T_low < T_high < 1 the fallback is
    returned with ``weak=True``.

        Returns
        -------
        Thresholds
    """
    low = segment_scores(params, _segment(segments, 'oneback'), norms)
    high = segment_scores(params, _segment(segments, 'threeback'), norms)
    t_low, t_high = float(np.percentile(low, 75)), float(np.percentile(high, 25))
    if 0. < t_low < t_high < 1.:
        return Thresholds(t_low, t_high)
    logger.warning("calibration_weak: T_low=%.4f >= T_high=%.4f, falling back to %r", t_low, t_high, fallback)
    return Thresholds(fallback[0], fallback[1], weak=True)


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    bundle: ModelBundle
    segments: list
    history: list
    report: dict = field(default_factory=dict)

    @property
    def thresholds(self):
        return self.bundle.thresholds


def calibrate(subject=SubjectProfile(), plan=CalibrationPlan(), seed=0, train_config=None,
              stream_config=StreamConfig(), fallback=(.33, .66), feature_kwargs=None, log=None, verbose=False):
    """
    Full per-subject calibration: record the phases, fit the normalization, train the
    classifier and derive the thresholds.

        Parameters
        ----------
        subject : SubjectProfile
        plan : CalibrationPlan
        seed : int
            Seeds the recording; training uses ``train_config.seed``.
        train_config : TrainConfig, optional
        stream_config : StreamConfig
        fallback : tuple
            Thresholds used when calibration is weak.
        feature_kwargs : dict, optional
        log : SessionLog, optional
            Receives train_epoch records and the calibration_report record.
        verbose : bool

        Returns
        -------
        CalibrationResult
    """
    cfg = train_config if train_config is not None else TrainConfig()
    segments = run_calibration(subject, plan, seed, stream_config, feature_kwargs)
    norms = calibration_norms(segments)
    X_train, y_train, X_val, y_val = build_dataset(segments, cfg.val_fraction, cfg.seed, norms, cfg.min_per_class)
    params, history = train(X_train, y_train, cfg, X_val, y_val, verbose=verbose)
    thresholds = derive_thresholds(params, segments, norms, fallback)
    medians = {s.phase: float(np.median(segment_scores(params, s, norms))) for s in segments if len(s)}
    last = history[-1] if history else {}
    best = min(history, key=lambda h: h['val_loss']) if history else {}
    report = {
        'thresholds': thresholds.to_dict(),
        'weak': thresholds.weak,
        'median_L': medians,
        'train_acc': best.get('train_acc'),
        'val_acc': best.get('val_acc'),
        'epochs': last.get('epoch', 0),
        'windows': {s.phase: len(s) for s in segments},
        'norms': norms.to_dict(),
        'subject': asdict(subject),
    }
    if log is not None:
        for h in history:
            log.append('train_epoch', float(h['epoch']), **h)
        log.append('calibration_report', float(plan.nback_secs + plan.optimal_secs), **report)
    logger.info("Calibration done: T_low=%.4f T_high=%.4f weak=%s val_acc=%s", thresholds.t_low,
                thresholds.t_high, thresholds.weak, report['val_acc'])
    return CalibrationResult(ModelBundle(params, thresholds, norms), segments, history, report)
