from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .spectral import DEFAULT_BANDS, band_power, psd, spectral_entropy, theta_alpha_ratio
from ..utils.functions import clamp

FEATURE_NAMES = ('theta_p', 'alpha_p', 'beta_p', 'ta_ratio', 'spec_entropy',
                 'error_count', 'step_time_norm', 'difficulty_norm')
N_FEATURES = len(FEATURE_NAMES)
EEG_FEATURES = slice(0, 5)
BEHAVIORAL_FEATURES = slice(5, 8)
STD_FLOOR = 1e-6
MAX_STEP_TIME_NORM = 4.


@dataclass(frozen=True)
class FeatureFrame:
    theta_p: float
    alpha_p: float
    beta_p: float
    ta_ratio: float
    spec_entropy: float
    error_count: float
    step_time_norm: float
    difficulty_norm: float

    def to_array(self):
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class FeatureSequence:
    """Ordered (n_frames, 8) feature matrix of one window; columns follow FEATURE_NAMES."""
    frames: np.ndarray
    t_close: float

    def __len__(self):
        return self.frames.shape[0]

    def frame(self, index):
        return FeatureFrame(*(float(v) for v in self.frames[index]))


@dataclass(frozen=True, eq=False)
class NormStats:
    """
        Per-feature z-scoring statistics. ``std`` is floored at 1e-6.

        Examples
        --------
        >>> import numpy as np
        >>> stats = NormStats.fit(np.array([[1.] * 8, [3.] * 8]))
        >>> float(stats.mean[0]), float(stats.std[0])
        (2.0, 1.0)
    """
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'mean', np.asarray(self.mean, dtype=np.float64).reshape(N_FEATURES))
        object.__setattr__(self, 'std', np.maximum(np.asarray(self.std, dtype=np.float64).reshape(N_FEATURES),
                                                   STD_FLOOR))

    @classmethod
    def fit(cls, X):
        """Population mean/std over every frame of X, shape (..., 8)."""
        X = np.asarray(X, dtype=np.float64).reshape(-1, N_FEATURES)
        return cls(X.mean(axis=0), X.std(axis=0))

    @classmethod
    def identity(cls):
        return cls(np.zeros(N_FEATURES), np.ones(N_FEATURES))

    def transform(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std

    def to_dict(self):
        return {'mean': self.mean.tolist(), 'std': self.std.tolist()}


def behavioral_features(window, expected_step_secs=60.):
    """
    Behavioral triplet of a window.

        Parameters
        ----------
        window : AlignedWindow
        expected_step_secs : float
            Nominal duration of a task step in seconds.

        Returns
        -------
        (error_count, step_time_norm, difficulty_norm) where step_time_norm is the
        elapsed step time over expected_step_secs clamped to [0, 4] and
        difficulty_norm = (level - 1) / 4.
    """
    step_time_norm = clamp(window.step_elapsed / expected_step_secs, 0., MAX_STEP_TIME_NORM)
    return int(window.error_count), float(step_time_norm), (window.difficulty - 1) / 4.


def subframe_starts(n_rows, sample_rate, subframe_len=1., hop=.25):
    length = int(round(subframe_len * sample_rate))
    step = int(round(hop * sample_rate))
    if length > n_rows or step <= 0:
        raise ValueError("Sub-frames of %r s with hop %r s do not fit %d rows" % (subframe_len, hop, n_rows))
    return np.arange(0, n_rows - length + 1, step), length


def channel_band_powers(window, sample_rate=128., subframe_len=1., hop=.25, bands=DEFAULT_BANDS):
    """
    Per-sub-frame, per-channel band powers of a window.

        Returns
        -------
        (powers, spectra) where powers has shape (n_frames, n_channels, 4) in
        theta/alpha/beta/gamma order and spectra is the Psd of every sub-frame/channel.
    """
    starts, length = subframe_starts(window.eeg.shape[0], sample_rate, subframe_len, hop)
    frames = np.stack([window.eeg[s:s + length].T for s in starts])
    spectra = psd(frames, sample_rate)
    powers = np.stack([band_power(spectra, band) for _, band in bands.items()], axis=-1)
    return powers, spectra


def raw_features(window, sample_rate=128., subframe_len=1., hop=.25, bands=DEFAULT_BANDS,
                 entropy_range=(4., 50.), expected_step_secs=60.):
    """
    Unnormalized feature matrix of a window.

        Returns
        -------
        (frames, channel_powers): frames has shape (n_frames, 8); channel_powers
        (n_channels, 4) are the per-channel band powers averaged over sub-frames,
        gamma included, kept for the session log.
    """
    powers, spectra = channel_band_powers(window, sample_rate, subframe_len, hop, bands)
    mean_powers = powers.mean(axis=1)
    # channel-averaged spectrum for the entropy
    entropy = spectral_entropy(type(spectra)(spectra.freqs, spectra.power.mean(axis=1), spectra.resolution),
                               entropy_range)
    theta, alpha, beta = mean_powers[:, 0], mean_powers[:, 1], mean_powers[:, 2]
    behavior = np.array(behavioral_features(window, expected_step_secs), dtype=np.float64)
    frames = np.column_stack([theta, alpha, beta, theta_alpha_ratio(theta, alpha), entropy,
                              np.tile(behavior, (theta.shape[0], 1))])
    return frames, powers.mean(axis=0)


def feature_sequence(window, norms, **kwargs):
    """
    Builds the model input of a window: sub-frames of 1.0 s with 0.25 s hop, per
    sub-frame channel-averaged theta/alpha/beta power, theta/alpha ratio and spectral
    entropy, followed by the window's behavioral triplet; all z-scored with norms.

        Parameters
        ----------
        window : AlignedWindow
        norms : NormStats
        **kwargs :
            Geometry forwarded to ``raw_features``.

        Returns
        -------
        FeatureSequence
    """
    frames, _ = raw_features(window, **kwargs)
    return FeatureSequence(frames=norms.transform(frames), t_close=window.t_close)


class WindowFeatureExtractor(TransformerMixin, BaseEstimator):
    """
        Transformer mapping aligned windows to normalized (n_windows, n_frames, 8) arrays.
        ``fit`` learns the NormStats.

        Parameters
        ----------
        sample_rate : float
        subframe_len : float
            Sub-frame length in seconds.
        hop : float
            Sub-frame hop in seconds.
        bands : BandDefs
        entropy_range : tuple
        expected_step_secs : float
    """

    def __init__(self, sample_rate=128., subframe_len=1., hop=.25, bands=DEFAULT_BANDS,
                 entropy_range=(4., 50.), expected_step_secs=60.):
        self.sample_rate = sample_rate
        self.subframe_len = subframe_len
        self.hop = hop
        self.bands = bands
        self.entropy_range = entropy_range
        self.expected_step_secs = expected_step_secs

    def _geometry(self):
        return dict(sample_rate=self.sample_rate, subframe_len=self.subframe_len, hop=self.hop,
                    bands=self.bands, entropy_range=self.entropy_range,
                    expected_step_secs=self.expected_step_secs)

    def raw_transform(self, windows):
        return np.stack([raw_features(w, **self._geometry())[0] for w in windows])

    def fit(self, windows, y=None):
        self.norms_ = NormStats.fit(self.raw_transform(windows))
        return self

    def transform(self, windows):
        return self.norms_.transform(self.raw_transform(windows))

    def sequence(self, window):
        return feature_sequence(window, self.norms_, **self._geometry())
