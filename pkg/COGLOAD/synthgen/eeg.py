import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter
from sklearn.utils import check_random_state

from .subject import SubjectProfile
from ..streams.records import EegSample, N_CHANNELS

logger = logging.getLogger(__name__)

# 1/f shaping filter for white gaussian input
PINK_B = np.array([0.049922035, -0.095993537, 0.050612699, -0.004408786])
PINK_A = np.array([1., -2.494956002, 2.017265875, -0.522189400])


def _pink_gain(n=1 << 14):
    impulse = np.zeros(n)
    impulse[0] = 1.
    return float(np.sqrt(np.sum(lfilter(PINK_B, PINK_A, impulse) ** 2)))


PINK_GAIN = _pink_gain()

# oscillator frequencies are drawn inside these ranges so that their Hann leakage stays in band
OSCILLATOR_RANGES = ((4.5, 6.5), (9., 12.), (16., 28.), (33., 47.))


@dataclass(frozen=True)
class BandMixModel:
    """
        Band oscillator amplitudes and their coupling to the latent load.

        Parameters
        ----------
        theta, alpha, beta, gamma : float
            Base amplitudes in microvolts.
        k_theta, k_alpha : float
            Fractional amplitude change at l = 1, scaled by the subject reactivity.

        Examples
        --------
        >>> import numpy as np
        >>> np.round(BandMixModel().amplitudes(1., 1.), 6).tolist()
        [10.8, 4.0, 4.0, 2.0]
    """
    theta: float = 6.
    alpha: float = 10.
    beta: float = 4.
    gamma: float = 2.
    k_theta: float = .8
    k_alpha: float = -.6

    def amplitudes(self, l, reactivity):
        """Per-band amplitudes, shape (..., 4), for scalar or array loads."""
        l = np.asarray(l, dtype=np.float64)
        theta = self.theta * (1. + self.k_theta * reactivity * l)
        alpha = self.alpha * (1. + self.k_alpha * reactivity * l)
        beta = np.full_like(l, self.beta)
        gamma = np.full_like(l, self.gamma)
        return np.maximum(np.stack([theta, alpha, beta, gamma], axis=-1), 0.)


class EegGenerator(object):
    """
        Stateful 14-channel EEG source: per channel and band one sinusoid with the
        amplitude set by the latent load, plus pink noise. Oscillators and noise filter
        states carry over between calls so consecutive blocks form one continuous signal.

        Parameters
        ----------
        profile : SubjectProfile
            Its seed fixes the channel frequencies and phases.
        seed : int or RandomState
            Drives the background noise.
        model : BandMixModel
        sample_rate : float
        t0 : float
            Timestamp of the first sample.

        Examples
        --------
        >>> gen = EegGenerator(SubjectProfile(), seed=0)
        >>> t, x = gen.generate(0.5, 256)
        >>> x.shape, float(t[1])
        ((256, 14), 0.0078125)
    """

    def __init__(self, profile=SubjectProfile(), seed=None, model=BandMixModel(), sample_rate=128., t0=0.):
        self.profile = profile
        self.model = model
        self.sample_rate = float(sample_rate)
        layout = check_random_state(profile.seed)
        self.freqs = np.column_stack([layout.uniform(lo, hi, N_CHANNELS) for lo, hi in OSCILLATOR_RANGES])
        self.phases = layout.uniform(0., 2 * np.pi, (N_CHANNELS, len(OSCILLATOR_RANGES)))
        self._rng = check_random_state(seed)
        self._n = 0
        self.t0 = float(t0)
        # warm-up so the first samples are not transient
        _, self._zi = lfilter(PINK_B, PINK_A, self._rng.normal(size=(N_CHANNELS, 1024)), axis=1,
                              zi=np.zeros((N_CHANNELS, len(PINK_A) - 1)))

    @property
    def t(self):
        """Timestamp of the next sample."""
        return self.t0 + self._n / self.sample_rate

    def generate(self, l, n_samples):
        """
            Produces the next n_samples samples.

            Parameters
            ----------
            l : float or array-like, shape (n_samples,)
                Latent load, constant or per sample.
            n_samples : int

            Returns
            -------
            (t, eeg): timestamps of shape (n_samples,) and microvolts of shape (n_samples, 14)
        """
        index = self._n + np.arange(n_samples)
        t = self.t0 + index / self.sample_rate
        l = np.broadcast_to(np.asarray(l, dtype=np.float64), (n_samples,))
        amplitudes = self.model.amplitudes(l, self.profile.reactivity)
        # (n, channel, band)
        waves = np.sin(2 * np.pi * self.freqs[None] * (index / self.sample_rate)[:, None, None] + self.phases[None])
        signal = np.einsum('nb,ncb->nc', amplitudes, waves)
        white = self._rng.normal(size=(N_CHANNELS, n_samples))
        pink, self._zi = lfilter(PINK_B, PINK_A, white, axis=1, zi=self._zi)
        signal += self.profile.noise_level / PINK_GAIN * pink.T
        self._n += n_samples
        return t, signal

    def samples(self, l, n_samples):
        """Same as ``generate`` but yields EegSample objects."""
        t, x = self.generate(l, n_samples)
        for ti, xi in zip(t.tolist(), x.tolist()):
            yield EegSample(ti, tuple(xi))


def gen_eeg(l, secs, profile=SubjectProfile(), seed=None, model=BandMixModel(), sample_rate=128.):
    """
    Generates secs seconds of synthetic EEG at a latent load.

        Parameters
        ----------
        l : float or array-like
            Latent load, constant or one value per sample.
        secs : float
        profile : SubjectProfile
        seed : int, optional
            Noise seed; identical seeds give identical streams.
        model : BandMixModel
        sample_rate : float

        Returns
        -------
        (t, eeg) with shapes (n,) and (n, 14), n = round(secs * sample_rate)
    """
    n = int(round(secs * sample_rate))
    return EegGenerator(profile, seed, model, sample_rate).generate(l, n)
