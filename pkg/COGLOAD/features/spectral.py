import logging
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
from scipy.signal import periodogram

from ..utils.exceptions import SignalError
from ..utils.information_theory import normalized_entropy

logger = logging.getLogger(__name__)

RATIO_EPS = 1e-9
MIN_LENGTH = 32


class Band(namedtuple('Band', ['lo', 'hi', 'closed'])):
    """
        A frequency band in Hz. ``closed`` is one of 'left' (lo <= f < hi), 'right'
        (lo < f <= hi) or 'both' (lo <= f <= hi).
    """
    __slots__ = ()

    def __new__(cls, lo, hi, closed='left'):
        if closed not in ('left', 'right', 'both'):
            raise KeyError("closed should be 'left', 'right' or 'both', %r was passed" % closed)
        return super(Band, cls).__new__(cls, float(lo), float(hi), closed)

    def mask(self, freqs):
        lower = freqs >= self.lo if self.closed in ('left', 'both') else freqs > self.lo
        upper = freqs <= self.hi if self.closed in ('right', 'both') else freqs < self.hi
        return lower & upper


@dataclass(frozen=True)
class BandDefs:
    """
        The EEG bands. The shared 30 Hz bin belongs to beta; gamma is the top band
        and includes its upper edge.
    """
    theta: Band = Band(4., 7., 'left')
    alpha: Band = Band(8., 13., 'left')
    beta: Band = Band(14., 30., 'both')
    gamma: Band = Band(30., 50., 'right')

    def items(self):
        return (('theta', self.theta), ('alpha', self.alpha), ('beta', self.beta), ('gamma', self.gamma))

    @classmethod
    def from_dict(cls, d):
        """Builds band definitions from ``{'theta': [4, 7], ...}`` keeping the default edge closure."""
        default = cls()
        kwargs = {}
        for name, (lo, hi) in d.items():
            if not hasattr(default, name):
                raise KeyError("No %r band" % name)
            if not 0. <= lo < hi:
                raise ValueError("Band %r needs 0 <= lo < hi, (%r, %r) was passed" % (name, lo, hi))
            kwargs[name] = Band(lo, hi, getattr(default, name).closed)
        return cls(**kwargs)


DEFAULT_BANDS = BandDefs()


@dataclass(frozen=True, eq=False)
class Psd:
    """
        One-sided power spectrum; ``power[..., k]`` is the power (microvolts^2) of bin
        ``freqs[k]``. Summed over bins it equals the window-compensated mean square of
        the input.
    """
    freqs: np.ndarray
    power: np.ndarray
    resolution: float

    @property
    def total(self):
        return self.power.sum(axis=-1)


def psd(samples, sample_rate):
    """
    Hann-windowed periodogram along the last axis, scaled so that the bins sum to the
    mean square of the input (window power compensation).

        Parameters
        ----------
        samples : array-like, shape (..., n_samples)
            Signal in microvolts, at least 32 samples long.
        sample_rate : float
            Sampling rate in Hz.

        Returns
        -------
        Psd with resolution sample_rate / n_samples

        Examples
        --------
        >>> import numpy as np
        >>> t = np.arange(128) / 128.
        >>> spectrum = psd(10 * np.sin(2 * np.pi * 10 * t), 128.)
        >>> round(float(spectrum.total), 6), spectrum.resolution
        (50.0, 1.0)
    """
    x = np.asarray(samples, dtype=np.float64)
    n = x.shape[-1] if x.ndim else 0
    if n < MIN_LENGTH:
        raise SignalError('too_short', "psd needs at least %d samples, %d were passed" % (MIN_LENGTH, n))
    if not np.all(np.isfinite(x)):
        raise SignalError('non_finite', "psd input contains NaN or infinite values")
    freqs, density = periodogram(x, fs=sample_rate, window='hann', detrend=False,
                                 scaling='density', return_onesided=True, axis=-1)
    resolution = float(sample_rate) / n
    return Psd(freqs=freqs, power=density * resolution, resolution=resolution)


def band_power(spectrum, band):
    """
    Sums the bins of a band.

        Parameters
        ----------
        spectrum : Psd
        band : Band or (lo, hi)
            A plain pair is treated as lo <= f < hi.

        Returns
        -------
        Band power in microvolts^2, shape spectrum.power.shape[:-1]
    """
    if not isinstance(band, Band):
        band = Band(*band)
    nyquist = spectrum.freqs[-1] if spectrum.freqs.size else 0.
    if band.lo < 0 or band.hi <= band.lo or band.hi > nyquist + spectrum.resolution / 2:
        raise SignalError('bad_band', "Band %r outside [0, %r] Hz" % (tuple(band[:2]), nyquist))
    return spectrum.power[..., band.mask(spectrum.freqs)].sum(axis=-1)


def band_powers(spectrum, bands=DEFAULT_BANDS):
    """Returns {band name: power} for all bands of a BandDefs."""
    return dict((name, band_power(spectrum, band)) for name, band in bands.items())


def theta_alpha_ratio(theta_p, alpha_p):
    """
    Theta over alpha power, with the denominator clamped at 1e-9 microvolts^2.

        Examples
        --------
        >>> float(theta_alpha_ratio(50., 25.))
        2.0
    """
    theta_p = np.asarray(theta_p, dtype=np.float64)
    alpha_p = np.asarray(alpha_p, dtype=np.float64)
    if np.any(theta_p < 0) or np.any(alpha_p < 0):
        raise ValueError("Band powers should be non-negative")
    return theta_p / np.maximum(alpha_p, RATIO_EPS)


def spectral_entropy(spectrum, f_range=(4., 50.)):
    """
    Normalized Shannon entropy of the power distribution over the bins in f_range
    (both edges included): 0 for a single-bin concentration, 1 for a flat spectrum.
    A spectrum without power in the range scores 1.

        Parameters
        ----------
        spectrum : Psd
        f_range : (lo, hi)
            Frequency range in Hz.

        Returns
        -------
        Entropy in [0, 1], shape spectrum.power.shape[:-1]
    """
    mask = Band(f_range[0], f_range[1], 'both').mask(spectrum.freqs)
    if mask.sum() < 2:
        raise SignalError('too_short', "spectral entropy needs at least 2 bins in %r Hz" % (tuple(f_range),))
    p = spectrum.power[..., mask]
    total = p.sum(axis=-1, keepdims=True)
    empty = total[..., 0] <= 0
    if np.any(empty):
        logger.warning("Zero power in %r Hz for %d spectra, entropy set to 1", tuple(f_range), int(np.sum(empty)))
    safe = np.where(total > 0, p, 1.)
    return np.clip(np.where(empty, 1., normalized_entropy(safe, axis=-1)), 0., 1.)
