import logging
import math
import threading
from bisect import bisect_left, bisect_right
from collections import Counter
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .records import (ACCEPTED, N_CHANNELS, DropReason, EegSample, EventKind, PushResult, TaskEvent,
                      normalize_event, validate_event, validate_sample)
from ..utils.data_check import check_positive
from ..utils.exceptions import InsufficientDataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StreamConfig:
    """
        Geometry of the synchronized streams.

        Parameters
        ----------
        sample_rate : float
            EEG sampling rate in Hz.
        window_len : float
            Length in seconds of the EEG slice handed to feature extraction.
        cadence : float
            Seconds between two window closes; behavioral aggregates span one cadence.
        reorder_horizon : float
            Samples older than the newest accepted timestamp minus this horizon are dropped.
        skew_tolerance : float
            Maximal distance in seconds between a grid row and the sample that fills it.
        max_missing_fraction : float
            Fraction of missing grid rows above which a window is insufficient.
    """
    sample_rate: float = 128.
    window_len: float = 2.
    cadence: float = 10.
    reorder_horizon: float = 0.5
    skew_tolerance: float = 0.05
    max_missing_fraction: float = 0.25

    def __post_init__(self):
        check_positive(self.sample_rate, 'sample_rate')
        check_positive(self.window_len, 'window_len')
        check_positive(self.cadence, 'cadence')
        if self.reorder_horizon < 0 or self.skew_tolerance < 0:
            raise ValueError("reorder_horizon and skew_tolerance should be non-negative")

    @property
    def n_rows(self):
        return int(math.ceil(self.window_len * self.sample_rate - 1e-9))

    @property
    def first_close(self):
        return max(self.window_len, self.cadence)


@dataclass(frozen=True, eq=False)
class AlignedWindow:
    """
        An immutable synchronized analysis window.

        ``eeg`` has one row per nominal grid instant
        ``t_close - window_len + k / sample_rate``; rows without a matching sample are
        zeros and counted in ``dropped_samples``. ``sample_times`` holds the timestamp
        of the sample used for each row (NaN for zero-filled rows). Behavioral
        aggregates cover ``(t_close - cadence, t_close]``.
    """
    t_close: float
    eeg: np.ndarray
    events_in_window: Tuple[TaskEvent, ...]
    error_count: int
    step_elapsed: float
    difficulty: int
    dropped_samples: int
    sample_times: np.ndarray = field(repr=False, default=None)
    step_id: int = 1
    module_id: int = 1
    lossy: bool = False


def align_clocks(eeg_t0, event_t0):
    """
    Constant offset mapping the event clock onto the EEG clock.

        Examples
        --------
        >>> align_clocks(0., 0.)
        0.0
        >>> round(align_clocks(100.0, 100.2), 9)
        -0.2
    """
    return float(eeg_t0) - float(event_t0)


class _Accounting(object):

    def __init__(self):
        self.pushed = 0
        self.accepted = 0
        self.reasons = Counter()

    def record(self, result):
        self.pushed += 1
        if result.accepted:
            self.accepted += 1
        else:
            self.reasons[result.reason.value] += 1
        return result

    def as_dict(self):
        return {'pushed': self.pushed, 'accepted': self.accepted,
                'dropped': sum(self.reasons.values()), 'reasons': dict(self.reasons)}


class StreamSynchronizer(object):
    """
        Ingests the EEG and task-event streams, restores timestamp order within the
        reorder horizon and cuts aligned analysis windows.

        All public methods are serialized by an internal lock, so one producer per
        stream and a consumer may call them from different threads.

        Parameters
        ----------
        config : StreamConfig, optional
            Stream geometry, defaults to ``StreamConfig()``.
        event_offset : float, optional
            Constant offset added to every event timestamp (see ``align_clocks``).

        Examples
        --------
        >>> from COGLOAD.streams import StreamSynchronizer, EegSample
        >>> sync = StreamSynchronizer()
        >>> for k in range(1280):
        ...     _ = sync.push_eeg(EegSample(k / 128., (0.,) * 14))
        >>> w = sync.close_window(10.)
        >>> w.eeg.shape, w.dropped_samples
        ((256, 14), 0)
    """

    def __init__(self, config=None, event_offset=0.):
        self.config = config if config is not None else StreamConfig()
        self.event_offset = float(event_offset)
        self._lock = threading.RLock()
        self._eeg_t = []
        self._eeg_x = []
        self._eeg_released = 0
        self._newest_eeg = -math.inf
        self._ev_t = []
        self._events = []
        self._newest_event = -math.inf
        self._context = None
        self._step_starts = []
        self._eeg_acc = _Accounting()
        self._ev_acc = _Accounting()
        retention = max(self.config.window_len, self.config.cadence) + self.config.reorder_horizon + 1.
        self._retention = retention

    def align_clocks(self, eeg_t0, event_t0):
        """Sets and returns the event-stream offset for the given stream origins."""
        with self._lock:
            self.event_offset = align_clocks(eeg_t0, event_t0)
            return self.event_offset

    def push_eeg(self, sample):
        """
            Buffers one EEG sample.

            Parameters
            ----------
            sample : EegSample

            Returns
            -------
            PushResult, falsy with a ``DropReason`` when the sample was dropped.
        """
        with self._lock:
            return self._eeg_acc.record(self._push_eeg(sample))

    def _push_eeg(self, sample):
        reason = validate_sample(sample)
        if reason is not None:
            logger.debug("EEG sample at t=%r dropped: %s", sample.t, reason.value)
            return PushResult(False, reason)
        t = float(sample.t)
        if t < self._newest_eeg - self.config.reorder_horizon:
            logger.debug("EEG sample at t=%r dropped: too_old", t)
            return PushResult(False, DropReason.TOO_OLD)
        index = bisect_right(self._eeg_t, t)
        self._eeg_t.insert(index, t)
        self._eeg_x.insert(index, tuple(float(v) for v in sample.channels))
        if t > self._newest_eeg:
            self._newest_eeg = t
        if len(self._eeg_t) % 512 == 0:
            self._prune()
        return ACCEPTED

    def push_event(self, event):
        """
            Buffers one task event after applying the clock offset.
            Events are never zero-filled, only buffered or dropped.

            Returns
            -------
            PushResult
        """
        with self._lock:
            return self._ev_acc.record(self._push_event(event))

    def _push_event(self, event):
        reason = validate_event(event)
        if reason is not None:
            logger.debug("Task event %r dropped: %s", event, reason.value)
            return PushResult(False, reason)
        event = normalize_event(event.shifted(self.event_offset) if self.event_offset else event)
        if event.t < self._newest_event - self.config.reorder_horizon:
            logger.debug("Task event at t=%r dropped: too_old", event.t)
            return PushResult(False, DropReason.TOO_OLD)
        index = bisect_right(self._ev_t, event.t)
        self._ev_t.insert(index, event.t)
        self._events.insert(index, event)
        if event.kind is EventKind.STEP_START:
            self._step_starts.insert(bisect_right([s.t for s in self._step_starts], event.t), event)
            del self._step_starts[:-64]
        if event.t > self._newest_event:
            self._newest_event = event.t
        return ACCEPTED

    def pop_ready(self):
        """
            Releases, in timestamp order, the buffered EEG samples that can no longer
            be preceded by an accepted sample (older than newest - reorder_horizon).

            Returns
            -------
            list of EegSample
        """
        with self._lock:
            limit = bisect_left(self._eeg_t, self._newest_eeg - self.config.reorder_horizon)
            start = self._eeg_released
            self._eeg_released = max(start, limit)
            return [EegSample(t, x) for t, x in zip(self._eeg_t[start:limit], self._eeg_x[start:limit])]

    @property
    def newest_eeg(self):
        return self._newest_eeg

    def stats(self):
        """Pushed/accepted/dropped counts per stream; accepted + dropped == pushed."""
        with self._lock:
            return {'eeg': self._eeg_acc.as_dict(), 'events': self._ev_acc.as_dict()}

    def close_window(self, t_close):
        """
            Cuts the aligned window closing at ``t_close``.

            Parameters
            ----------
            t_close : float
                Close instant in seconds, at least ``window_len``.

            Returns
            -------
            AlignedWindow

            Raises
            ------
            InsufficientDataError
                ``insufficient_data`` when more than ``max_missing_fraction`` of the grid
                rows are missing; the flagged window is attached to the exception and is
                returned as is by ``close_window_lossy``.
        """
        window = self.close_window_lossy(t_close)
        if window.lossy:
            raise InsufficientDataError('insufficient_data',
                                        "%d of %d EEG rows missing in window closing at %r"
                                        % (window.dropped_samples, self.config.n_rows, t_close),
                                        window=window)
        return window

    def close_window_lossy(self, t_close):
        """Same as ``close_window`` but returns insufficient windows with ``lossy=True``."""
        cfg = self.config
        t_close = float(t_close)
        if t_close < cfg.window_len - 1e-12:
            raise ValueError("t_close should be at least window_len, %r was passed" % t_close)
        with self._lock:
            eeg, sample_times = self._eeg_grid(t_close)
            lo = bisect_right(self._ev_t, t_close - cfg.cadence)
            hi = bisect_right(self._ev_t, t_close)
            in_window = tuple(self._events[lo:hi])
            context = self._events[hi - 1] if hi > 0 else self._context
            starts = [s for s in self._step_starts if s.t <= t_close]
            current = starts[-1] if starts else None
        filled = np.isfinite(sample_times)
        dropped = int(filled.size - filled.sum())
        lossy = dropped > cfg.max_missing_fraction * cfg.n_rows
        if lossy:
            logger.warning("Window closing at %r is missing %d of %d EEG rows", t_close, dropped, cfg.n_rows)
        eeg.setflags(write=False)
        sample_times.setflags(write=False)
        return AlignedWindow(
            t_close=t_close,
            eeg=eeg,
            events_in_window=in_window,
            error_count=sum(1 for e in in_window if e.kind is EventKind.ERROR),
            step_elapsed=t_close - current.t if current is not None else 0.,
            difficulty=context.difficulty if context is not None else 1,
            dropped_samples=dropped,
            sample_times=sample_times,
            step_id=current.step_id if current is not None else (context.step_id if context else 1),
            module_id=current.module_id if current is not None else (context.module_id if context else 1),
            lossy=lossy)

    def _eeg_grid(self, t_close):
        cfg = self.config
        n = cfg.n_rows
        fs = cfg.sample_rate
        t0 = t_close - cfg.window_len
        eeg = np.zeros((n, N_CHANNELS))
        sample_times = np.full(n, np.nan)
        lo = bisect_left(self._eeg_t, t0 - 0.5 / fs)
        hi = bisect_left(self._eeg_t, t0 + (n - 0.5) / fs)
        if hi <= lo:
            return eeg, sample_times
        t = np.asarray(self._eeg_t[lo:hi])
        x = np.asarray(self._eeg_x[lo:hi])
        rows = np.rint((t - t0) * fs).astype(int)
        inside = (rows >= 0) & (rows < n)
        skew = np.abs(t - (t0 + rows / fs))
        keep = inside & (skew <= cfg.skew_tolerance)
        t, x, rows, skew = t[keep], x[keep], rows[keep], skew[keep]
        # nearest sample wins: write the farthest first
        order = np.argsort(-skew, kind='stable')
        eeg[rows[order]] = x[order]
        sample_times[rows[order]] = t[order]
        return eeg, sample_times

    def _prune(self):
        cutoff = self._newest_eeg - self._retention
        k = bisect_left(self._eeg_t, cutoff)
        if k > 0:
            del self._eeg_t[:k]
            del self._eeg_x[:k]
            self._eeg_released = max(0, self._eeg_released - k)
        cutoff = self._newest_event - self._retention
        k = bisect_left(self._ev_t, cutoff)
        if k > 0:
            self._context = self._events[k - 1]
            del self._ev_t[:k]
            del self._events[:k]
