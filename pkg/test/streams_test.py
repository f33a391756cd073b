import threading
import unittest
from collections import Counter

import numpy as np

from COGLOAD.streams import (DropReason, EegSample, EventKind, StreamConfig, StreamSynchronizer, TaskEvent,
                             align_clocks, validate_event)
from COGLOAD.utils.exceptions import InsufficientDataError

FS = 128.


def ramp_samples(n, t0=0., skip=()):
    # channel c of sample k holds k + c / 100
    for k in range(n):
        if k in skip:
            continue
        yield EegSample(t0 + k / FS, tuple(k + c / 100. for c in range(14)))


class TestCases(unittest.TestCase):

    def test_window_grid(self):
        sync = StreamSynchronizer()
        for sample in ramp_samples(1280):
            self.assertTrue(sync.push_eeg(sample))
        w = sync.close_window(10.)
        self.assertEqual(w.eeg.shape, (256, 14))
        self.assertEqual(w.dropped_samples, 0)
        self.assertFalse(w.lossy)
        np.testing.assert_array_equal(w.eeg[:, 0], np.arange(1024, 1280))
        np.testing.assert_allclose(w.eeg[0], 1024 + np.arange(14) / 100.)
        self.assertFalse(w.eeg.flags.writeable)

    def test_reordering_within_horizon(self):
        ordered, shuffled = StreamSynchronizer(), StreamSynchronizer()
        samples = list(ramp_samples(1280))
        rng = np.random.RandomState(0)
        for sample in samples:
            ordered.push_eeg(sample)
        # blocks of 32 samples (0.25 s) shuffled internally stay within the 0.5 s horizon
        for start in range(0, len(samples), 32):
            block = samples[start:start + 32]
            for k in rng.permutation(len(block)):
                self.assertTrue(shuffled.push_eeg(block[k]))
        np.testing.assert_array_equal(ordered.close_window(10.).eeg, shuffled.close_window(10.).eeg)
        released = shuffled.pop_ready()
        times = [s.t for s in released]
        self.assertEqual(times, sorted(times))
        self.assertTrue(all(t < shuffled.newest_eeg - .5 for t in times))
        self.assertEqual(shuffled.pop_ready(), [])

    def test_too_old_sample(self):
        sync = StreamSynchronizer()
        sync.push_eeg(EegSample(5., (0.,) * 14))
        result = sync.push_eeg(EegSample(4.4, (0.,) * 14))
        self.assertFalse(result)
        self.assertEqual(result.reason, DropReason.TOO_OLD)
        self.assertTrue(sync.push_eeg(EegSample(4.6, (0.,) * 14)))

    def test_malformed_samples(self):
        sync = StreamSynchronizer()
        self.assertEqual(sync.push_eeg(EegSample(0., (0.,) * 13)).reason, DropReason.BAD_CHANNEL_COUNT)
        self.assertEqual(sync.push_eeg(EegSample(0., (float('nan'),) + (0.,) * 13)).reason, DropReason.NAN_VALUE)
        self.assertEqual(sync.push_eeg(EegSample(float('inf'), (0.,) * 14)).reason, DropReason.NAN_VALUE)
        self.assertTrue(sync.push_eeg(EegSample(0., (0.,) * 14)))
        stats = sync.stats()['eeg']
        self.assertEqual(stats['pushed'], 4)
        self.assertEqual(stats['accepted'] + stats['dropped'], stats['pushed'])
        self.assertEqual(stats['reasons'], {'bad_channel_count': 1, 'nan_value': 2})

    def test_event_validation(self):
        cases = [
            (TaskEvent(1., 'step_start', 9, 1, 1), DropReason.BAD_STEP),
            (TaskEvent(1., 'step_start', 1, 3, 1), DropReason.BAD_MODULE),
            (TaskEvent(1., 'step_start', 1, 1, 6), DropReason.BAD_DIFFICULTY),
            (TaskEvent(1., 'teleport', 1, 1, 1), DropReason.BAD_KIND),
            (TaskEvent(1., 'error', 1, 1, 1), DropReason.MISSING_FIELD),
            (TaskEvent(1., 'error', 1, 1, 1, error_type='when'), DropReason.MISSING_FIELD),
            (TaskEvent(1., 'object_grab', 1, 1, 1), DropReason.MISSING_FIELD),
            (TaskEvent(float('nan'), 'step_start', 1, 1, 1), DropReason.NAN_VALUE),
            (TaskEvent(1., 'step_start', 1.5, 1, 1), DropReason.BAD_STEP),
        ]
        for event, reason in cases:
            self.assertEqual(validate_event(event), reason, event)
        self.assertIsNone(validate_event(TaskEvent(1., 'error', 1, 1, 1, error_type='how')))
        self.assertIsNone(validate_event(TaskEvent(1., 'object_grab', 8, 2, 5, object_ok=False)))

        sync = StreamSynchronizer()
        for event, _ in cases:
            self.assertFalse(sync.push_event(event))
        self.assertEqual(sync.stats()['events']['dropped'], len(cases))

    def test_window_events(self):
        sync = StreamSynchronizer()
        events = [TaskEvent(.5, 'step_start', 2, 1, 3),
                  TaskEvent(3., 'error', 2, 1, 3, error_type='where'),
                  TaskEvent(9.99, 'error', 2, 1, 3, error_type='how'),
                  TaskEvent(10., 'error', 2, 1, 4, error_type='why'),
                  TaskEvent(10.3, 'error', 2, 1, 4, error_type='why')]
        for event in events:
            self.assertTrue(sync.push_event(event))
        for sample in ramp_samples(1320):
            sync.push_eeg(sample)
        w = sync.close_window(10.)
        self.assertEqual(len(w.events_in_window), 4)
        self.assertEqual(w.error_count, 3)
        self.assertAlmostEqual(w.step_elapsed, 9.5)
        self.assertEqual(w.difficulty, 4)
        self.assertEqual(w.step_id, 2)
        self.assertIs(w.events_in_window[0].kind, EventKind.STEP_START)

    def test_event_context_without_events(self):
        sync = StreamSynchronizer()
        sync.push_event(TaskEvent(1., 'step_start', 5, 2, 2))
        for sample in ramp_samples(2600):
            sync.push_eeg(sample)
        w = sync.close_window(20.)
        self.assertEqual(w.events_in_window, ())
        self.assertEqual(w.error_count, 0)
        self.assertEqual(w.difficulty, 2)
        self.assertEqual((w.step_id, w.module_id), (5, 2))
        self.assertAlmostEqual(w.step_elapsed, 19.)

    def test_missing_rows_zero_filled(self):
        sync = StreamSynchronizer()
        for sample in ramp_samples(1280, skip=range(1100, 1110)):
            sync.push_eeg(sample)
        w = sync.close_window(10.)
        self.assertEqual(w.dropped_samples, 10)
        np.testing.assert_array_equal(w.eeg[1100 - 1024:1110 - 1024], 0.)
        self.assertTrue(np.all(np.isnan(w.sample_times[1100 - 1024:1110 - 1024])))

    def test_insufficient_window(self):
        sync = StreamSynchronizer()
        for sample in ramp_samples(1280, skip=range(1100, 1180)):
            sync.push_eeg(sample)
        with self.assertRaises(InsufficientDataError) as ctx:
            sync.close_window(10.)
        self.assertEqual(ctx.exception.code, 'insufficient_data')
        self.assertEqual(ctx.exception.window.dropped_samples, 80)
        with self.assertLogs('COGLOAD.streams.StreamSynchronizer', 'WARNING'):
            w = sync.close_window_lossy(10.)
        self.assertTrue(w.lossy)
        self.assertEqual(w.eeg.shape, (256, 14))

    def test_close_before_window_len(self):
        with self.assertRaises(ValueError):
            StreamSynchronizer().close_window(1.)

    def test_clock_alignment(self):
        self.assertAlmostEqual(align_clocks(100., 100.2), -.2)
        sync = StreamSynchronizer()
        self.assertAlmostEqual(sync.align_clocks(100., 100.2), -.2)
        sync.push_event(TaskEvent(100.7, 'step_start', 1, 1, 1))
        for sample in ramp_samples(13000):
            sync.push_eeg(sample)
        w = sync.close_window(101.)
        self.assertAlmostEqual(w.events_in_window[0].t, 100.5)
        self.assertAlmostEqual(w.step_elapsed, .5)

    def test_geometry(self):
        cfg = StreamConfig()
        self.assertEqual(cfg.n_rows, 256)
        self.assertEqual(cfg.first_close, 10.)
        self.assertEqual(StreamConfig(cadence=1.).first_close, 2.)
        with self.assertRaises(ValueError):
            StreamConfig(sample_rate=0.)

    def test_concurrent_producers(self):
        sync = StreamSynchronizer()

        def eeg():
            for sample in ramp_samples(2560):
                sync.push_eeg(sample)

        def events():
            for k in range(200):
                sync.push_event(TaskEvent(k * .1, 'object_grab', 1, 1, 1, object_ok=True))

        threads = [threading.Thread(target=eeg), threading.Thread(target=events)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        stats = sync.stats()
        self.assertEqual(stats['eeg']['accepted'], 2560)
        self.assertEqual(stats['events']['accepted'], 200)
        self.assertEqual(sync.close_window(20.).dropped_samples, 0)

    def test_conservation_under_mixed_faults(self):
        sync = StreamSynchronizer()
        zeros = (0.,) * 14
        expected, pushed = Counter(), 0
        for k in range(2000):
            t = k / FS
            if k % 11 == 0:
                samples = [EegSample(t, (float('nan'),) + zeros[1:])]
                expected['nan_value'] += 1
            elif k % 19 == 0:
                samples = [EegSample(t, zeros[1:])]
                expected['bad_channel_count'] += 1
            elif k % 13 == 0:
                # skewed but in order: accepted, fixed up on the grid
                samples = [EegSample(t + .02, zeros)]
            elif k % 7 == 0:
                samples = [EegSample(t, zeros)] * 2
            else:
                samples = [EegSample(t, zeros)]
            if k % 17 == 5:
                samples.append(EegSample(t - 1., zeros))
                expected['too_old'] += 1
            for sample in samples:
                sync.push_eeg(sample)
                pushed += 1
        stats = sync.stats()['eeg']
        self.assertEqual(stats['pushed'], pushed)
        self.assertEqual(stats['accepted'] + stats['dropped'], pushed)
        self.assertEqual(stats['dropped'], sum(expected.values()))
        self.assertEqual(stats['reasons'], dict(expected))

        expected, pushed = Counter(), 0
        for j in range(200):
            t = j * .5
            events = [TaskEvent(t, 'step_start', 1 + j % 8, 1, 1)]
            if j % 9 == 0:
                events.append(events[0])
            if j % 10 == 3:
                events.append(TaskEvent(t - 2., 'step_start', 1, 1, 1))
                expected['too_old'] += 1
            if j % 8 == 1:
                events.append(TaskEvent(t, 'teleport', 1, 1, 1))
                expected['bad_kind'] += 1
            if j % 12 == 6:
                events.append(TaskEvent(float('nan'), 'step_start', 1, 1, 1))
                expected['nan_value'] += 1
            for event in events:
                sync.push_event(event)
                pushed += 1
        stats = sync.stats()['events']
        self.assertEqual(stats['pushed'], pushed)
        self.assertEqual(stats['accepted'] + stats['dropped'], pushed)
        self.assertEqual(stats['reasons'], dict(expected))


if __name__ == "__main__":
    unittest.main()
