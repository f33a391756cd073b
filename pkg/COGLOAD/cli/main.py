import argparse
import json
import logging
import sys
import time
from collections import Counter
from dataclasses import replace

import numpy as np

from .config import load_config
from .server import serve
from .._version import __version__
from ..calibration.protocol import calibrate
from ..engine.AdaptiveEngine import AdaptiveEngine, replay_decisions
from ..engine.rules import EngineConfig
from ..engine.session_log import SessionLog
from ..features.FeatureExtractor import FEATURE_NAMES
from ..lstm.model_io import load_model, save_model
from ..streams.StreamSynchronizer import StreamConfig
from ..streams.records import EegSample, N_CHANNELS
from ..synthgen.eeg import EegGenerator, gen_eeg
from ..synthgen.scenario import POLICIES, run_scenario, time_in_band
from ..utils.exceptions import CogloadError, ConfigError, ModelFileError
from ..utils.functions import latency_percentiles

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_MODEL, EXIT_RUNTIME = 0, 1, 2, 3, 4
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'
LATENCY_BUDGET_MS = 100.


def _model(path, config):
    try:
        return load_model(path, expected_dims=config.model.dims, dropout_rate=config.model.dropout)
    except OSError as e:
        if isinstance(e, ModelFileError):
            raise
        raise ModelFileError('unreadable_file', "cannot read %r: %s" % (path, e))


def _print_json(obj):
    print(json.dumps(obj))


def cmd_calibrate(args):
    config = load_config(args.config)
    profile = config.sim.profile(seed=args.subject_seed)
    log = SessionLog('calibrate-%d' % args.subject_seed) if args.log else None
    if log is not None:
        log.append('meta', 0., clock='virtual', command='calibrate', subject_seed=args.subject_seed,
                   config=config.to_dict())
    result = calibrate(profile, config.sim.calibration, seed=args.subject_seed, train_config=config.model.build(),
                       stream_config=config.stream.build(), fallback=tuple(config.engine.fallback_thresholds),
                       feature_kwargs=config.features.build(), log=log, verbose=args.verbose)
    bundle = result.bundle
    save_model(bundle.params, bundle.thresholds, bundle.norms, args.out)
    if log is not None:
        log.write(args.log)
    _print_json(bundle.thresholds.to_dict())
    return EXIT_OK


def cmd_run(args):
    config = load_config(args.config)
    bundle = _model(args.model, config)
    log = run_scenario(args.policy, config.sim.profile(seed=args.subject_seed), args.secs, args.seed, bundle,
                       engine_config=config.engine.build(), stream_config=config.stream.build(),
                       scenario_config=config.sim.scenario(), feature_kwargs=config.features.build(),
                       model_path=args.model)
    log.write(args.log)
    decisions = log.of_type('decision')
    _print_json({'session_id': log.session_id, 'decisions': len(decisions),
                 'time_in_band': time_in_band(log) if decisions else None})
    return EXIT_OK


def _engine_config(meta):
    engine = dict(meta.get('engine') or {})
    if 'fallback_thresholds' in engine:
        engine['fallback_thresholds'] = tuple(engine['fallback_thresholds'])
    return EngineConfig(**engine)


def session_report(log, mismatches):
    decisions = log.of_type('decision')
    loads = [d['l'] for d in decisions if d.get('l') is not None]
    return {
        'session_id': log.session_id,
        'decisions': len(decisions),
        'mismatches': len(mismatches),
        'data_gaps': sum(1 for d in decisions if d.get('data_gap')),
        'states': dict(Counter(d['stable_state'] for d in decisions if d.get('stable_state'))),
        'interventions': dict(Counter(i['kind'] for d in decisions for i in d.get('interventions', []))),
        'channels': dict(Counter(d.get('channel') or 'none' for d in decisions)),
        'time_in_band': time_in_band(log) if loads else None,
        'latency_ms': latency_percentiles([d['latency_ms'] for d in decisions]),
    }


def cmd_replay(args):
    try:
        log = SessionLog.read(args.log)
    except (OSError, ValueError) as e:
        raise ConfigError('bad_log', "cannot read session log %r: %s" % (args.log, e))
    meta = log.meta
    path = args.model or meta.get('model')
    if not path:
        raise ModelFileError('missing_model', "the log declares no model, pass --model")
    _, mismatches = replay_decisions(log, _model(path, load_config(args.config)), _engine_config(meta))
    if args.features:
        header = ','.join(('t', 'frame') + FEATURE_NAMES)
        print(header)
        for record in log.of_type('features'):
            for k, frame in enumerate(record['frames']):
                print(','.join([repr(record['t']), str(k)] + [repr(v) for v in frame]))
    for t, key, logged, recomputed in mismatches:
        logger.warning("Mismatch at t=%r on %s: logged %r, recomputed %r", t, key, logged, recomputed)
    if args.report:
        _print_json(session_report(log, mismatches))
    print('%d mismatches' % len(mismatches))
    return EXIT_OK if not mismatches else EXIT_RUNTIME


def cmd_serve(args):
    config = load_config(args.config)
    serve(args.port, _model(args.model, config), host=args.host, engine_config=config.engine.build(),
          stream_config=config.stream.build(), feature_kwargs=config.features.build())
    return EXIT_OK


def bench(bundle, iters=1000, seed=0, stream_config=StreamConfig(), feature_kwargs=None, clock=time.perf_counter):
    """
    Latency of the full tick path (window close, features, forward pass, rules) over
    ``iters`` windows of synthetic EEG. The cadence is shortened to the window length
    so that every pushed sample is used.

        Returns
        -------
        dict with iters, p50, p95, p99, max, mean (milliseconds), budget_ms, within_budget
    """
    cfg = replace(stream_config, cadence=stream_config.window_len)
    engine = AdaptiveEngine(bundle, stream_config=cfg, feature_kwargs=feature_kwargs, clock=clock)
    generator = EegGenerator(seed=seed, sample_rate=cfg.sample_rate)
    latencies = []
    per_tick = cfg.n_rows
    for k in range(iters):
        times, eeg = generator.generate(.5 + .4 * np.sin(k / 10.), per_tick)
        for t, x in zip(times.tolist(), eeg.tolist()):
            engine.push_eeg(EegSample(t, tuple(x)))
        while engine.due():
            latencies.append(engine.tick().latency_ms)
    report = {'iters': len(latencies)}
    report.update(latency_percentiles(latencies))
    report['budget_ms'] = LATENCY_BUDGET_MS
    report['within_budget'] = bool(latencies) and report['p99'] < LATENCY_BUDGET_MS
    return report


def cmd_bench(args):
    config = load_config(args.config)
    report = bench(_model(args.model, config), args.iters, args.seed, config.stream.build(),
                   config.features.build())
    _print_json(report)
    return EXIT_OK


def cmd_gen(args):
    config = load_config(args.config)
    if not 0. <= args.load <= 1.:
        raise ConfigError('bad_config', "--load should be in [0, 1], %r was passed" % args.load)
    profile = config.sim.profile(seed=args.subject_seed)
    t, eeg = gen_eeg(args.load, args.secs, profile, args.seed, config.sim.couplings, config.stream.sample_rate)
    header = ','.join(['t'] + ['ch%02d' % (k + 1) for k in range(N_CHANNELS)])
    np.savetxt(args.out, np.column_stack([t, eeg]), fmt='%.9g', delimiter=',', header=header, comments='')
    return EXIT_OK


class _Parser(argparse.ArgumentParser):

    def error(self, message):
        raise CogloadError('usage', "%s: %s" % (self.prog, message))


def build_parser():
    parser = _Parser(prog='cogload', description="Closed-loop cognitive load adaptive training.")
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    parser.add_argument('--log-level', default='WARNING', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None, help="JSON configuration file")
    common.add_argument('--verbose', action='store_true')
    sub = parser.add_subparsers(dest='command')
    sub.required = True

    p = sub.add_parser('calibrate', parents=[common], help="calibrate a simulated subject and train its model")
    p.add_argument('--subject-seed', type=int, default=0)
    p.add_argument('--out', required=True)
    p.add_argument('--log', default=None, help="optional JSONL log of the training")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser('run', parents=[common], help="simulate a closed-loop session")
    p.add_argument('--model', required=True)
    p.add_argument('--policy', choices=POLICIES, default='adaptive')
    p.add_argument('--secs', type=float, default=600.)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--subject-seed', type=int, default=0)
    p.add_argument('--log', required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser('replay', parents=[common], help="recompute and verify the decisions of a session log")
    p.add_argument('--log', required=True)
    p.add_argument('--model', default=None)
    p.add_argument('--features', action='store_true')
    p.add_argument('--report', action='store_true')
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser('serve', parents=[common], help="NDJSON engine service over TCP")
    p.add_argument('--model', required=True)
    p.add_argument('--port', type=int, default=7878)
    p.add_argument('--host', default='127.0.0.1')
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser('bench', parents=[common], help="tick latency report")
    p.add_argument('--model', required=True)
    p.add_argument('--iters', type=int, default=1000)
    p.add_argument('--seed', type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser('gen', parents=[common], help="write synthetic EEG as CSV")
    p.add_argument('--load', type=float, required=True)
    p.add_argument('--secs', type=float, required=True)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--subject-seed', type=int, default=0)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_gen)
    return parser


def _fail(code, exit_code, message):
    sys.stderr.write(json.dumps({'error': code, 'message': message}) + '\n')
    return exit_code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CogloadError as e:
        return _fail(e.code, EXIT_USAGE, e.message)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT, stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as e:
        return _fail(e.code, EXIT_CONFIG, e.message)
    except ModelFileError as e:
        return _fail(e.code, EXIT_MODEL, e.message)
    except CogloadError as e:
        return _fail(e.code, EXIT_RUNTIME, e.message)
    except Exception as e:
        logger.exception("Unexpected failure")
        return _fail('runtime_failure', EXIT_RUNTIME, str(e))


if __name__ == '__main__':
    sys.exit(main())
