import json
import logging
import socketserver
import threading
import time
from collections import namedtuple

from ..engine.AdaptiveEngine import AdaptiveEngine
from ..engine.rules import EngineConfig
from ..streams.StreamSynchronizer import StreamConfig
from ..streams.records import EegSample, TaskEvent
from ..utils.exceptions import ProtocolError

logger = logging.getLogger(__name__)

EVENT_FIELDS = ('t', 'kind', 'step', 'module')

ClockSync = namedtuple('ClockSync', ['eeg_t0', 'event_t0'])


def parse_message(line):
    """
    Decodes one client line into an EegSample, a TaskEvent or a ClockSync (the
    origins of the two client clocks).

        Raises
        ------
        ProtocolError
            bad_json, bad_type or missing_field.

        Examples
        --------
        >>> parse_message('{"type": "eeg", "t": 0.5, "ch": [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]}').t
        0.5
    """
    try:
        message = json.loads(line)
    except ValueError:
        raise ProtocolError('bad_json', "Not a JSON line: %r" % line[:80])
    if not isinstance(message, dict):
        raise ProtocolError('bad_json', "Not a JSON object: %r" % line[:80])
    kind = message.get('type')
    if kind == 'eeg':
        if 't' not in message or not isinstance(message.get('ch'), list):
            raise ProtocolError('missing_field', "eeg messages need t and ch")
        try:
            return EegSample(float(message['t']), tuple(float(v) for v in message['ch']))
        except (TypeError, ValueError):
            raise ProtocolError('nan_value', "Non-numeric eeg values")
    if kind == 'event':
        missing = [f for f in EVENT_FIELDS if f not in message]
        if missing:
            raise ProtocolError('missing_field', "event messages need %r" % missing)
        return TaskEvent.from_dict(message)
    if kind == 'clock':
        try:
            return ClockSync(float(message['eeg_t0']), float(message['event_t0']))
        except KeyError:
            raise ProtocolError('missing_field', "clock messages need eeg_t0 and event_t0")
        except (TypeError, ValueError):
            raise ProtocolError('nan_value', "Non-numeric clock origins")
    raise ProtocolError('bad_type', "Unknown message type %r" % (kind,))


def inference_message(decision):
    return {'type': 'inference', 't': decision.t, 'L': decision.L,
            'probs': None if decision.probs is None else list(decision.probs),
            'raw_state': None if decision.raw_state is None else decision.raw_state.value,
            'stable_state': None if decision.stable_state is None else decision.stable_state.value}


def intervention_message(t, intervention):
    return {'type': 'intervention', 't': t, 'kind': intervention.kind.value,
            'target': None if intervention.target is None else str(intervention.target),
            'reason': intervention.reason}


class EngineSession(object):
    """
        One client session: a private AdaptiveEngine on the wall clock, fed line by line.

        Parameters
        ----------
        model : ModelBundle
        config : EngineConfig
        stream_config : StreamConfig
        feature_kwargs : dict, optional
    """

    def __init__(self, model, config=EngineConfig(), stream_config=StreamConfig(), feature_kwargs=None):
        self.engine = AdaptiveEngine(model, config=config, stream_config=stream_config,
                                     feature_kwargs=feature_kwargs, clock=time.perf_counter, immediate_events=True)
        self.protocol_errors = 0

    def handle_line(self, line):
        """
            Processes one line and returns the messages to send back, in order.
        """
        line = line.strip()
        if not line:
            return []
        try:
            item = parse_message(line)
        except ProtocolError as e:
            return [self._error(e.code, e.message)]
        if isinstance(item, EegSample):
            result = self.engine.push_eeg(item)
            if not result:
                return [self._error(result.reason.value, "eeg sample at t=%r dropped" % item.t)]
            out = []
            while self.engine.due():
                decision = self.engine.tick()
                out.append(inference_message(decision))
                out.extend(intervention_message(decision.t, i) for i in decision.interventions)
            return out
        if isinstance(item, ClockSync):
            offset = self.engine.align_clocks(item.eeg_t0, item.event_t0)
            logger.info("Event clock offset set to %r s", offset)
            return [{'type': 'clock', 'offset': offset}]
        result = self.engine.push_event(item)
        if not result:
            return [self._error(result.reason.value, "event at t=%r dropped" % item.t)]
        offset = self.engine.synchronizer.event_offset
        event = item.shifted(offset) if offset else item
        return [intervention_message(event.t, i) for i in self.engine.react(event)]

    def _error(self, code, message):
        self.protocol_errors += 1
        logger.warning("protocol_error %s: %s", code, message)
        return {'type': 'error', 'code': code}


class _Handler(socketserver.StreamRequestHandler):

    def handle(self):
        server = self.server
        session = EngineSession(server.model, server.engine_config, server.stream_config, server.feature_kwargs)
        logger.info("Session opened for %s", self.client_address)
        try:
            for raw in self.rfile:
                for message in session.handle_line(raw.decode('utf-8', errors='replace')):
                    self.wfile.write((json.dumps(message) + '\n').encode('utf-8'))
                self.wfile.flush()
        except (OSError, ValueError) as e:
            logger.warning("io_error, session with %s ends: %s", self.client_address, e)
        logger.info("Session closed for %s (%d protocol errors)", self.client_address, session.protocol_errors)


class EngineServer(socketserver.ThreadingTCPServer):
    """
        NDJSON TCP service; every connection gets an independent EngineSession.
    """
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, model, engine_config=EngineConfig(), stream_config=StreamConfig(),
                 feature_kwargs=None):
        self.model = model
        self.engine_config = engine_config
        self.stream_config = stream_config
        self.feature_kwargs = feature_kwargs
        socketserver.ThreadingTCPServer.__init__(self, address, _Handler)

    @property
    def port(self):
        return self.server_address[1]

    def start(self):
        """Serves from a background thread and returns it."""
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


def serve(port, model, host='127.0.0.1', **kwargs):
    """Runs the service until interrupted."""
    with EngineServer((host, port), model, **kwargs) as server:
        logger.warning("Serving on %s:%d", host, server.port)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            logger.info("Interrupted")
