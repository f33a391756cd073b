import json
import logging

logger = logging.getLogger(__name__)

RECORD_TYPES = ('meta', 'eeg_summary', 'features', 'decision', 'event', 'calibration_report', 'train_epoch')


class SessionLog(object):
    """
        Append-only JSONL session log. Every record is a flat JSON object with
        ``type``, ``t`` and ``session_id``.

        Parameters
        ----------
        session_id : str
        sink : callable, optional
            Called with every serialized line as it is appended.

        Examples
        --------
        >>> log = SessionLog('demo')
        >>> _ = log.append('event', 1.5, kind='step_start')
        >>> log.dumps()
        '{"type": "event", "t": 1.5, "session_id": "demo", "kind": "step_start"}\\n'
    """

    def __init__(self, session_id, sink=None):
        self.session_id = session_id
        self.records = []
        self.sink = sink

    def append(self, type, t, **fields):
        if type not in RECORD_TYPES:
            raise KeyError("Record type should be one of %r, %r was passed" % (RECORD_TYPES, type))
        record = {'type': type, 't': float(t), 'session_id': self.session_id}
        record.update(fields)
        self.records.append(record)
        if self.sink is not None:
            self.sink(_dumps(record))
        return record

    def of_type(self, type):
        return [r for r in self.records if r['type'] == type]

    @property
    def meta(self):
        metas = self.of_type('meta')
        return metas[0] if metas else {}

    def lines(self):
        return [_dumps(r) for r in self.records]

    def dumps(self):
        return ''.join(line + '\n' for line in self.lines())

    def write(self, path):
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(self.dumps())

    @classmethod
    def loads(cls, text):
        records = []
        for number, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            record = json.loads(line)
            if not isinstance(record, dict) or 'type' not in record or 't' not in record:
                raise ValueError("Line %d is not a session log record: %r" % (number, line[:80]))
            records.append(record)
        log = cls(records[0].get('session_id') if records else None)
        log.records = records
        return log

    @classmethod
    def read(cls, path):
        with open(path, encoding='utf-8') as f:
            return cls.loads(f.read())


def _dumps(record):
    return json.dumps(record, allow_nan=False)
