class CogloadError(Exception):
    """
        Base class of the package errors.

        Parameters
        ----------
        code : str
            Machine-readable error code (e.g. ``'too_short'``, ``'bad_magic'``).
        message : str, optional
            Human-readable description.
    """

    def __init__(self, code, message=None):
        self.code = code
        self.message = message if message is not None else code
        super(CogloadError, self).__init__("%s: %s" % (code, self.message))


class SignalError(CogloadError, ValueError):
    pass


class ModelError(CogloadError, ValueError):
    pass


class ModelFileError(CogloadError, IOError):
    pass


class CalibrationError(CogloadError, ValueError):
    pass


class InsufficientDataError(CogloadError):
    """
        Raised by ``close_window`` when too many EEG grid rows are missing.
        The incomplete window is kept in ``window`` so callers may still use it.
    """

    def __init__(self, code, message=None, window=None):
        super(InsufficientDataError, self).__init__(code, message)
        self.window = window


class ConfigError(CogloadError, KeyError):
    pass


class ProtocolError(CogloadError, ValueError):
    """A malformed NDJSON message; the session continues."""
    pass
