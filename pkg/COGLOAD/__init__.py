from ._version import __version__

from .utils import *
from .streams import *
from .features import *
from .lstm import *
from .calibration import *
from .engine import *
from .synthgen import *
