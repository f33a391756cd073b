from .data_check import *
from .exceptions import *
from .functions import *
from .information_theory import *
