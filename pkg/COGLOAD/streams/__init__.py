from .records import (EegSample, TaskEvent, EventKind, ErrorType, DropReason, PushResult, N_CHANNELS,
                      N_STEPS, N_MODULES, N_LEVELS, validate_event, validate_sample)
from .StreamSynchronizer import StreamConfig, AlignedWindow, StreamSynchronizer, align_clocks
