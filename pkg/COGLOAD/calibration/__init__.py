from .protocol import (PHASES, PHASE_LABELS, CalibrationPlan, LabeledSegment, CalibrationResult, run_calibration,
                       baseline_stats, calibration_norms, build_dataset, segment_scores, derive_thresholds, calibrate)
from ..lstm.model_io import Thresholds
