from .spectral import (Band, BandDefs, DEFAULT_BANDS, Psd, psd, band_power, band_powers, theta_alpha_ratio,
                       spectral_entropy)
from .FeatureExtractor import (FEATURE_NAMES, N_FEATURES, FeatureFrame, FeatureSequence, NormStats,
                               WindowFeatureExtractor, behavioral_features, channel_band_powers, feature_sequence,
                               raw_features)
