import dataclasses
import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List

from ..calibration.protocol import CalibrationPlan
from ..engine.rules import EngineConfig
from ..features.spectral import BandDefs
from ..features.FeatureExtractor import N_FEATURES
from ..lstm.LSTMClassifier import TrainConfig
from ..lstm.network import N_CLASSES
from ..streams.StreamSynchronizer import StreamConfig
from ..synthgen.eeg import BandMixModel
from ..synthgen.scenario import ScenarioConfig
from ..synthgen.subject import InterventionEffects, SubjectProfile
from ..utils.exceptions import ConfigError


def _default_bands():
    return {name: [band.lo, band.hi] for name, band in BandDefs().items()}


@dataclass
class StreamSection:
    sample_rate: float = 128.
    window_len: float = 2.
    cadence: float = 10.
    reorder_horizon: float = .5
    skew_tolerance: float = .05

    def build(self):
        return StreamConfig(self.sample_rate, self.window_len, self.cadence, self.reorder_horizon,
                            self.skew_tolerance)


@dataclass
class FeatureSection:
    bands: Dict[str, List[float]] = field(default_factory=_default_bands)
    entropy_range: List[float] = field(default_factory=lambda: [4., 50.])
    subframe_len: float = 1.
    hop: float = .25
    expected_step_secs: float = 60.

    def build(self):
        """Keyword arguments of ``raw_features`` (sample rate excluded)."""
        try:
            bands = BandDefs.from_dict(self.bands)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError('bad_config', "features.bands: %s" % e)
        return dict(bands=bands, entropy_range=tuple(self.entropy_range), subframe_len=self.subframe_len,
                    hop=self.hop, expected_step_secs=self.expected_step_secs)


@dataclass
class ModelSection:
    hidden: int = 64
    layers: int = 2
    dropout: float = .2
    lr: float = 1e-3
    betas: List[float] = field(default_factory=lambda: [.9, .999])
    epochs: int = 100
    batch: int = 32
    seed: int = 0
    val_fraction: float = .2
    patience: int = 10
    min_per_class: int = 30

    def build(self):
        return TrainConfig(epochs=self.epochs, batch_size=self.batch, seed=self.seed,
                           val_fraction=self.val_fraction, patience=self.patience, lr=self.lr,
                           betas=tuple(self.betas), hidden=self.hidden, n_layers=self.layers,
                           dropout=self.dropout, min_per_class=self.min_per_class)

    @property
    def dims(self):
        return N_FEATURES, self.hidden, self.layers, N_CLASSES


@dataclass
class EngineSection:
    debounce_n: int = 2
    cooldown_secs: float = 30.
    repetition_k: int = 2
    max_one_challenge_per_step: bool = True
    fallback_thresholds: List[float] = field(default_factory=lambda: [.33, .66])

    def build(self):
        return EngineConfig(self.debounce_n, self.cooldown_secs, self.repetition_k,
                            self.max_one_challenge_per_step, tuple(self.fallback_thresholds))


@dataclass
class SimSection:
    skill: float = .2
    reactivity: float = .8
    noise_level: float = 2.
    tau: float = 8.
    couplings: BandMixModel = field(default_factory=BandMixModel)
    offsets: InterventionEffects = field(default_factory=InterventionEffects)
    effect_secs: float = 10.
    action_secs: float = 2.5
    calibration: CalibrationPlan = field(default_factory=CalibrationPlan)

    def profile(self, seed=0):
        return SubjectProfile(self.skill, self.reactivity, self.noise_level, self.tau, seed)

    def scenario(self):
        return ScenarioConfig(action_secs=self.action_secs, effect_secs=self.effect_secs, effects=self.offsets,
                              band_model=self.couplings)


@dataclass
class Config:
    """
        The JSON configuration document. Every section and key is optional; unknown
        keys are rejected.

        Examples
        --------
        >>> cfg = Config.from_dict({'engine': {'cooldown_secs': 20}})
        >>> cfg.engine.cooldown_secs, cfg.stream.cadence
        (20, 10.0)
        >>> try:
        ...     Config.from_dict({'engine': {'cooldown': 20}})
        ... except ConfigError as e:
        ...     print(e.code)
        bad_config
    """
    stream: StreamSection = field(default_factory=StreamSection)
    features: FeatureSection = field(default_factory=FeatureSection)
    model: ModelSection = field(default_factory=ModelSection)
    engine: EngineSection = field(default_factory=EngineSection)
    sim: SimSection = field(default_factory=SimSection)

    @classmethod
    def from_dict(cls, data):
        config = _build(cls, data, '')
        # surface invalid values now rather than at first use
        try:
            config.stream.build()
            config.features.build()
            config.model.build()
            config.engine.build()
            config.sim.profile()
        except (ValueError, TypeError) as e:
            raise ConfigError('bad_config', str(e))
        return config

    def to_dict(self):
        return asdict(self)


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError('bad_config', "%r should be an object, got %s" % (path or 'config', type(data).__name__))
    defaults = cls()
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        where = '%s.%s' % (path, key) if path else key
        if key not in names:
            raise ConfigError('bad_config', "unknown key %r" % where)
        default = getattr(defaults, key)
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build(type(default), value, where)
        else:
            kwargs[key] = _coerce(default, value, where)
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as e:
        raise ConfigError('bad_config', "%s: %s" % (path or 'config', e))


def _coerce(default, value, where):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, (int, float)):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        if ok and isinstance(default, int) and not isinstance(default, bool) and isinstance(value, float):
            ok = value.is_integer()
            value = int(value)
    elif isinstance(default, (list, tuple)):
        ok = isinstance(value, list) and len(value) == len(default)
        value = type(default)(value) if ok else value
    elif isinstance(default, dict):
        ok = isinstance(value, dict) and set(value) <= set(default)
    elif default is None:
        ok = value is None or isinstance(value, (int, float))
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise ConfigError('bad_config', "bad value %r for %r" % (value, where))
    return value


def load_config(path=None):
    """
    Reads a Config from a JSON file; None gives the defaults.

        Raises
        ------
        ConfigError
            ``bad_config`` for unreadable files, invalid JSON, unknown keys or bad values.
    """
    if path is None:
        return Config()
    try:
        with open(path, encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, ValueError) as e:
        raise ConfigError('bad_config', "cannot read %r: %s" % (path, e))
    return Config.from_dict(data)
