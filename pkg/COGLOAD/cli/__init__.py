from .config import Config, StreamSection, FeatureSection, ModelSection, EngineSection, SimSection, load_config
from .server import EngineServer, EngineSession, parse_message, serve
