"""Data-glove sign recognition: windowing, MFCC features, augmentation and a multi-branch CNN."""
from .config import RunConfig, get_settings, load_run_config
from .errors import DataError, GloveError, NumericalError
from .labels import ClassLabel

__version__ = "0.1.0"

__all__ = [
    "ClassLabel",
    "DataError",
    "GloveError",
    "NumericalError",
    "RunConfig",
    "get_settings",
    "load_run_config",
    "__version__",
]
