"""seedcast: multivariate time-series forecasting with a structural
variable-token encoder, prototype reprogramming, and a frozen
autoregressive decoder."""

from .config import ExperimentConfig, load_config, parse_config
from .errors import ConfigError, DataError, NumericError, ShapeError
from .model import SeedModel
from .pipeline import Metrics, build_dataset, evaluate, forecast, run_ablation, train
from .tensor import Tensor, backward, no_grad

__all__ = [
    "ConfigError", "DataError", "ExperimentConfig", "Metrics", "NumericError",
    "SeedModel", "ShapeError", "Tensor", "backward", "build_dataset", "evaluate",
    "forecast", "load_config", "no_grad", "parse_config", "run_ablation", "train",
]

__version__ = "0.1.0"
