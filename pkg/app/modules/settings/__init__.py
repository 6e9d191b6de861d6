from .run_config import (
    RunConfig, TensorSettings, DataSettings, ToySettings, EncoderSettings, GanSettings,
    AugmentSettings, TrainSettings, MetricsSettings, resolve_config, load_flat_file,
)

__all__ = [
    "RunConfig", "TensorSettings", "DataSettings", "ToySettings", "EncoderSettings", "GanSettings",
    "AugmentSettings", "TrainSettings", "MetricsSettings", "resolve_config", "load_flat_file",
]
