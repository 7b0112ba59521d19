"""High-impedance fault detection from current waveforms with an autoencoder and PCA monitor."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, DegenerateDataError, HifError, InsufficientDataError,
                     InvalidInputError, ModelFileError, ShapeError, TrainingDivergenceError)
from .pipeline import MonitorModels, PipelineConfig, load_model, save_model, train_pipeline
from .signal_prep import WaveformRecord, read_waveform_csv, write_waveform_csv

__all__ = [
    "ConfigurationError", "DegenerateDataError", "HifError", "InsufficientDataError",
    "InvalidInputError", "ModelFileError", "ShapeError", "TrainingDivergenceError",
    "MonitorModels", "PipelineConfig", "load_model", "save_model", "train_pipeline",
    "WaveformRecord", "read_waveform_csv", "write_waveform_csv",
]
