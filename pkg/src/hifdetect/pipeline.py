"""Offline training recipe and the persisted model bundle.

The bundle holds everything the online detector needs: cycle sampling
settings, the input min-max scaler, the autoencoder, the PCA monitor (which
carries the residual z-score scaler) and the trip counter threshold.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import autoencoder as ae
from . import pca_monitor as pcam
from .errors import ConfigurationError, HifError, InsufficientDataError, ModelFileError
from .signal_prep import (MinMaxScaler, WaveformRecord, ZScoreScaler, augment, minmax_apply,
                          minmax_fit, split)

log = logging.getLogger(__name__)

FORMAT_NAME = "hifdetect-model"
FORMAT_VERSION = 1
RNG_NAME = "numpy.PCG64"


@dataclass(frozen=True)
class PipelineConfig:
    ts: int = 320
    m_vars: int = 32
    layer_dims: tuple[int, ...] = ae.DEFAULT_LAYERS
    train: ae.TrainConfig = field(default_factory=ae.TrainConfig)
    train_fraction: float = 0.8
    cpv_target: float = 0.95
    alpha: float = 0.99
    threshold: int = 60

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if self.ts <= 0 or self.m_vars <= 0 or self.ts % self.m_vars:
            raise ConfigurationError(f"M={self.m_vars} must be positive and divide ts={self.ts}")
        if self.layer_dims[0] != self.m_vars:
            raise ConfigurationError(
                f"autoencoder input dimension {self.layer_dims[0]} differs from M={self.m_vars}")
        if self.threshold < 1:
            raise ConfigurationError(f"threshold must be >= 1, got {self.threshold}")

    @property
    def gap(self) -> int:
        return self.ts // self.m_vars


@dataclass(frozen=True)
class MonitorModels:
    config: PipelineConfig
    input_scaler: MinMaxScaler
    autoencoder: ae.AutoencoderModel
    monitor: pcam.PcaMonitorModel

    def __post_init__(self):
        m = self.config.m_vars
        if len(self.input_scaler) != m or self.autoencoder.input_dim != m or self.monitor.m_vars != m:
            raise ConfigurationError("scaler, autoencoder and PCA monitor dimensions disagree")

    @property
    def ts(self) -> int:
        return self.config.ts

    @property
    def phi_limit(self) -> float:
        return self.monitor.phi_limit


def phi_values(models: MonitorModels, sampled_cycles) -> np.ndarray:
    """Combined index for each row of gap-sampled raw cycle vectors."""
    x = minmax_apply(models.input_scaler, np.atleast_2d(sampled_cycles))
    e = ae.residuals(models.autoencoder, x)
    return pcam.phi_index(models.monitor, pcam.standardize(models.monitor, e))


@dataclass
class TrainingSummary:
    n_rows: int
    n_train: int
    n_validation: int
    history: ae.LossHistory

    @property
    def final_train_loss(self) -> float:
        return self.history.train[-1]

    @property
    def final_validation_loss(self) -> float:
        return self.history.validation[-1]


def training_matrix(records: Iterable[WaveformRecord], ts: int, m_vars: int) -> np.ndarray:
    """Stack the cycle matrices of every phase of every record (record order, then phase order)."""
    blocks = []
    for record in records:
        if record.ts != ts:
            raise ConfigurationError(f"record has ts={record.ts}, expected {ts}")
        blocks.extend(augment(values, ts, m_vars).data for values in record.phases.values())
    if not blocks:
        raise InsufficientDataError("no load recordings given")
    return np.vstack(blocks)


def train_pipeline(records: Sequence[WaveformRecord],
                   config: PipelineConfig = PipelineConfig()) -> tuple[MonitorModels, TrainingSummary]:
    """Fit scaler, autoencoder and PCA monitor on normal-load recordings."""
    raw = training_matrix(records, config.ts, config.m_vars)
    scaler = minmax_fit(raw)
    scaled = minmax_apply(scaler, raw)
    train_x, val_x = split(scaled, config.train_fraction, seed=config.train.seed)
    model, history = ae.train(train_x, val_x, config.layer_dims, config.train)
    monitor = pcam.fit(ae.residuals(model, scaled), config.cpv_target, config.alpha)
    summary = TrainingSummary(raw.shape[0], train_x.shape[0], val_x.shape[0], history)
    return MonitorModels(config, scaler, model, monitor), summary


# --------------------------------------------------------------------------
# model file

def to_dict(models: MonitorModels, summary: TrainingSummary | None = None) -> dict:
    cfg = models.config
    mon = models.monitor
    doc = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "rng": {"generator": RNG_NAME, "seed": cfg.train.seed},
        "pipeline": {
            "ts": cfg.ts,
            "m_vars": cfg.m_vars,
            "gap": cfg.gap,
            "layer_dims": list(cfg.layer_dims),
            "train": asdict(cfg.train),
            "train_fraction": cfg.train_fraction,
            "cpv_target": cfg.cpv_target,
            "alpha": cfg.alpha,
            "threshold": cfg.threshold,
        },
        "input_scaler": {"min": models.input_scaler.min.tolist(), "max": models.input_scaler.max.tolist()},
        "autoencoder": {
            "layer_dims": list(models.autoencoder.layer_dims),
            "hidden_activation": "relu",
            "output_activation": "identity",
            "weights": [w.tolist() for w in models.autoencoder.weights],
            "biases": [b.tolist() for b in models.autoencoder.biases],
        },
        "pca": {
            "residual_mean": mon.residual_scaler.mean.tolist(),
            "residual_std": mon.residual_scaler.std.tolist(),
            "loadings": mon.loadings.tolist(),
            "eigenvalues": mon.eigenvalues.tolist(),
            "n_components": mon.n_components,
            "g": mon.g,
            "h": mon.h,
            "alpha": mon.alpha,
            "t2_limit": mon.t2_limit,
            "spe_limit": mon.spe_limit,
            "phi_limit": mon.phi_limit,
        },
    }
    if summary is not None:
        doc["training"] = {
            "n_rows": summary.n_rows,
            "n_train": summary.n_train,
            "n_validation": summary.n_validation,
            "final_train_loss": summary.final_train_loss,
            "final_validation_loss": summary.final_validation_loss,
        }
    return doc


def dumps(models: MonitorModels, summary: TrainingSummary | None = None) -> str:
    return json.dumps(to_dict(models, summary), indent=1, allow_nan=False) + "\n"


def save_model(models: MonitorModels, path, summary: TrainingSummary | None = None) -> Path:
    path = Path(path)
    path.write_text(dumps(models, summary))
    return path


def _close(a: float, b: float, rel: float = 1e-9) -> bool:
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-300)


def from_dict(doc: dict) -> MonitorModels:
    """Rebuild and re-validate a model bundle; any violated invariant raises ModelFileError."""
    try:
        if doc.get("format") != FORMAT_NAME:
            raise ModelFileError(f"not a {FORMAT_NAME} file")
        if doc.get("format_version") != FORMAT_VERSION:
            raise ModelFileError(
                f"unsupported format_version {doc.get('format_version')!r}, expected {FORMAT_VERSION}")
        p = doc["pipeline"]
        config = PipelineConfig(
            ts=int(p["ts"]), m_vars=int(p["m_vars"]), layer_dims=tuple(p["layer_dims"]),
            train=ae.TrainConfig(**p["train"]), train_fraction=float(p["train_fraction"]),
            cpv_target=float(p["cpv_target"]), alpha=float(p["alpha"]), threshold=int(p["threshold"]))
        if p.get("gap") != config.gap:
            raise ModelFileError(f"gap {p.get('gap')} inconsistent with ts/M = {config.gap}")

        scaler = MinMaxScaler(np.array(doc["input_scaler"]["min"]), np.array(doc["input_scaler"]["max"]))
        a = doc["autoencoder"]
        if a.get("hidden_activation") != "relu" or a.get("output_activation") != "identity":
            raise ModelFileError("unsupported activation functions")
        if tuple(a["layer_dims"]) != config.layer_dims:
            raise ModelFileError("autoencoder layer_dims differ from pipeline layer_dims")
        net = ae.AutoencoderModel(tuple(a["layer_dims"]),
                                  tuple(np.array(w, dtype=float) for w in a["weights"]),
                                  tuple(np.array(b, dtype=float) for b in a["biases"]))

        q = doc["pca"]
        lam = np.array(q["eigenvalues"], dtype=float)
        l = int(q["n_components"])
        loadings = np.array(q["loadings"], dtype=float).reshape(len(lam), l)
        monitor = pcam.PcaMonitorModel(
            ZScoreScaler(np.array(q["residual_mean"]), np.array(q["residual_std"])),
            loadings, lam, l, float(q["g"]), float(q["h"]), float(q["alpha"]),
            float(q["t2_limit"]), float(q["spe_limit"]), float(q["phi_limit"]))
        if not _close(monitor.alpha, config.alpha):
            raise ModelFileError("PCA alpha differs from pipeline alpha")
        expected = pcam.control_limits(lam, l, monitor.alpha)
        stored = (monitor.g, monitor.h, monitor.t2_limit, monitor.spe_limit, monitor.phi_limit)
        for name, want, got in zip(("g", "h", "t2_limit", "spe_limit", "phi_limit"), expected, stored):
            if not _close(want, got):
                raise ModelFileError(f"stored {name}={got!r} inconsistent with eigenvalues (expected {want!r})")
        return MonitorModels(config, scaler, net, monitor)
    except ModelFileError:
        raise
    except (HifError, KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"invalid model file: {exc}") from exc


def load_model(path) -> MonitorModels:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: not valid JSON ({exc})") from exc
    return from_dict(doc)
