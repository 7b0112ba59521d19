"""Waveform records, cycle-sampled data matrices and the two column scalers.

A single-phase current waveform is turned into an ``N x M`` matrix by taking
``M`` equally spaced samples (gap ``ts // M``) from each of the ``N`` complete
cycles in the record. Trailing samples of an incomplete cycle are dropped.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .errors import ConfigurationError, InsufficientDataError, ShapeError

EPS = 1e-8
PHASES = ("phase_a", "phase_b", "phase_c")


@dataclass(frozen=True)
class WaveformRecord:
    """Raw multi-phase current samples of one recording.

    ``phases`` maps a phase name to its instantaneous current samples (A). All
    phases share one length. The fault label fields are either all unset
    (normal load) or describe a half-open sample window ``[start, end)``.
    """

    ts: int
    phases: Mapping[str, np.ndarray]
    sample_rate: float = 0.0
    fault_start_sample: Optional[int] = None
    fault_end_sample: Optional[int] = None
    faulted_phase: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.ts) != self.ts or self.ts <= 0:
            raise ConfigurationError(f"ts must be a positive integer, got {self.ts!r}")
        if not self.phases:
            raise ConfigurationError("a record needs at least one phase")
        phases = {name: np.asarray(values, dtype=float) for name, values in self.phases.items()}
        lengths = {v.shape for v in phases.values()}
        if len(lengths) != 1 or len(next(iter(lengths))) != 1:
            raise ShapeError(f"phase sequences must be 1-D and of equal length, got {lengths}")
        for v in phases.values():
            v.setflags(write=False)
        object.__setattr__(self, "phases", phases)
        if self.sample_rate == 0.0:
            object.__setattr__(self, "sample_rate", 60.0 * self.ts)
        if self.sample_rate <= 0:
            raise ConfigurationError(f"sample_rate must be positive, got {self.sample_rate}")

        labels = (self.fault_start_sample, self.fault_end_sample)
        if any(x is not None for x in labels):
            start, end = labels
            if start is None or end is None:
                raise ConfigurationError("fault_start_sample and fault_end_sample must be set together")
            if not 0 <= start <= end <= len(self):
                raise ConfigurationError(
                    f"fault window [{start}, {end}) outside record of length {len(self)}")
            if self.faulted_phase not in phases:
                raise ConfigurationError(f"faulted_phase {self.faulted_phase!r} is not a phase of the record")

    def __len__(self) -> int:
        return len(next(iter(self.phases.values())))

    @property
    def phase_names(self) -> list[str]:
        return list(self.phases)

    @property
    def frequency(self) -> float:
        return self.sample_rate / self.ts

    @property
    def n_cycles(self) -> int:
        return len(self) // self.ts

    @property
    def is_faulted(self) -> bool:
        return self.faulted_phase is not None


@dataclass(frozen=True)
class CycleMatrix:
    """``N x M`` matrix of gap-sampled cycles (one row per cycle)."""

    data: np.ndarray
    ts: int
    m_vars: int

    def __post_init__(self):
        _check_ts_m(self.ts, self.m_vars)
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[1] != self.m_vars:
            raise ShapeError(f"expected an N x {self.m_vars} matrix, got shape {data.shape}")
        object.__setattr__(self, "data", data)

    @property
    def gap(self) -> int:
        return self.ts // self.m_vars

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]


def _check_ts_m(ts: int, m_vars: int) -> None:
    if ts <= 0 or m_vars <= 0:
        raise ConfigurationError(f"ts and M must be positive, got ts={ts}, M={m_vars}")
    if ts % m_vars:
        raise ConfigurationError(f"M={m_vars} does not divide ts={ts}")


def augment(signal, ts: int, m_vars: int) -> CycleMatrix:
    """Build the cycle matrix ``X[i, j] = signal[i*ts + j*gap]``."""
    _check_ts_m(ts, m_vars)
    signal = np.asarray(signal, dtype=float).ravel()
    n = signal.size // ts
    if n == 0:
        raise InsufficientDataError(f"signal of {signal.size} samples is shorter than one cycle ({ts})")
    gap = ts // m_vars
    data = signal[: n * ts].reshape(n, ts)[:, ::gap].copy()
    return CycleMatrix(data, ts, m_vars)


def augment_record(record: WaveformRecord, m_vars: int) -> dict[str, CycleMatrix]:
    return {name: augment(values, record.ts, m_vars) for name, values in record.phases.items()}


def _as_2d(matrix) -> np.ndarray:
    if isinstance(matrix, CycleMatrix):
        matrix = matrix.data
    return np.asarray(matrix, dtype=float)


@dataclass(frozen=True)
class MinMaxScaler:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=float)
        hi = np.asarray(self.max, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ShapeError("min and max must be vectors of equal length")
        if np.any(hi < lo):
            raise ConfigurationError("min-max scaler has max < min in some column")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    def __len__(self):
        return self.min.size


def minmax_fit(matrix) -> MinMaxScaler:
    x = _as_2d(matrix)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InsufficientDataError("cannot fit a min-max scaler on an empty matrix")
    return MinMaxScaler(x.min(axis=0), x.max(axis=0))


def minmax_apply(scaler: MinMaxScaler, matrix) -> np.ndarray:
    """Affine map onto [0, 1] over the fitted range; out-of-range values are not clamped.

    Columns whose fitted range is narrower than ``EPS`` map to 0.
    """
    x = _as_2d(matrix)
    if x.shape[-1] != len(scaler):
        raise ShapeError(f"expected {len(scaler)} columns, got {x.shape[-1]}")
    span = scaler.max - scaler.min
    degenerate = span < EPS
    out = (x - scaler.min) / np.where(degenerate, 1.0, span)
    return np.where(degenerate, 0.0, out)


def minmax_invert(scaler: MinMaxScaler, scaled) -> np.ndarray:
    scaled = np.asarray(scaled, dtype=float)
    return scaled * (scaler.max - scaler.min) + scaler.min


@dataclass(frozen=True)
class ZScoreScaler:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        std = np.asarray(self.std, dtype=float)
        if mean.shape != std.shape or mean.ndim != 1:
            raise ShapeError("mean and std must be vectors of equal length")
        if np.any(~(std >= EPS)):
            raise ConfigurationError(f"z-score std must be >= {EPS}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def __len__(self):
        return self.mean.size


def zscore_fit(matrix) -> ZScoreScaler:
    x = _as_2d(matrix)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InsufficientDataError("z-score fit needs at least 2 rows")
    return ZScoreScaler(x.mean(axis=0), np.maximum(x.std(axis=0, ddof=1), EPS))


def zscore_apply(scaler: ZScoreScaler, values) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.shape[-1] != len(scaler):
        raise ShapeError(f"expected {len(scaler)} columns, got {x.shape[-1]}")
    return (x - scaler.mean) / scaler.std


def zscore_invert(scaler: ZScoreScaler, values) -> np.ndarray:
    return np.asarray(values, dtype=float) * scaler.std + scaler.mean


def split(matrix, train_fraction: float, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Shuffle rows with a seeded generator and cut them into train / validation.

    The train size is ``train_fraction * N`` rounded half-up, kept within
    ``[1, N - 1]`` so neither part is empty.
    """
    x = _as_2d(matrix)
    if not 0.0 < train_fraction < 1.0:
        raise ConfigurationError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = x.shape[0]
    if n < 2:
        raise InsufficientDataError("split needs at least 2 rows")
    n_train = min(max(math.floor(n * train_fraction + 0.5), 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    return x[order[:n_train]], x[order[n_train:]]


# --------------------------------------------------------------------------
# Waveform CSV + .meta sidecar

def meta_path_for(csv_path) -> Path:
    return Path(csv_path).with_suffix(".meta")


def write_waveform_csv(record: WaveformRecord, path) -> Path:
    """Write ``sample_index,<phase>...`` rows plus the JSON ``.meta`` sidecar."""
    path = Path(path)
    names = record.phase_names
    columns = [record.phases[n].tolist() for n in names]
    lines = [",".join(["sample_index", *names])]
    lines.extend(
        ",".join([str(i), *map(repr, row)]) for i, row in enumerate(zip(*columns))
    )
    path.write_text("\n".join(lines) + "\n")

    meta = {
        "ts": record.ts,
        "sample_rate": record.sample_rate,
        "fault_start_sample": record.fault_start_sample,
        "fault_end_sample": record.fault_end_sample,
        "faulted_phase": record.faulted_phase,
    }
    if record.extra:
        meta["extra"] = record.extra
    meta_path_for(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_waveform_csv(path, ts: Optional[int] = None) -> WaveformRecord:
    """Load a waveform CSV. Metadata comes from the sidecar when it exists.

    Without a sidecar ``ts`` must be given and the record is unlabeled.
    """
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    if not header or header[0] != "sample_index" or len(header) < 2:
        raise ConfigurationError(f"{path}: header must start with 'sample_index' and name at least one phase")
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=float)
    if body.shape[1] != len(header):
        raise ShapeError(f"{path}: expected {len(header)} columns, got {body.shape[1]}")
    phases = {name: body[:, k + 1] for k, name in enumerate(header[1:])}

    meta_file = meta_path_for(path)
    meta = json.loads(meta_file.read_text()) if meta_file.exists() else {}
    if ts is not None and meta.get("ts") not in (None, ts):
        raise ConfigurationError(f"{path}: ts={meta['ts']} in sidecar does not match expected ts={ts}")
    record_ts = meta.get("ts", ts)
    if record_ts is None:
        raise ConfigurationError(f"{path}: no .meta sidecar and no ts given")
    return WaveformRecord(
        ts=int(record_ts),
        phases=phases,
        sample_rate=float(meta.get("sample_rate") or 0.0),
        fault_start_sample=meta.get("fault_start_sample"),
        fault_end_sample=meta.get("fault_end_sample"),
        faulted_phase=meta.get("faulted_phase"),
        extra=meta.get("extra", {}),
    )
