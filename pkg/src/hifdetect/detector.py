"""Streaming per-phase detection with an abnormal-cycle counter and latched trip.

Each cycle's combined index is compared with the stored limit. The counter
goes up by one on an exceedance and down by one (never below zero) otherwise;
once it reaches the threshold the phase trips and stays tripped until reset.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, InsufficientDataError, InvalidInputError, ShapeError
from .pipeline import MonitorModels, phi_values
from .signal_prep import WaveformRecord

log = logging.getLogger(__name__)

TRACE_HEADER = "cycle_index,phi,limit,above,counter,trip"


@dataclass
class DetectorState:
    phase: str
    counter: int = 0
    tripped: bool = False
    cycle_index: int = 0


@dataclass(frozen=True)
class DetectionOutput:
    cycle_index: int
    phi: float
    limit: float
    above_limit: bool
    counter: int
    trip_issued: bool


def update(state: DetectorState, phi: float, limit: float, threshold: int) -> DetectionOutput:
    """Advance ``state`` by one evaluated cycle."""
    above = bool(phi > limit)
    state.counter = state.counter + 1 if above else max(state.counter - 1, 0)
    if state.counter >= threshold:
        state.tripped = True
    out = DetectionOutput(state.cycle_index, float(phi), float(limit), above, state.counter, state.tripped)
    state.cycle_index += 1
    return out


def reset(state: DetectorState) -> DetectorState:
    state.counter = 0
    state.tripped = False
    return state


def _check_threshold(threshold: int) -> None:
    if int(threshold) != threshold or threshold < 1:
        raise ConfigurationError(f"threshold must be a positive integer, got {threshold!r}")


def process_cycle(state: DetectorState, models: MonitorModels, cycle, threshold: int = 60) -> DetectionOutput:
    """Evaluate one cycle of ``ts`` raw samples.

    A cycle with non-finite samples raises :class:`InvalidInputError` and
    leaves ``state`` untouched.
    """
    _check_threshold(threshold)
    cycle = np.asarray(cycle, dtype=float)
    if cycle.shape != (models.ts,):
        raise ShapeError(f"expected {models.ts} samples per cycle, got shape {cycle.shape}")
    if not np.all(np.isfinite(cycle)):
        raise InvalidInputError(f"phase {state.phase}, cycle {state.cycle_index}: non-finite samples")
    phi = phi_values(models, cycle[:: models.config.gap])[0]
    return update(state, phi, models.phi_limit, threshold)


@dataclass
class RecordingResult:
    ts: int
    sample_rate: float
    threshold: int
    outputs: dict[str, list[DetectionOutput]]
    events: list[dict] = field(default_factory=list)

    @property
    def tripped(self) -> dict[str, bool]:
        return {p: bool(outs) and outs[-1].trip_issued for p, outs in self.outputs.items()}

    @property
    def first_trip_cycle(self) -> dict[str, int | None]:
        first = {}
        for phase, outs in self.outputs.items():
            first[phase] = next((o.cycle_index for o in outs if o.trip_issued), None)
        return first

    def cycle_end_time(self, cycle_index: int) -> float:
        """Time (s) at which a cycle is complete, i.e. when its decision is available."""
        return (cycle_index + 1) * self.ts / self.sample_rate

    @property
    def first_trip_time(self) -> dict[str, float | None]:
        return {p: None if c is None else self.cycle_end_time(c) for p, c in self.first_trip_cycle.items()}

    @property
    def any_trip(self) -> bool:
        return any(self.tripped.values())


def run_phase(samples, models: MonitorModels, threshold: int, phase: str,
              events: list | None = None) -> list[DetectionOutput]:
    """Run a fresh detector over every complete cycle of one phase."""
    ts = models.ts
    samples = np.asarray(samples, dtype=float)
    n = samples.size // ts
    cycles = samples[: n * ts].reshape(n, ts)
    finite = np.all(np.isfinite(cycles), axis=1)
    phi = np.full(n, np.nan)
    if finite.any():
        phi[finite] = phi_values(models, cycles[finite][:, :: models.config.gap])

    state = DetectorState(phase)
    outputs = []
    for i in range(n):
        if not finite[i]:
            event = {"event": "skipped_cycle", "phase": phase, "cycle_index": i,
                     "reason": "non-finite samples"}
            log.warning("phase %s cycle %d skipped: non-finite samples", phase, i)
            if events is not None:
                events.append(event)
            state.cycle_index += 1
            continue
        was_tripped = state.tripped
        out = update(state, phi[i], models.phi_limit, threshold)
        outputs.append(out)
        if out.trip_issued and not was_tripped and events is not None:
            events.append({"event": "trip", "phase": phase, "cycle_index": i, "counter": out.counter})
    return outputs


def run_recording(record: WaveformRecord, models: MonitorModels, threshold: int = 60) -> RecordingResult:
    """Detect on each phase independently with shared models and fresh states."""
    _check_threshold(threshold)
    if record.ts != models.ts:
        raise ConfigurationError(f"recording ts={record.ts} differs from model ts={models.ts}")
    if len(record) < record.ts:
        raise InsufficientDataError("recording is shorter than one cycle")
    events: list[dict] = []
    outputs = {phase: run_phase(values, models, threshold, phase, events)
               for phase, values in record.phases.items()}
    result = RecordingResult(record.ts, record.sample_rate, threshold, outputs, events)
    for event in events:
        if event["event"] == "trip":
            event["time_s"] = result.cycle_end_time(event["cycle_index"])
    return result


def write_trace_csv(outputs: list[DetectionOutput], path) -> Path:
    path = Path(path)
    lines = [TRACE_HEADER]
    lines.extend(f"{o.cycle_index},{o.phi!r},{o.limit!r},{int(o.above_limit)},{o.counter},{int(o.trip_issued)}"
                 for o in outputs)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_trace_csv(path) -> list[DetectionOutput]:
    rows = Path(path).read_text().splitlines()
    if not rows or rows[0] != TRACE_HEADER:
        raise ShapeError(f"{path}: unexpected trace header")
    out = []
    for row in rows[1:]:
        c, phi, lim, above, counter, trip = row.split(",")
        out.append(DetectionOutput(int(c), float(phi), float(lim), above == "1", int(counter), trip == "1"))
    return out


def write_event_log(events: list[dict], path) -> Path:
    path = Path(path)
    path.write_text("".join(json.dumps(e, sort_keys=True) + "\n" for e in events))
    return path
