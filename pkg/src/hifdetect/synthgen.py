"""Seeded synthetic three-phase load currents with optional high-impedance-fault distortion.

Load currents are a modulated fundamental plus harmonics, white noise and
sparse switching spikes. A fault adds an arc-like current to one phase: it
follows the phase's own fundamental, is suppressed near zero crossings, has a
random magnitude per half cycle, is asymmetric between positive and negative
half cycles, builds up over a few cycles and drops out on random cycles.

All randomness comes from ``numpy.random.default_rng(seed)`` (PCG64).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError
from .signal_prep import PHASES, WaveformRecord

PHASE_ANGLES = (0.0, -2.0 * math.pi / 3.0, 2.0 * math.pi / 3.0)
RNG_NAME = "numpy.PCG64"


@dataclass(frozen=True)
class LoadProfile:
    amplitude: float = 100.0           # peak of the fundamental, A
    frequency: float = 60.0
    harmonics: tuple = ((3, 0.03, 0.0), (5, 0.015, 0.0))  # (order, relative amplitude, phase rad)
    mod_depth: float = 0.1
    mod_period_cycles: float = 600.0
    noise_std: float = 1.0             # A
    spike_rate: float = 2.0            # spikes per 1000 cycles and phase
    spike_magnitude: tuple = (20.0, 60.0)
    unbalance: tuple = (1.0, 0.9, 1.1)
    harmonic_drift: float = 0.0        # relative swing of harmonic amplitude and phase (rad)
    drift_period_cycles: float = 900.0
    quantum: float = 1e-3              # ADC resolution, A; 0 disables rounding
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "harmonics", tuple(tuple(h) for h in self.harmonics))
        object.__setattr__(self, "spike_magnitude", tuple(self.spike_magnitude))
        object.__setattr__(self, "unbalance", tuple(self.unbalance))
        checks = [
            (self.amplitude >= 0, "amplitude"),
            (self.frequency > 0, "frequency"),
            (0 <= self.mod_depth < 1, "mod_depth"),
            (self.mod_period_cycles > 0, "mod_period_cycles"),
            (self.noise_std >= 0, "noise_std"),
            (self.spike_rate >= 0, "spike_rate"),
            (len(self.spike_magnitude) == 2 and 0 <= self.spike_magnitude[0] <= self.spike_magnitude[1],
             "spike_magnitude"),
            (len(self.unbalance) == 3 and all(u >= 0 for u in self.unbalance), "unbalance"),
            (0 <= self.harmonic_drift < 1, "harmonic_drift"),
            (self.drift_period_cycles > 0, "drift_period_cycles"),
            (self.quantum >= 0, "quantum"),
        ]
        for order_amp_phase in self.harmonics:
            if len(order_amp_phase) != 3:
                checks.append((False, "harmonics"))
                continue
            order, rel, _ = order_amp_phase
            checks.append((int(order) == order and order >= 2 and rel >= 0, "harmonics"))
        for ok, name in checks:
            if not ok:
                raise ConfigurationError(f"invalid load profile field {name!r}")


@dataclass(frozen=True)
class HifConfig:
    start_s: float = 100.0
    end_s: float = 160.0
    phase: str = "phase_a"
    magnitude: float = 0.3             # fraction of the phase's fundamental peak
    asymmetry: float = 0.3             # +/- fraction between half-cycle polarities
    randomness: float = 0.3            # std of the per-half-cycle magnitude factor
    dead_zone: float = 0.3             # arc is extinct while |sin| < dead_zone
    buildup_cycles: int = 10
    dropout_prob: float = 0.02
    quantum: float = 1e-3              # output resolution (A) inside the window
    seed: int = 0

    def __post_init__(self):
        checks = [
            (0 <= self.start_s < self.end_s, "start_s"),
            (self.magnitude >= 0, "magnitude"),
            (0 <= self.asymmetry <= 1, "asymmetry"),
            (self.randomness >= 0, "randomness"),
            (0 <= self.dead_zone < 1, "dead_zone"),
            (self.buildup_cycles >= 0, "buildup_cycles"),
            (0 <= self.dropout_prob <= 1, "dropout_prob"),
            (self.quantum >= 0, "quantum"),
        ]
        for ok, name in checks:
            if not ok:
                raise ConfigurationError(f"invalid fault config field {name!r}")


def _quantize(x: np.ndarray, quantum: float) -> np.ndarray:
    if quantum <= 0:
        return x
    scale = 1.0 / quantum
    if abs(scale - round(scale)) < 1e-9 * scale:
        # k / scale is the double nearest the decimal, so CSV text stays short
        return np.round(x * round(scale)) / round(scale)
    return np.round(x / quantum) * quantum


def gen_load(profile: LoadProfile, duration_s: float, ts: int = 320) -> WaveformRecord:
    """Generate a three-phase normal-load recording of whole cycles."""
    n_cycles = int(round(duration_s * profile.frequency))
    if n_cycles < 1 or ts < 1:
        raise ConfigurationError("duration must cover at least one cycle and ts must be positive")
    fs = ts * profile.frequency
    n = n_cycles * ts
    rng = np.random.default_rng(profile.seed)
    omega_t = 2.0 * math.pi * profile.frequency * np.arange(n) / fs
    cycles = np.arange(n) / ts

    phases = {}
    for name, angle, scale in zip(PHASES, PHASE_ANGLES, profile.unbalance):
        mod_phase = rng.uniform(0.0, 2.0 * math.pi)
        envelope = 1.0 + profile.mod_depth * np.sin(2.0 * math.pi * cycles / profile.mod_period_cycles + mod_phase)
        wave = np.sin(omega_t + angle)
        for order, rel, ph in profile.harmonics:
            if profile.harmonic_drift > 0:
                # slowly changing load mix: amplitude and phase wander on incommensurate periods
                periods = profile.drift_period_cycles * rng.uniform(0.5, 1.5, size=2)
                offsets = rng.uniform(0.0, 2.0 * math.pi, size=2)
                rel = rel * (1.0 + profile.harmonic_drift * np.sin(2.0 * math.pi * cycles / periods[0] + offsets[0]))
                ph = ph + profile.harmonic_drift * np.sin(2.0 * math.pi * cycles / periods[1] + offsets[1])
            wave = wave + rel * np.sin(order * (omega_t + angle) + ph)
        x = scale * profile.amplitude * envelope * wave
        if profile.noise_std > 0:
            x = x + rng.normal(0.0, profile.noise_std, size=n)
        x = x + _spikes(rng, profile, n_cycles, ts, fs)
        phases[name] = _quantize(x, profile.quantum)
    return WaveformRecord(ts=ts, phases=phases, sample_rate=fs)


def _spikes(rng: np.random.Generator, profile: LoadProfile, n_cycles: int, ts: int, fs: float) -> np.ndarray:
    """Sparse damped-oscillation bursts (capacitor/load switching)."""
    out = np.zeros(n_cycles * ts)
    if profile.spike_rate <= 0:
        return out
    hits = np.flatnonzero(rng.random(n_cycles) < profile.spike_rate / 1000.0)
    lo, hi = profile.spike_magnitude
    width = max(ts // 8, 4)
    k = np.arange(width)
    # ~1 kHz ring decaying over about an eighth of a cycle
    shape = np.exp(-k / (width / 4.0)) * np.cos(2.0 * math.pi * 1000.0 * k / fs)
    for c in hits:
        start = c * ts + int(rng.integers(0, ts))
        amp = rng.uniform(lo, hi) * rng.choice((-1.0, 1.0))
        stop = min(start + width, out.size)
        out[start:stop] += amp * shape[: stop - start]
    return out


def _fundamental_phasor(x: np.ndarray, frequency: float, fs: float) -> complex:
    n = np.arange(x.size)
    return complex(2.0 / x.size * np.sum(x * np.exp(-2j * math.pi * frequency * n / fs)))


def inject_hif(record: WaveformRecord, config: HifConfig) -> WaveformRecord:
    """Return a copy of ``record`` with an arc-like fault current on one phase.

    Samples outside ``[start, end)`` and on every other phase are untouched.
    The returned record carries the fault window and phase as labels.
    """
    if config.phase not in record.phases:
        raise ConfigurationError(f"invalid fault config field 'phase': {config.phase!r} not in record")
    fs = record.sample_rate
    start = int(round(config.start_s * fs))
    end = int(round(config.end_s * fs))
    if not 0 <= start < end <= len(record):
        raise ConfigurationError(
            f"invalid fault config field 'end_s': window [{config.start_s}, {config.end_s}) s "
            f"exceeds recording of {len(record) / fs:g} s")

    base = np.asarray(record.phases[config.phase])
    ts = record.ts
    freq = record.frequency
    phasor = _fundamental_phasor(base[: (len(base) // ts) * ts], freq, fs)
    peak = abs(phasor)
    theta0 = math.atan2(phasor.real, -phasor.imag)  # x ~ peak*sin(wt + theta0)

    rng = np.random.default_rng(config.seed)
    n = np.arange(start, end)
    theta = 2.0 * math.pi * freq * n / fs + theta0
    half = np.floor(theta / math.pi).astype(np.int64)
    half -= half[0]
    n_halves = int(half[-1]) + 1
    polarity = np.sign(np.sin(theta))
    factor = np.maximum(1.0 + config.randomness * rng.standard_normal(n_halves), 0.0)

    cycle = (n - start) // ts
    n_fault_cycles = int(cycle[-1]) + 1
    dropout = rng.random(n_fault_cycles) < config.dropout_prob
    ramp = np.minimum(1.0, (np.arange(n_fault_cycles) + 1.0) / max(config.buildup_cycles, 1))
    gain = np.where(dropout, 0.0, ramp)

    s = np.sin(theta)
    shaped = np.sign(s) * np.maximum(np.abs(s) - config.dead_zone, 0.0) / (1.0 - config.dead_zone)
    asym = 1.0 + config.asymmetry * polarity
    arc = config.magnitude * peak * factor[half] * asym * gain[cycle] * shaped

    phases = {name: np.array(values) for name, values in record.phases.items()}
    if config.magnitude > 0:
        phases[config.phase][start:end] = _quantize(base[start:end] + arc, config.quantum)
    extra = dict(record.extra)
    extra["hif"] = {"magnitude": config.magnitude, "seed": config.seed,
                    "start_s": config.start_s, "end_s": config.end_s}
    return WaveformRecord(ts=ts, phases=phases, sample_rate=fs, fault_start_sample=start,
                          fault_end_sample=end, faulted_phase=config.phase, extra=extra)


# harmonic signature shared by every load on the simulated feeder
FEEDER_HARMONICS = ((3, 0.03, 0.0), (5, 0.015, 0.3), (7, 0.007, -0.2))


def random_profile(seed: int, frequency: float = 60.0) -> LoadProfile:
    """Draw a load profile from the default feeder family; ``seed`` also seeds its waveform."""
    rng = np.random.default_rng([seed, 7919])
    amplitude = rng.uniform(99.0, 101.0)
    harmonics = tuple((order, rel * rng.uniform(0.8, 1.2), ph + rng.uniform(-0.1, 0.1))
                      for order, rel, ph in FEEDER_HARMONICS)
    return LoadProfile(
        amplitude=amplitude,
        frequency=frequency,
        harmonics=harmonics,
        mod_depth=rng.uniform(0.30, 0.31),
        mod_period_cycles=rng.uniform(300.0, 1200.0),
        noise_std=amplitude * rng.uniform(0.0175, 0.018),
        spike_rate=rng.uniform(0.5, 3.0),
        spike_magnitude=(0.2 * amplitude, 0.6 * amplitude),
        unbalance=tuple(rng.uniform(0.99, 1.01, size=3)),
        harmonic_drift=0.3,
        drift_period_cycles=rng.uniform(300.0, 1200.0),
        seed=seed,
    )


DEFAULT_SEVERITIES = (0.0, 0.1, 0.2, 0.3)


@dataclass
class CorpusEntry:
    name: str
    kind: str                # "load" or "fault"
    record: WaveformRecord
    seed: int
    severity: Optional[float] = None


@dataclass(frozen=True)
class CorpusConfig:
    n_load_profiles: int = 4
    n_fault_cases: int = 12
    base_seed: int = 0
    ts: int = 320
    frequency: float = 60.0
    load_duration_s: float = 240.0
    fault_record_s: float = 240.0
    hif: HifConfig = field(default_factory=HifConfig)
    severities: tuple = DEFAULT_SEVERITIES

    def __post_init__(self):
        object.__setattr__(self, "severities", tuple(float(s) for s in self.severities))
        if self.n_load_profiles < 1 or self.n_fault_cases < 1:
            raise ConfigurationError("invalid corpus config field 'n_load_profiles'/'n_fault_cases': must be >= 1")
        if not self.severities or any(s < 0 for s in self.severities):
            raise ConfigurationError("invalid corpus config field 'severities'")
        if self.hif.end_s > self.fault_record_s:
            raise ConfigurationError(
                f"invalid corpus config field 'hif.end_s': fault ends at {self.hif.end_s} s "
                f"after the {self.fault_record_s} s recording")


def corpus_seeds(base_seed: int, count: int) -> list[int]:
    return [int(s) for s in np.random.default_rng(base_seed).integers(0, 2**31 - 1, size=count)]


def make_corpus(config: CorpusConfig = CorpusConfig()) -> list[CorpusEntry]:
    """Load recordings followed by fault recordings cycling through the severity grid."""
    seeds = corpus_seeds(config.base_seed, config.n_load_profiles + 2 * config.n_fault_cases)
    entries = []
    for i in range(config.n_load_profiles):
        seed = seeds[i]
        record = gen_load(random_profile(seed, config.frequency), config.load_duration_s, config.ts)
        entries.append(CorpusEntry(f"load_{i:02d}", "load", record, seed))
    for k in range(config.n_fault_cases):
        seed = seeds[config.n_load_profiles + 2 * k]
        fault_seed = seeds[config.n_load_profiles + 2 * k + 1]
        severity = config.severities[k % len(config.severities)]
        base = gen_load(random_profile(seed, config.frequency), config.fault_record_s, config.ts)
        hif = replace(config.hif, magnitude=severity, seed=fault_seed)
        entries.append(CorpusEntry(f"fault_{k:02d}", "fault", inject_hif(base, hif), seed, severity))
    return entries


def rms_by_phase(record: WaveformRecord) -> dict[str, float]:
    return {name: float(np.sqrt(np.mean(np.square(v)))) for name, v in record.phases.items()}


def severity_grid(n: int, severities: Sequence[float] = DEFAULT_SEVERITIES) -> list[float]:
    return [severities[k % len(severities)] for k in range(n)]
