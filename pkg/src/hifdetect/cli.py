"""Command-line entry point: ``hifdetect simulate | train | detect | evaluate``.

Exit codes: 0 success (a trip is a result, not a failure), 1 runtime
failure, 2 configuration or validation failure. ``HIFDETECT_SEED`` overrides
the default seed of ``simulate`` and ``train``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path

from . import __version__
from . import autoencoder as ae
from . import detector, metrics, pipeline, synthgen
from .errors import (ConfigurationError, HifError, InvalidInputError, ModelFileError, ShapeError)
from .signal_prep import read_waveform_csv, write_waveform_csv

log = logging.getLogger("hifdetect")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
SEED_ENV = "HIFDETECT_SEED"
MANIFEST_FORMAT = "hifdetect-corpus"
MANIFEST_VERSION = 1


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def parse_layers(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(p) for p in text.replace(",", "-").split("-"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"layers must look like 32-15-10-15-32, got {text!r}") from None
    if len(dims) < 3:
        raise argparse.ArgumentTypeError("need at least input, one hidden and output layer")
    return dims


# --------------------------------------------------------------------------
# simulate

def _build_dataclass(cls, doc: dict, where: str):
    if not isinstance(doc, dict):
        raise ConfigurationError(f"invalid config field {where!r}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigurationError(f"invalid config field {where + '.' if where else ''}{unknown[0]!r}: unknown key")
    try:
        return cls(**doc)
    except TypeError as exc:
        raise ConfigurationError(f"invalid config in {where or 'top level'!r}: {exc}") from exc


def corpus_config_from_json(doc: dict, seed_override: int | None = None) -> synthgen.CorpusConfig:
    doc = dict(doc)
    hif = _build_dataclass(synthgen.HifConfig, doc.pop("hif", {}), "hif")
    if "severities" in doc:
        doc["severities"] = tuple(doc["severities"])
    doc.setdefault("base_seed", default_seed())
    if seed_override is not None:
        doc["base_seed"] = seed_override
    return _build_dataclass(synthgen.CorpusConfig, {**doc, "hif": hif}, "")


def write_corpus(entries, config: synthgen.CorpusConfig, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    listed = []
    for entry in entries:
        csv = write_waveform_csv(entry.record, out_dir / f"{entry.name}.csv")
        rec = entry.record
        item = {"name": entry.name, "kind": entry.kind, "file": csv.name,
                "meta": csv.with_suffix(".meta").name, "seed": entry.seed, "severity": entry.severity,
                "faulted_phase": rec.faulted_phase, "fault_start_s": None, "fault_end_s": None}
        if rec.is_faulted:
            item["fault_start_s"] = rec.fault_start_sample / rec.sample_rate
            item["fault_end_s"] = rec.fault_end_sample / rec.sample_rate
        listed.append(item)
    cfg = asdict(config)
    manifest = {"format": MANIFEST_FORMAT, "format_version": MANIFEST_VERSION,
                "rng": {"generator": synthgen.RNG_NAME, "base_seed": config.base_seed},
                "config": cfg, "recordings": listed}
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1) + "\n")
    return path


def cmd_simulate(args) -> int:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{args.config}: not valid JSON ({exc})") from exc
    config = corpus_config_from_json(doc, args.seed)
    entries = synthgen.make_corpus(config)
    manifest = write_corpus(entries, config, Path(args.output))
    n_load = sum(e.kind == "load" for e in entries)
    print(f"wrote {n_load} load and {len(entries) - n_load} fault recordings; manifest {manifest}")
    return EXIT_OK


# --------------------------------------------------------------------------
# train

def cmd_train(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    train_cfg = ae.TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch, seed=seed)
    config = pipeline.PipelineConfig(ts=args.ts, m_vars=args.vars, layer_dims=args.layers, train=train_cfg,
                                     train_fraction=args.train_fraction, cpv_target=args.cpv,
                                     alpha=args.alpha, threshold=args.threshold)
    records = []
    for path in args.recordings:
        rec = read_waveform_csv(path, ts=args.ts)
        if rec.is_faulted:
            log.warning("%s is labeled as faulted; training assumes normal load", path)
        records.append(rec)
    models, summary = pipeline.train_pipeline(records, config)
    pipeline.save_model(models, args.output, summary)
    mon = models.monitor
    print(f"training rows: {summary.n_rows} ({summary.n_train} train / {summary.n_validation} validation)")
    print(f"final loss: train {summary.final_train_loss:.6g}  validation {summary.final_validation_loss:.6g}")
    print(f"PCA: l={mon.n_components}  g={mon.g:.6g}  h={mon.h:.6g}")
    print(f"limits (alpha={mon.alpha}): T2={mon.t2_limit:.6g}  SPE={mon.spe_limit:.6g}  phi={mon.phi_limit:.6g}")
    print(f"model written to {args.output}")
    return EXIT_OK


# --------------------------------------------------------------------------
# detect

def _threshold(args, models: pipeline.MonitorModels) -> int:
    return models.config.threshold if args.threshold is None else args.threshold


def summarize(result: detector.RecordingResult) -> dict:
    times = result.first_trip_time
    cycles = result.first_trip_cycle
    return {"threshold": result.threshold,
            "phases": {p: {"tripped": result.tripped[p], "first_trip_cycle": cycles[p],
                           "first_trip_time_s": times[p]} for p in result.outputs}}


def cmd_detect(args) -> int:
    models = pipeline.load_model(args.model)
    record = read_waveform_csv(args.recording, ts=models.ts)
    result = detector.run_recording(record, models, _threshold(args, models))
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for phase, outputs in result.outputs.items():
        detector.write_trace_csv(outputs, out / f"trace_{phase}.csv")
    detector.write_event_log(result.events, out / "events.jsonl")
    summary = summarize(result)
    (out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    for phase, s in summary["phases"].items():
        if s["tripped"]:
            print(f"{phase}: TRIP at {s['first_trip_time_s']:.3f} s (cycle {s['first_trip_cycle']})")
        else:
            print(f"{phase}: no trip")
    return EXIT_OK


# --------------------------------------------------------------------------
# evaluate

def load_manifest(path: Path) -> dict:
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc
    if doc.get("format") != MANIFEST_FORMAT or doc.get("format_version") != MANIFEST_VERSION:
        raise ConfigurationError(f"{path}: not a {MANIFEST_FORMAT} v{MANIFEST_VERSION} manifest")
    missing = [item["file"] for item in doc["recordings"] if not (path.parent / item["file"]).exists()]
    if missing:
        raise FileNotFoundError(f"manifest references missing recordings: {', '.join(missing)}")
    return doc


def cmd_evaluate(args) -> int:
    models = pipeline.load_model(args.model)
    manifest_path = Path(args.manifest)
    manifest = load_manifest(manifest_path)
    threshold = _threshold(args, models)
    labels, trips = [], {}
    for item in manifest["recordings"]:
        record = read_waveform_csv(manifest_path.parent / item["file"], ts=models.ts)
        result = detector.run_recording(record, models, threshold)
        trips[item["name"]] = result.first_trip_time
        if record.is_faulted:
            fs = record.sample_rate
            labels.append(metrics.CaseLabel(item["name"], record.faulted_phase,
                                            record.fault_start_sample / fs, record.fault_end_sample / fs))
        else:
            labels.append(metrics.CaseLabel(item["name"]))
        log.info("%s: %s", item["name"], result.first_trip_time)
    counts, outcomes = metrics.score_corpus(labels, trips, args.grace)
    doc = metrics.report(counts, outcomes, threshold=threshold, grace_s=args.grace,
                         model=str(args.model), manifest=str(manifest_path))
    table = metrics.format_table({doc["method"]: doc["metrics"]})
    print(table, end="")
    print(f"TP={counts.tp} TN={counts.tn} FP={counts.fp} FN={counts.fn}")
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        metrics.write_report(doc, out / "report.json")
        (out / "metrics.txt").write_text(table)
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hifdetect", description="High-impedance fault detection on current waveforms")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a labeled synthetic corpus")
    p.add_argument("--config", help="JSON corpus config (fields of CorpusConfig, 'hif' nested)")
    p.add_argument("--output", "-o", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="base seed (overrides config and $%s)" % SEED_ENV)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="fit scaler, autoencoder and PCA monitor on load recordings")
    p.add_argument("recordings", nargs="+", help="waveform CSV files of normal load")
    p.add_argument("--ts", type=int, default=320, help="samples per cycle")
    p.add_argument("--vars", type=int, default=32, help="variables per cycle (M)")
    p.add_argument("--layers", type=parse_layers, default=ae.DEFAULT_LAYERS, help="e.g. 32-15-10-15-32")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--cpv", type=float, default=0.95, help="cumulative percent variance target (fraction)")
    p.add_argument("--alpha", type=float, default=0.99, help="control limit confidence")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--threshold", type=int, default=60, help="trip counter threshold stored in the model")
    p.add_argument("--output", "-o", required=True, help="model file to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="run the detector on one recording")
    p.add_argument("model")
    p.add_argument("recording")
    p.add_argument("--threshold", type=int, default=None, help="override the model's counter threshold")
    p.add_argument("--output", "-o", required=True, help="directory for traces, events and summary")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="score a model on a labeled corpus")
    p.add_argument("model")
    p.add_argument("manifest")
    p.add_argument("--threshold", type=int, default=None)
    p.add_argument("--grace", type=float, default=10.0, help="seconds after fault end still counted as TP")
    p.add_argument("--output", "-o", default=None, help="directory for report.json and metrics.txt")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ModelFileError, InvalidInputError, ShapeError) as exc:
        print(f"hifdetect: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HifError, OSError) as exc:
        print(f"hifdetect: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
