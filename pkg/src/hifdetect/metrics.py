"""Case-level detection quality: confusion counts, the five relay metrics and reports.

Metrics are percentages. A metric whose denominator is zero is reported as
``None`` (shown as ``n/a``) rather than a made-up 0 or 100.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .errors import InvalidInputError

METRIC_NAMES = ("Acc", "Sec", "Dep", "Saf", "Sen")
NOT_APPLICABLE = "n/a"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise InvalidInputError(f"{name} must be a nonnegative integer, got {value!r}")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn)


def _pct(num: int, den: int) -> Optional[float]:
    return None if den == 0 else 100.0 * num / den


def compute(counts: ConfusionCounts) -> dict[str, Optional[float]]:
    """Accuracy, security, dependability, safety and sensitivity in percent.

    Acc = (TP+TN)/total, Sec = TN/(TN+FP), Dep = TP/(TP+FN),
    Saf = TN/(TN+FN), Sen = TP/(TP+FP).
    """
    c = counts
    if c.total == 0:
        raise InvalidInputError("confusion counts are all zero")
    return {
        "Acc": _pct(c.tp + c.tn, c.total),
        "Sec": _pct(c.tn, c.tn + c.fp),
        "Dep": _pct(c.tp, c.tp + c.fn),
        "Saf": _pct(c.tn, c.tn + c.fn),
        "Sen": _pct(c.tp, c.tp + c.fp),
    }


@dataclass(frozen=True)
class CaseLabel:
    """Ground truth for one recording; times in seconds."""
    name: str
    faulted_phase: Optional[str] = None
    fault_start_s: Optional[float] = None
    fault_end_s: Optional[float] = None

    @property
    def is_faulted(self) -> bool:
        return self.faulted_phase is not None


@dataclass
class CaseOutcome:
    name: str
    label: str        # "TP", "TN", "FP" or "FN"
    reason: str


def score_case(label: CaseLabel, first_trip_s: Mapping[str, Optional[float]],
               grace_s: float = 10.0) -> CaseOutcome:
    """Classify one recording from its per-phase first trip times (None = no trip).

    A fault case is TP only when the faulted phase trips inside
    ``[start, end + grace)`` and no other phase trips. Any other trip is FP.
    """
    tripped = {p: t for p, t in first_trip_s.items() if t is not None}
    if not label.is_faulted:
        if tripped:
            return CaseOutcome(label.name, "FP", f"trip on load recording: {sorted(tripped)}")
        return CaseOutcome(label.name, "TN", "no trip")
    if label.faulted_phase not in first_trip_s:
        raise InvalidInputError(f"{label.name}: no detector output for faulted phase {label.faulted_phase!r}")
    healthy = sorted(p for p in tripped if p != label.faulted_phase)
    if healthy:
        return CaseOutcome(label.name, "FP", f"trip on healthy phase(s) {healthy}")
    t = tripped.get(label.faulted_phase)
    if t is None:
        return CaseOutcome(label.name, "FN", "faulted phase did not trip")
    if t < label.fault_start_s:
        return CaseOutcome(label.name, "FP", f"faulted phase tripped at {t:.3f} s, before fault onset")
    if t >= label.fault_end_s + grace_s:
        return CaseOutcome(label.name, "FN", f"faulted phase tripped at {t:.3f} s, after window and grace")
    return CaseOutcome(label.name, "TP", f"faulted phase tripped at {t:.3f} s")


def score_corpus(labels: Sequence[CaseLabel], trips: Mapping[str, Mapping[str, Optional[float]]],
                 grace_s: float = 10.0) -> tuple[ConfusionCounts, list[CaseOutcome]]:
    """Score every labeled recording; ``trips`` maps recording name to per-phase first trip times."""
    if grace_s < 0:
        raise InvalidInputError(f"grace period must be nonnegative, got {grace_s}")
    names = [lab.name for lab in labels]
    if len(set(names)) != len(names):
        raise InvalidInputError("duplicate recording names in labels")
    missing = sorted(set(names) - set(trips))
    extra = sorted(set(trips) - set(names))
    if missing or extra:
        raise InvalidInputError(f"labels and detector summaries disagree: missing={missing} unexpected={extra}")
    outcomes = [score_case(lab, trips[lab.name], grace_s) for lab in labels]
    tally = {k: sum(o.label == k for o in outcomes) for k in ("TP", "TN", "FP", "FN")}
    return ConfusionCounts(tally["TP"], tally["TN"], tally["FP"], tally["FN"]), outcomes


def format_percent(value: Optional[float]) -> str:
    """One decimal, trailing ``.0`` dropped: 68.97 -> '69%', 62.5 -> '62.5%', None -> 'n/a'."""
    if value is None:
        return NOT_APPLICABLE
    text = f"{value:.1f}"
    if text.endswith(".0"):
        text = text[:-2]
    return text + "%"


def format_table(rows: Mapping[str, Mapping[str, Optional[float]]]) -> str:
    """Aligned plain-text table, one row per method, columns Acc Sec Dep Saf Sen."""
    header = ["Method", *METRIC_NAMES]
    body = [[name, *(format_percent(m[k]) for k in METRIC_NAMES)] for name, m in rows.items()]
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]

    def line(cells):
        first = cells[0].ljust(widths[0])
        return "  ".join([first, *(c.rjust(w) for c, w in zip(cells[1:], widths[1:]))]).rstrip()

    rule = "-" * len(line(header))
    return "\n".join([line(header), rule, *(line(r) for r in body)]) + "\n"


def report(counts: ConfusionCounts, outcomes: Sequence[CaseOutcome] = (), method: str = "AE + PCA",
           **context) -> dict:
    """Structured report document: counts, full-precision metrics, display strings and cases."""
    values = compute(counts)
    return {
        "method": method,
        "counts": asdict(counts),
        "metrics": values,
        "display": {k: format_percent(v) for k, v in values.items()},
        "cases": [asdict(o) for o in outcomes],
        **context,
    }


def write_report(doc: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=1, allow_nan=False) + "\n")
    return path
