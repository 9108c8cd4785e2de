"""Per-packet confusion matrix, detection scores and report rendering.

Positive class is an attack packet; a Drop verdict is a positive prediction.
Ratios with a zero denominator are undefined (None), never 0.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from .packet import Truth
from .pipeline import Verdict

FORMATS = ("json", "csv", "table")
CSV_HEADER = ["scenario", "accuracy", "precision", "recall", "f1"]


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Scores:
    accuracy: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]


def evaluate(pairs: Iterable[Tuple[Truth, Verdict]]) -> ConfusionMatrix:
    tp = fp = tn = fn = 0
    for truth, verdict in pairs:
        dropped = not verdict.accepted
        if truth.is_attack:
            if dropped:
                tp += 1
            else:
                fn += 1
        elif dropped:
            fp += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, fp, tn, fn)


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def scores(cm: ConfusionMatrix) -> Scores:
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    if precision is None or recall is None:
        f1 = None
    else:
        # 2pr/(p+r) reduced to integers; 0/0 only when tp == 0.
        f1 = _ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn)
        if cm.tp == 0:
            f1 = None
    return Scores(_ratio(cm.tp + cm.tn, cm.total), precision, recall, f1)


@dataclass
class ScenarioReport:
    scenario: int
    cm: ConfusionMatrix
    stages: Dict[str, Dict[str, int]] = field(default_factory=dict)
    name: str = ""
    packets: int = 0
    bindings: List[dict] = field(default_factory=list)

    @property
    def scores(self) -> Scores:
        return scores(self.cm)

    def to_dict(self) -> dict:
        s = self.scores
        return {
            "scenario": self.scenario,
            "name": self.name,
            "packets": self.packets,
            "confusion": {"tp": self.cm.tp, "fp": self.cm.fp, "tn": self.cm.tn, "fn": self.cm.fn},
            "accuracy": _pct_or_null(s.accuracy),
            "precision": _pct_or_null(s.precision),
            "recall": _pct_or_null(s.recall),
            "f1": _pct_or_null(s.f1),
            "stages": self.stages,
            "bindings": self.bindings,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioReport":
        return cls(
            scenario=d["scenario"],
            cm=ConfusionMatrix(**d["confusion"]),
            stages=d.get("stages", {}),
            name=d.get("name", ""),
            packets=d.get("packets", 0),
            bindings=d.get("bindings", []),
        )


def _pct(v: Optional[float]) -> str:
    return "—" if v is None else f"{100 * v:.2f}"


def _pct_or_null(v: Optional[float]):
    return None if v is None else round(100 * v, 2)


def render(reports: List[ScenarioReport], fmt: str = "table") -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown report format {fmt!r}; choose from {', '.join(FORMATS)}")
    reports = sorted(reports, key=lambda r: r.scenario)

    if fmt == "json":
        return json.dumps({"scenarios": [r.to_dict() for r in reports]}, indent=2, sort_keys=False) + "\n"

    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in reports:
            s = r.scores
            w.writerow([r.scenario] + ["" if v is None else f"{100 * v:.2f}" for v in (s.accuracy, s.precision, s.recall, s.f1)])
        return buf.getvalue()

    name_w = max([len("Attack Scenario")] + [len(f"{r.scenario}. {r.name}") for r in reports])
    lines = [f"{'Attack Scenario':<{name_w}}  {'Accuracy':>8}  {'Precision':>9}  {'Recall':>7}  {'F1':>7}"]
    lines.append("-" * len(lines[0]))
    for r in reports:
        s = r.scores
        label = f"{r.scenario}. {r.name}" if r.name else str(r.scenario)
        lines.append(
            f"{label:<{name_w}}  {_pct(s.accuracy):>8}  {_pct(s.precision):>9}  {_pct(s.recall):>7}  {_pct(s.f1):>7}"
        )
    return "\n".join(lines) + "\n"
