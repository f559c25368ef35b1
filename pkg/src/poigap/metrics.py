"""Error and hit-rate metrics for gap predictions."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np


def _pair(pred, gap) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    gap = np.asarray(gap, dtype=np.float64).ravel()
    if len(pred) != len(gap):
        raise ValueError(f"length mismatch: {len(pred)} predictions, {len(gap)} targets")
    if len(pred) == 0:
        raise ValueError("metrics need at least one item")
    return pred, gap


def mae(pred, gap) -> float:
    pred, gap = _pair(pred, gap)
    return float(np.mean(np.abs(gap - pred)))


def rmse(pred, gap) -> float:
    pred, gap = _pair(pred, gap)
    return float(np.sqrt(np.mean((gap - pred) ** 2)))


def accuracy(pred, gap, hit_tolerance: float = 1.0) -> float:
    """Share of items predicted within ``hit_tolerance`` of the true gap."""
    if hit_tolerance < 0:
        raise ValueError("hit_tolerance must be >= 0")
    pred, gap = _pair(pred, gap)
    return float(np.mean(np.abs(pred - gap) <= hit_tolerance))


def _ratio(a: int, b: int) -> float:
    return a / b if b else 0.0


def f1(pred, gap, shortage_threshold: float = 1.0) -> tuple[float, float, float]:
    """(precision, recall, f1) of the binary event ``value >= shortage_threshold``."""
    if shortage_threshold < 0:
        raise ValueError("shortage_threshold must be >= 0")
    pred, gap = _pair(pred, gap)
    p = pred >= shortage_threshold
    t = gap >= shortage_threshold
    tp = int(np.sum(p & t))
    precision = _ratio(tp, int(p.sum()))
    recall = _ratio(tp, int(t.sum()))
    denom = precision + recall
    return precision, recall, (2 * precision * recall / denom if denom else 0.0)


@dataclass
class EvalReport:
    mae: float
    rmse: float
    accuracy: float
    precision: float
    recall: float
    f1: float
    n: int
    hit_tolerance: float
    shortage_threshold: float

    def to_json(self, **extra) -> str:
        return json.dumps({**asdict(self), **extra}, indent=1, sort_keys=True)


def evaluate(pred, gap, hit_tolerance: float = 1.0, shortage_threshold: float = 1.0) -> EvalReport:
    precision, recall, f = f1(pred, gap, shortage_threshold)
    return EvalReport(
        mae=mae(pred, gap), rmse=rmse(pred, gap), accuracy=accuracy(pred, gap, hit_tolerance),
        precision=precision, recall=recall, f1=f, n=len(np.ravel(pred)),
        hit_tolerance=float(hit_tolerance), shortage_threshold=float(shortage_threshold))


def average_reports(reports: list[EvalReport]) -> EvalReport:
    if not reports:
        raise ValueError("no reports to average")
    fields = ("mae", "rmse", "accuracy", "precision", "recall", "f1")
    mean = {f: float(np.mean([getattr(r, f) for r in reports])) for f in fields}
    first = reports[0]
    return EvalReport(**mean, n=first.n, hit_tolerance=first.hit_tolerance,
                      shortage_threshold=first.shortage_threshold)
