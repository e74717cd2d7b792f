"""Evaluation metrics and aggregation.

Point-wise AUC ROC (rank statistic with ties at 1/2), F1 after
point-adjust, and the binary archive score that asks whether the global
score argmax falls inside the true segment extended by
max(segment length, 100) steps on each side.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

METHOD_CLASS = {
    "rrcf": "classical",
    "rrcf@points": "classical",
    "rrcf@sequences": "classical",
    "merlin": "classical",
    "mdi": "classical",
    "ae": "deep-learning",
}

TOLERANCE_STEPS = 100


@dataclass(frozen=True)
class EvalRecord:
    series_name: str
    detector_id: str
    repetition: int
    seed: int
    auc_roc: float | None   # None when the truth has a single class
    f1: float
    ucr: int
    runtime_sec: float
    anomaly_type: str = "unknown"
    failed: bool = False
    failure_reason: str = ""


def auc_roc(scores, truth) -> float | None:
    """Probability a random positive outranks a random negative (ties 1/2).

    Returns None when only one class is present.
    """
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    if len(scores) != len(truth):
        raise ValueError("scores and truth must have equal length")
    n_pos = int(truth.sum())
    n_neg = len(truth) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores)
    u = ranks[truth].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def f1(labels, truth) -> tuple[float, float, float]:
    """(precision, recall, f1) from point-wise counts; all 0 when TP = 0."""
    labels = np.asarray(labels, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if len(labels) != len(truth):
        raise ValueError("labels and truth must have equal length")
    tp = int(np.sum(labels & truth))
    fp = int(np.sum(labels & ~truth))
    fn = int(np.sum(~labels & truth))
    if tp == 0:
        return 0.0, 0.0, 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return precision, recall, tp / (tp + 0.5 * (fp + fn))


def ucr_score(scores, a: int, b: int) -> int:
    """1 iff the score argmax lies strictly inside the extended segment.

    The segment [a, b] is widened on each side by max(segment length, 100);
    argmax ties break to the smallest index.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ValueError("scores must be nonempty")
    if not (0 <= a <= b < len(scores)):
        raise ValueError(f"invalid segment [{a}, {b}]")
    t_star = int(np.argmax(scores))
    seg_len = b - a
    lower = min(a - seg_len, a - TOLERANCE_STEPS)
    upper = max(b + seg_len, b + TOLERANCE_STEPS)
    return int(lower < t_star < upper)


def aggregate(records: list[EvalRecord], group_by: str = "detector") -> list[dict]:
    """Macro mean and population std per group.

    ``group_by`` is one of detector, anomaly_type, method_class. Missing
    AUC values are excluded from the averages and counted. Failed records
    contribute 0 to every metric.
    """
    if not records:
        raise ValueError("no records to aggregate")
    keyfns = {
        "detector": lambda r: r.detector_id,
        "anomaly_type": lambda r: r.anomaly_type,
        "method_class": lambda r: METHOD_CLASS.get(r.detector_id, "unknown"),
    }
    if group_by not in keyfns:
        raise ValueError(f"unknown group_by {group_by!r}")
    keyfn = keyfns[group_by]
    groups: dict[str, list[EvalRecord]] = {}
    for r in records:
        groups.setdefault(keyfn(r), []).append(r)

    rows = []
    for key in sorted(groups):
        rs = groups[key]
        aucs = [0.0 if r.failed else r.auc_roc
                for r in rs if r.failed or r.auc_roc is not None]
        f1s = [0.0 if r.failed else r.f1 for r in rs]
        ucrs = [0.0 if r.failed else float(r.ucr) for r in rs]
        times = [r.runtime_sec for r in rs]
        row = {"group": key, "n_records": len(rs),
               "n_missing_auc": len(rs) - len(aucs),
               "n_failed": sum(r.failed for r in rs)}
        for name, vals in (("auc_roc", aucs), ("f1", f1s), ("ucr", ucrs),
                           ("runtime_sec", times)):
            if vals:
                row[f"{name}_mean"] = float(np.mean(vals))
                row[f"{name}_std"] = float(np.std(vals))
            else:
                row[f"{name}_mean"] = None
                row[f"{name}_std"] = None
        rows.append(row)
    return rows


RECORD_COLUMNS = ("series_name", "detector_id", "repetition", "seed",
                  "auc_roc", "f1", "ucr", "runtime_sec", "anomaly_type",
                  "failed", "failure_reason")


def write_records(records: list[EvalRecord], path: str):
    """Tab-separated record table in the documented column order."""
    with open(path, "w") as fh:
        fh.write("\t".join(RECORD_COLUMNS) + "\n")
        for r in records:
            vals = []
            for c in RECORD_COLUMNS:
                v = getattr(r, c)
                vals.append("" if v is None else str(v))
            fh.write("\t".join(vals) + "\n")


def read_records(path: str) -> list[EvalRecord]:
    records = []
    with open(path) as fh:
        header = fh.readline().strip().split("\t")
        if tuple(header) != RECORD_COLUMNS:
            raise ValueError(f"unexpected record columns in {path}")
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            row = dict(zip(RECORD_COLUMNS, parts))
            records.append(EvalRecord(
                series_name=row["series_name"],
                detector_id=row["detector_id"],
                repetition=int(row["repetition"]),
                seed=int(row["seed"]),
                auc_roc=None if row["auc_roc"] == "" else float(row["auc_roc"]),
                f1=float(row["f1"]),
                ucr=int(row["ucr"]),
                runtime_sec=float(row["runtime_sec"]),
                anomaly_type=row["anomaly_type"],
                failed=row["failed"] == "True",
                failure_reason=row["failure_reason"],
            ))
    return records


def write_aggregate(rows: list[dict], path: str):
    if not rows:
        return
    cols = list(rows[0].keys())
    with open(path, "w") as fh:
        fh.write("\t".join(cols) + "\n")
        for row in rows:
            fh.write("\t".join("" if row[c] is None else str(row[c])
                               for c in cols) + "\n")
