"""Evaluation measures: positive-class precision/recall/F1 for the binary
ezafe task, macro averages and accuracy for tagging, per-tag breakdowns,
and per-POS ezafe F1.

Zero-denominator convention: precision or recall with an empty denominator
is 0, and F1 is 0 whenever P + R = 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float


@dataclass(frozen=True)
class ConfusionTable:
    tags: tuple[str, ...]
    counts: np.ndarray  # (n_tags, n_tags) gold x predicted

    def __post_init__(self):
        n = len(self.tags)
        if self.counts.shape != (n, n):
            raise ValueError("counts must be square over the declared tag set")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def tag_id(self, tag: str) -> int:
        try:
            return self.tags.index(tag)
        except ValueError:
            raise ValueError(f"tag {tag!r} not in table") from None


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def confusion(
    gold: Sequence[Sequence[str]], pred: Sequence[Sequence[str]], tagset: Sequence[str]
) -> ConfusionTable:
    """Token-level confusion counts over sentence-aligned tag sequences."""
    tags = tuple(tagset)
    if len(set(tags)) != len(tags):
        raise ValueError("tagset contains duplicates")
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences vs {len(pred)} predicted")
    ids = {t: i for i, t in enumerate(tags)}
    counts = np.zeros((len(tags), len(tags)), dtype=np.int64)
    for s, (gs, ps) in enumerate(zip(gold, pred)):
        if len(gs) != len(ps):
            raise ValueError(f"sentence {s}: {len(gs)} gold tokens vs {len(ps)} predicted")
        for g, p in zip(gs, ps):
            if g not in ids:
                raise ValueError(f"sentence {s}: gold tag {g!r} outside tagset")
            if p not in ids:
                raise ValueError(f"sentence {s}: predicted tag {p!r} outside tagset")
            counts[ids[g], ids[p]] += 1
    return ConfusionTable(tags=tags, counts=counts)


def one_vs_rest(table: ConfusionTable, tag: str) -> Metrics:
    """P/R/F1 treating one tag as the positive class; accuracy is the
    table-wide token accuracy."""
    i = table.tag_id(tag)
    tp = float(table.counts[i, i])
    fp = float(table.counts[:, i].sum()) - tp
    fn = float(table.counts[i, :].sum()) - tp
    p = _ratio(tp, tp + fp)
    r = _ratio(tp, tp + fn)
    acc = _ratio(float(np.trace(table.counts)), float(table.total))
    return Metrics(precision=p, recall=r, f1=_f1(p, r), accuracy=acc)


def binary_metrics(table: ConfusionTable, positive: str) -> Metrics:
    if len(table.tags) != 2:
        raise ValueError("binary_metrics requires a 2-tag table")
    return one_vs_rest(table, positive)


def macro_metrics(table: ConfusionTable) -> Metrics:
    """Unweighted means of one-vs-rest P/R/F1 over tags that occur in gold
    or prediction; tags absent from both are excluded."""
    observed = [
        t
        for i, t in enumerate(table.tags)
        if table.counts[i, :].sum() > 0 or table.counts[:, i].sum() > 0
    ]
    if not observed:
        return Metrics(0.0, 0.0, 0.0, 0.0)
    per = [one_vs_rest(table, t) for t in observed]
    return Metrics(
        precision=sum(m.precision for m in per) / len(per),
        recall=sum(m.recall for m in per) / len(per),
        f1=sum(m.f1 for m in per) / len(per),
        accuracy=_ratio(float(np.trace(table.counts)), float(table.total)),
    )


def per_tag_metrics(table: ConfusionTable) -> dict[str, Metrics]:
    return {
        t: one_vs_rest(table, t)
        for i, t in enumerate(table.tags)
        if table.counts[i, :].sum() > 0 or table.counts[:, i].sum() > 0
    }


def ezafe_f1_per_pos(
    gold_ezafe: Sequence[Sequence[int]],
    pred_ezafe: Sequence[Sequence[int]],
    gold_pos: Sequence[Sequence[str]],
) -> tuple[dict[str, float], float]:
    """Positive-class F1 of the ezafe flags inside each gold-POS bucket,
    plus the unweighted mean over reported buckets. Buckets with no gold
    and no predicted positives are omitted."""
    if not (len(gold_ezafe) == len(pred_ezafe) == len(gold_pos)):
        raise ValueError("sentence counts differ between inputs")
    tp: dict[str, int] = {}
    fp: dict[str, int] = {}
    fn: dict[str, int] = {}
    for s, (ge, pe, gp) in enumerate(zip(gold_ezafe, pred_ezafe, gold_pos)):
        if not (len(ge) == len(pe) == len(gp)):
            raise ValueError(f"sentence {s}: token counts differ between inputs")
        for g, p, pos in zip(ge, pe, gp):
            tp.setdefault(pos, 0)
            fp.setdefault(pos, 0)
            fn.setdefault(pos, 0)
            if g == 1 and p == 1:
                tp[pos] += 1
            elif g == 0 and p == 1:
                fp[pos] += 1
            elif g == 1 and p == 0:
                fn[pos] += 1
    scores: dict[str, float] = {}
    for pos in tp:
        if tp[pos] + fp[pos] + fn[pos] == 0:
            continue
        p = _ratio(tp[pos], tp[pos] + fp[pos])
        r = _ratio(tp[pos], tp[pos] + fn[pos])
        scores[pos] = _f1(p, r)
    ordered = dict(sorted(scores.items(), key=lambda kv: (-kv[1], kv[0])))
    mean = sum(ordered.values()) / len(ordered) if ordered else 0.0
    return ordered, mean


def delta_report(before: dict[str, float], after: dict[str, float]) -> dict[str, float]:
    """Per-tag (after - before), sorted by descending change."""
    if set(before) != set(after):
        raise ValueError("before/after report different tag sets")
    deltas = {t: after[t] - before[t] for t in before}
    return dict(sorted(deltas.items(), key=lambda kv: (-kv[1], kv[0])))


@dataclass
class EvalReport:
    """One evaluation of one model on one corpus. kind is 'binary' for the
    positive-class view or 'macro' for the tag-averaged view."""

    kind: str
    headline: Metrics
    per_tag: dict[str, Metrics]
    table: ConfusionTable
    ezafe_per_pos: dict[str, float] | None = None
    ezafe_per_pos_mean: float | None = None
    header: dict[str, str] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        r4 = lambda v: round(v, 4)
        return {
            "precision": r4(self.headline.precision),
            "recall": r4(self.headline.recall),
            "f1": r4(self.headline.f1),
            "accuracy": r4(self.headline.accuracy),
            "per_tag": {
                t: {"precision": r4(m.precision), "recall": r4(m.recall), "f1": r4(m.f1)}
                for t, m in self.per_tag.items()
            },
            "ezafe_f1_per_pos": (
                None
                if self.ezafe_per_pos is None
                else {t: r4(v) for t, v in self.ezafe_per_pos.items()}
            ),
            "macro_mean": None if self.ezafe_per_pos_mean is None else r4(self.ezafe_per_pos_mean),
            "config": dict(self.header),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), ensure_ascii=False, indent=2) + "\n"

    def to_text(self) -> str:
        lines = [f"kind\t{self.kind}"]
        for k, v in self.header.items():
            lines.append(f"{k}\t{v}")
        lines.append("")
        m = self.headline
        lines.append(f"precision\t{m.precision:.4f}")
        lines.append(f"recall\t{m.recall:.4f}")
        lines.append(f"f1\t{m.f1:.4f}")
        lines.append(f"accuracy\t{m.accuracy:.4f}")
        lines.append("")
        lines.append("per_tag\tprecision\trecall\tf1")
        for t, pm in self.per_tag.items():
            lines.append(f"{t}\t{pm.precision:.4f}\t{pm.recall:.4f}\t{pm.f1:.4f}")
        if self.ezafe_per_pos is not None:
            lines.append("")
            lines.append("ezafe_f1_per_pos\tf1")
            for t, v in self.ezafe_per_pos.items():
                lines.append(f"{t}\t{v:.4f}")
            lines.append(f"macro_mean\t{self.ezafe_per_pos_mean:.4f}")
        return "\n".join(lines) + "\n"
