"""Micro-F1 scoring (the shared-task metric) plus diagnostic per-class metrics.

``score`` computes everything from pooled counts over the confusion matrix;
``brute_force_score`` recomputes every field with direct definitional loops
and exists as an independent oracle for the test suite.  With single-label
multiclass data micro-F1 equals accuracy; the pooled computation keeps that
as a checked identity rather than a shortcut.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import torch

from .dataset import LabelScheme


class LengthMismatch(ValueError):
    pass


class InvalidId(ValueError):
    pass


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    micro_f1: float
    macro_f1: float
    per_class: dict[str, ClassMetrics]
    confusion: list[list[int]]
    n: int

    def as_dict(self) -> dict:
        return {
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "n": self.n,
            "per_class": {
                name: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for name, m in self.per_class.items()
            },
            "confusion": self.confusion,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), ensure_ascii=False, indent=2)

    def to_text(self) -> str:
        names = list(self.per_class)
        width = max(len(n) for n in names)
        lines = [
            f"examples : {self.n}",
            f"micro F1 : {self.micro_f1:.4f}",
            f"macro F1 : {self.macro_f1:.4f}",
            "",
            f"{'class':<{width}}  precision  recall  f1      support",
        ]
        for name in names:
            m = self.per_class[name]
            lines.append(
                f"{name:<{width}}  {m.precision:9.4f}  {m.recall:6.4f}  {m.f1:6.4f}  {m.support:7d}"
            )
        lines.append("")
        lines.append("confusion (rows = gold, cols = predicted):")
        cell = max(5, max(len(str(v)) for row in self.confusion for v in row) + 1)
        header = " " * (width + 2) + "".join(f"{i:>{cell}}" for i in range(len(names)))
        lines.append(header)
        for i, row in enumerate(self.confusion):
            lines.append(f"{names[i]:<{width}}  " + "".join(f"{v:>{cell}}" for v in row))
        return "\n".join(lines)


def _check_ids(pred: list[int], gold: list[int], scheme: LabelScheme) -> None:
    if len(pred) != len(gold):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(gold)} gold labels")
    if len(pred) == 0:
        raise LengthMismatch("cannot score zero examples")
    k = scheme.num_classes
    for seq, kind in ((pred, "prediction"), (gold, "gold")):
        for v in seq:
            if not (0 <= v < k):
                raise InvalidId(f"{kind} id {v} outside scheme {scheme.subtask} (0..{k - 1})")


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def score(pred: list[int], gold: list[int], scheme: LabelScheme) -> EvalReport:
    """Micro-F1 from globally pooled TP/FP/FN, per-class one-vs-rest metrics
    with the 0/0 -> 0 convention, macro-F1, and the full confusion matrix."""
    _check_ids(pred, gold, scheme)
    k = scheme.num_classes
    confusion = [[0] * k for _ in range(k)]
    for p, g in zip(pred, gold):
        confusion[g][p] += 1

    per_class: dict[str, ClassMetrics] = {}
    pooled_tp = pooled_fp = pooled_fn = 0
    f1_sum = 0.0
    for c in range(k):
        tp = confusion[c][c]
        fp = sum(confusion[g][c] for g in range(k)) - tp
        fn = sum(confusion[c][p] for p in range(k)) - tp
        pooled_tp += tp
        pooled_fp += fp
        pooled_fn += fn
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = _f1(precision, recall)
        f1_sum += f1
        per_class[scheme.name_of(c)] = ClassMetrics(precision, recall, f1, tp + fn)

    micro_p = pooled_tp / (pooled_tp + pooled_fp) if pooled_tp + pooled_fp > 0 else 0.0
    micro_r = pooled_tp / (pooled_tp + pooled_fn) if pooled_tp + pooled_fn > 0 else 0.0
    return EvalReport(
        micro_f1=_f1(micro_p, micro_r),
        macro_f1=f1_sum / k,
        per_class=per_class,
        confusion=confusion,
        n=len(pred),
    )


def brute_force_score(pred: list[int], gold: list[int], scheme: LabelScheme) -> EvalReport:
    """Same report, recomputed by definitional loops; test oracle only."""
    _check_ids(pred, gold, scheme)
    k = scheme.num_classes

    def tp_of(c):
        return sum(1 for p, g in zip(pred, gold) if p == c and g == c)

    def fp_of(c):
        return sum(1 for p, g in zip(pred, gold) if p == c and g != c)

    def fn_of(c):
        return sum(1 for p, g in zip(pred, gold) if p != c and g == c)

    per_class: dict[str, ClassMetrics] = {}
    f1_sum = 0.0
    for c in range(k):
        tp, fp, fn = tp_of(c), fp_of(c), fn_of(c)
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = _f1(precision, recall)
        f1_sum += f1
        support = sum(1 for g in gold if g == c)
        per_class[scheme.name_of(c)] = ClassMetrics(precision, recall, f1, support)

    total_tp = sum(tp_of(c) for c in range(k))
    total_fp = sum(fp_of(c) for c in range(k))
    total_fn = sum(fn_of(c) for c in range(k))
    micro_p = total_tp / (total_tp + total_fp) if total_tp + total_fp > 0 else 0.0
    micro_r = total_tp / (total_tp + total_fn) if total_tp + total_fn > 0 else 0.0

    confusion = [[0] * k for _ in range(k)]
    for g in range(k):
        for p in range(k):
            confusion[g][p] = sum(1 for pp, gg in zip(pred, gold) if gg == g and pp == p)

    return EvalReport(
        micro_f1=_f1(micro_p, micro_r),
        macro_f1=f1_sum / k,
        per_class=per_class,
        confusion=confusion,
        n=len(pred),
    )


def predict(classifier, data, batch_size: int = 32) -> list[int]:
    """Argmax class ids for every example; ties break to the lowest id."""
    classifier.eval_mode()
    ids: list[int] = []
    texts = [ex.text for ex in data]
    with torch.no_grad():
        for start in range(0, len(texts), batch_size):
            logits = classifier.forward_texts(texts[start : start + batch_size])
            ids.extend(int(np.argmax(row)) for row in logits.detach().cpu().numpy())
    return ids
