"""Word-level precision/recall/F1 between detected and ground-truth texts."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass


@dataclass(frozen=True)
class OcrMetrics:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, matches: int, n_detected: int, n_truth: int) -> "OcrMetrics":
        p = matches / n_detected if n_detected else 0.0
        r = matches / n_truth if n_truth else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(precision=p, recall=r, f1=f1)


def match_count(detected: list[str], truth: list[str]) -> int:
    """Greedy exact multiset matching, case-folded."""
    d = Counter(w.casefold() for w in detected)
    t = Counter(w.casefold() for w in truth)
    return sum((d & t).values())


def eval_ocr_metrics(detected: list[str], truth: list[str]) -> OcrMetrics:
    """Precision/recall/F1 under exact multiset matching.

    Repeated detections of the same word count once per ground-truth copy,
    so repetition costs precision.
    """
    return OcrMetrics.from_counts(match_count(detected, truth), len(detected), len(truth))
