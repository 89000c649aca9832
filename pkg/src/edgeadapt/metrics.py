"""Segmentation and edge-fidelity metrics."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .image import SegMask


def _flat(pred: SegMask, gt: SegMask, fov: SegMask | None):
    if pred.data.shape != gt.data.shape:
        raise ValueError("mask dimension mismatch")
    p = pred.data.astype(bool)
    g = gt.data.astype(bool)
    if fov is not None:
        if fov.data.shape != p.shape:
            raise ValueError("FOV mask dimension mismatch")
        keep = fov.data.astype(bool)
        p, g = p[keep], g[keep]
    return p.ravel(), g.ravel()


def dice_score(pred: SegMask, gt: SegMask, fov: SegMask | None = None) -> float:
    """2|P∩G| / (|P| + |G|), restricted to the FOV when given.
    Two empty sets score 1.0."""
    p, g = _flat(pred, gt, fov)
    denom = p.sum() + g.sum()
    if denom == 0:
        return 1.0
    return float(2.0 * np.logical_and(p, g).sum() / denom)


def precision_recall(pred: SegMask, gt: SegMask,
                     fov: SegMask | None = None) -> tuple[float, float]:
    """Per-pixel precision and recall of the vessel class. Empty denominators
    score 1.0 (nothing claimed / nothing to find)."""
    p, g = _flat(pred, gt, fov)
    tp = np.logical_and(p, g).sum()
    precision = float(tp / p.sum()) if p.sum() else 1.0
    recall = float(tp / g.sum()) if g.sum() else 1.0
    return precision, recall


def accuracy(pred: SegMask, gt: SegMask, fov: SegMask | None = None) -> float:
    p, g = _flat(pred, gt, fov)
    if p.size == 0:
        return 1.0
    return float((p == g).mean())


@dataclass
class MetricsReport:
    """Per-image and aggregate scores for one experiment arm."""

    method: str
    direction: str
    dice_per_image: list[float] = field(default_factory=list)
    precision_per_image: list[float] = field(default_factory=list)
    recall_per_image: list[float] = field(default_factory=list)
    accuracy_per_image: list[float] = field(default_factory=list)
    edge_l1_per_image: list[float] = field(default_factory=list)
    edge_f_per_image: list[float] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    seed: int = 0
    elapsed_seconds: float = 0.0

    @property
    def dice(self) -> float:
        return float(np.mean(self.dice_per_image)) if self.dice_per_image else float("nan")

    @property
    def precision(self) -> float:
        return float(np.mean(self.precision_per_image)) if self.precision_per_image else float("nan")

    @property
    def recall(self) -> float:
        return float(np.mean(self.recall_per_image)) if self.recall_per_image else float("nan")

    @property
    def median_edge_f(self) -> float:
        return float(np.median(self.edge_f_per_image)) if self.edge_f_per_image else float("nan")

    @property
    def median_edge_l1(self) -> float:
        return float(np.median(self.edge_l1_per_image)) if self.edge_l1_per_image else float("nan")


def save_report(report: MetricsReport, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(asdict(report), indent=2))


def load_report(path: str | Path) -> MetricsReport:
    return MetricsReport(**json.loads(Path(path).read_text()))
