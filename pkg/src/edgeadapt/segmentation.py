"""Stage two: U-Net segmentor trained on generator-translated source images
against the original source labels, with the generator frozen."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .gan import translate
from .image import Image, ProbMap, SegMask
from .networks import ModelBundle, UNetSpec, build_unet, forward, save_bundle


@dataclass(frozen=True)
class SegConfig:
    epochs: int = 100
    batch_size: int = 4
    learning_rate: float = 1e-4
    seed: int = 0
    class_weights: tuple[float, float] | None = None  # None = uniform
    threshold: float = 0.5
    unet_base_filters: int = 64
    unet_depth: int = 4

    def __post_init__(self):
        if not (0.0 < self.threshold < 1.0):
            raise ValueError("threshold must lie in (0,1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def seg_loss(pred: ProbMap, label: SegMask, weights=None) -> float:
    """Per-pixel cross entropy, -mean(log p[label]); epsilon-clamped.

    With class weights the mean is weighted per pixel by the weight of its
    true class and normalized by the total weight.
    """
    p = pred.data
    lab = label.data
    if p.shape[:2] != lab.shape:
        raise ValueError("prediction/label dimension mismatch")
    rows, cols = np.indices(lab.shape)
    picked = np.clip(p[rows, cols, lab], 1e-7, 1.0)
    nll = -np.log(picked)
    if weights is None:
        return float(np.mean(nll))
    w = np.asarray(weights, dtype=np.float64)[lab]
    return float(np.sum(w * nll) / np.sum(w))


def inverse_frequency_weights(labels: list[SegMask]) -> tuple[float, float]:
    """Class weights proportional to 1/frequency, normalized to mean 1."""
    counts = np.zeros(2)
    for lab in labels:
        counts += np.bincount(lab.data.ravel(), minlength=2)
    inv = counts.sum() / np.maximum(counts, 1.0)
    inv = inv / inv.mean()
    return float(inv[0]), float(inv[1])


@dataclass(frozen=True)
class SegEpochStats:
    epoch: int
    loss: float


def train_segmentor(gen: ModelBundle | None, images: list[Image], labels: list[SegMask],
                    cfg: SegConfig, out_dir: str | Path | None = None):
    """Train the U-Net on translate(gen, images) against ``labels``.

    ``gen`` is frozen: it is only evaluated, never updated, so its serialized
    bytes are identical before and after. Pass ``gen=None`` to train directly
    on the raw images (the no-adaptation baseline).
    """
    if len(images) != len(labels):
        raise ValueError("every image needs a matching label")
    for i, (img, lab) in enumerate(zip(images, labels)):
        if (img.height, img.width) != (lab.height, lab.width):
            raise ValueError(f"image/label dim mismatch at index {i}")

    if gen is not None:
        train_imgs = translate(gen, images)
    else:
        train_imgs = images

    channels = train_imgs[0].channels
    spec = UNetSpec(channels, cfg.unet_base_filters, cfg.unet_depth, classes=2)
    unet = build_unet(spec, cfg.seed)
    unet.module.train()

    arr = np.stack([im.data for im in train_imgs]).transpose(0, 3, 1, 2)
    x_all = torch.from_numpy(arr).to(torch.float32) * 2.0 - 1.0
    y_all = torch.from_numpy(np.stack([lab.data for lab in labels])).long()

    weight = None
    if cfg.class_weights is not None:
        weight = torch.tensor(cfg.class_weights, dtype=torch.float32)
    criterion = torch.nn.CrossEntropyLoss(weight=weight)
    opt = torch.optim.Adam(unet.module.parameters(), lr=cfg.learning_rate)

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    n = len(train_imgs)
    history: list[SegEpochStats] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total, batches = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            opt.zero_grad(set_to_none=True)
            logits = unet.module(x_all[idx])
            loss = criterion(logits, y_all[idx])
            if not torch.isfinite(loss):
                raise FloatingPointError(f"non-finite segmentation loss at epoch {epoch}")
            loss.backward()
            opt.step()
            total += float(loss.detach())
            batches += 1
            unet.step += 1
        history.append(SegEpochStats(epoch, total / batches))

    unet.module.eval()
    if out_dir is not None:
        out_dir = Path(out_dir)
        save_bundle(unet, out_dir / "checkpoints" / "unet_final")
        with open(out_dir / "seg_loss_history.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "loss"])
            for st in history:
                w.writerow([st.epoch, st.loss])
    return unet, history


def predict_prob(unet: ModelBundle, img: Image) -> ProbMap:
    return forward(unet, [img])[0]


def predict_mask(unet: ModelBundle, img: Image, threshold: float = 0.5) -> SegMask:
    """Binarize the vessel-probability channel. At 0.5 this coincides with
    per-pixel argmax for two classes (ties resolve to background, as argmax)."""
    prob = predict_prob(unet, img)
    return SegMask((prob.data[:, :, 1] > threshold).astype(np.uint8))
