"""Experiment arms (no-adaptation baseline, plain cycle-consistent
adaptation, edge-preserving adaptation), score tables and figures."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .data import AugmentSpec, FundusDataset, make_patches
from .edges import CannyParams, canny_edges, edge_f_measure
from .gan import GanConfig, canny_edge_loss, train_edgecyclegan, translate
from .image import to_grayscale
from .metrics import MetricsReport, accuracy, dice_score, precision_recall
from .networks import ModelBundle
from .segmentation import SegConfig, predict_mask, train_segmentor

# Published Table-1-style reference scores (percent), kept as a static
# annotation for context next to locally computed results.
PUBLISHED_REFERENCE = {
    "baseline": {"DRIVE->STARE": 68.08, "STARE->DRIVE": 63.82},
    "cyclegan": {"DRIVE->STARE": 72.82, "STARE->DRIVE": 71.05},
    "edgecyclegan": {"DRIVE->STARE": 77.84, "STARE->DRIVE": 76.29},
}


@dataclass
class ExperimentSpec:
    source_name: str
    target_name: str
    source_train: FundusDataset  # labeled
    target_train: FundusDataset  # labels ignored during adaptation
    target_test: FundusDataset  # labeled, evaluation only
    gan: GanConfig
    seg: SegConfig
    augment: AugmentSpec | None = None
    output_root: Path | None = None

    def __post_init__(self):
        if self.source_name == self.target_name:
            raise ValueError("source and target domains must differ")
        if self.source_train.labels is None:
            raise ValueError("source training set must be labeled")
        if self.target_test.labels is None:
            raise ValueError("target test set must be labeled")

    @property
    def direction(self) -> str:
        return f"{self.source_name}->{self.target_name}"


def _maybe_patches(ds: FundusDataset, augment: AugmentSpec | None, seed_shift: int):
    if augment is None:
        return ds
    return make_patches(ds, replace(augment, seed=augment.seed + seed_shift))


def _evaluate(unet, spec: ExperimentSpec, report: MetricsReport) -> MetricsReport:
    test = spec.target_test
    for i, img in enumerate(test.images):
        pred = predict_mask(unet, img, spec.seg.threshold)
        gt = test.labels[i]
        fov = test.fov_masks[i] if test.fov_masks is not None else None
        report.dice_per_image.append(dice_score(pred, gt, fov))
        p, r = precision_recall(pred, gt, fov)
        report.precision_per_image.append(p)
        report.recall_per_image.append(r)
        report.accuracy_per_image.append(accuracy(pred, gt, fov))
    return report


def _write_manifest(out_dir: Path, spec: ExperimentSpec, method: str,
                    bundles: dict[str, ModelBundle], report: MetricsReport) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "method": method,
        "direction": spec.direction,
        "gan_config": asdict(spec.gan),
        "seg_config": asdict(spec.seg),
        "augment": asdict(spec.augment) if spec.augment else None,
        "seed": spec.gan.seed,
        "checkpoint_hashes": {
            name: hashlib.sha256(b.state_bytes()).hexdigest() for name, b in bundles.items()
        },
        "mean_dice": report.dice,
        "elapsed_seconds": report.elapsed_seconds,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))


def run_baseline(spec: ExperimentSpec) -> MetricsReport:
    """Train the segmentor on raw labeled source data, evaluate on target."""
    t0 = time.perf_counter()
    train_ds = _maybe_patches(spec.source_train, spec.augment, 0)
    out = spec.output_root / "baseline" if spec.output_root else None
    unet, _ = train_segmentor(None, train_ds.images, train_ds.labels, spec.seg, out)
    report = MetricsReport("baseline", spec.direction,
                           config={"seg": asdict(spec.seg)}, seed=spec.seg.seed)
    _evaluate(unet, spec, report)
    report.elapsed_seconds = time.perf_counter() - t0
    if out is not None:
        _write_manifest(out, spec, "baseline", {"unet": unet}, report)
    return report


def run_adapted(spec: ExperimentSpec, edge_enabled: bool = True):
    """Stage 1: adversarial translation training (edge weight zeroed when
    ``edge_enabled`` is off, reproducing the plain cycle-consistent arm).
    Stage 2: segmentor training on translated source images. Evaluation on
    the target test set. Returns (report, gan_result, unet)."""
    t0 = time.perf_counter()
    method = "edgecyclegan" if edge_enabled else "cyclegan"
    gan_cfg = spec.gan if edge_enabled else replace(spec.gan, gamma_edge=0.0)
    src_patches = _maybe_patches(spec.source_train, spec.augment, 0)
    tgt_patches = _maybe_patches(spec.target_train, spec.augment, 1)
    out = spec.output_root / method if spec.output_root else None
    gan = train_edgecyclegan(src_patches, tgt_patches, gan_cfg, out)
    unet, _ = train_segmentor(gan.G, src_patches.images, src_patches.labels, spec.seg, out)
    report = MetricsReport(method, spec.direction,
                           config={"gan": asdict(gan_cfg), "seg": asdict(spec.seg)},
                           seed=gan_cfg.seed)
    _evaluate(unet, spec, report)
    fidelity = edge_fidelity_report((gan.G, gan.F), src_patches, gan_cfg.canny,
                                    direction=spec.direction, method=method)
    report.edge_l1_per_image = fidelity.edge_l1_per_image
    report.edge_f_per_image = fidelity.edge_f_per_image
    report.elapsed_seconds = time.perf_counter() - t0
    if out is not None:
        _write_manifest(out, spec, method,
                        {"G": gan.G, "F": gan.F, "unet": unet}, report)
    return report, gan, unet


def edge_fidelity_report(gen_pair: tuple[ModelBundle, ModelBundle],
                         dataset: FundusDataset, p: CannyParams,
                         tol_px: int = 1, direction: str = "",
                         method: str = "edge_fidelity") -> MetricsReport:
    """Edge preservation through a full translation cycle: per image, the
    binary-Canny L1 and tolerance-1 edge F-measure between the edges of
    F(G(x)) and of x. Medians aggregate the per-image values."""
    G, F_ = gen_pair
    report = MetricsReport(method, direction)
    for img in dataset.images:
        rec = translate(F_, translate(G, [img]))[0]
        report.edge_l1_per_image.append(canny_edge_loss(img, rec, p))
        e_rec = canny_edges(to_grayscale(rec), p)
        e_orig = canny_edges(to_grayscale(img), p)
        report.edge_f_per_image.append(edge_f_measure(e_rec, e_orig, tol_px))
    return report


def compare_report(reports: list[MetricsReport], out_dir: str | Path | None = None,
                   include_published: bool = False) -> str:
    """Aligned text table of F-scores (percent, two decimals) per method and
    direction. Optionally writes CSV and a bar-chart PNG."""
    if not reports:
        raise ValueError("no reports to compare")
    directions = sorted({r.direction for r in reports})
    methods = list(dict.fromkeys(r.method for r in reports))
    cell = {(r.method, r.direction): 100.0 * r.dice for r in reports}
    rows = []
    for m in methods:
        rows.append([m] + [_fmt(cell.get((m, d))) for d in directions])
    if include_published:
        for m, per_dir in PUBLISHED_REFERENCE.items():
            rows.append([f"{m} (published)"] + [_fmt(per_dir.get(d)) for d in directions])

    header = ["model"] + directions
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    lines = [" | ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("-+-".join("-" * w for w in widths))
    for r in rows:
        lines.append(" | ".join(str(v).ljust(w) for v, w in zip(r, widths)))
    table = "\n".join(lines)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "scores.txt").write_text(table + "\n")
        with open(out_dir / "scores.csv", "w") as fh:
            fh.write(",".join(header) + "\n")
            for r in rows:
                fh.write(",".join(str(v) for v in r) + "\n")
        _bar_chart(methods, directions, cell, out_dir / "scores.png")
    return table


def _fmt(v) -> str:
    return "-" if v is None else f"{v:.2f}"


def _bar_chart(methods, directions, cell, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = np.arange(len(directions))
    width = 0.8 / max(1, len(methods))
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, m in enumerate(methods):
        vals = [cell.get((m, d), np.nan) for d in directions]
        ax.bar(x + i * width, vals, width, label=m)
    ax.set_xticks(x + width * (len(methods) - 1) / 2)
    ax.set_xticklabels(directions)
    ax.set_ylabel("F-score (%)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
