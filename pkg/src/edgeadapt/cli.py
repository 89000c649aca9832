"""Command-line interface orchestrating the full pipeline.

Subcommands: synth, train-gan, translate, train-seg, evaluate, report,
pipeline. ``pipeline`` runs all stages (baseline + plain + edge-preserving
adaptation) from a single YAML/JSON config and requires --seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .data import (
    AugmentSpec,
    DomainStyle,
    FundusDataset,
    SynthSpec,
    export_generic,
    ingest_dataset,
    synth_fundus,
)
from .edges import CannyParams
from .experiments import ExperimentSpec, compare_report, run_adapted, run_baseline
from .gan import GanConfig, train_edgecyclegan, translate
from .image import save_image
from .metrics import accuracy, dice_score, load_report, precision_recall, save_report
from .metrics import MetricsReport
from .networks import load_bundle, save_bundle
from .segmentation import SegConfig, predict_mask, train_segmentor


def _add_gan_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda-cyc", type=float, default=10.0)
    p.add_argument("--gamma-edge", type=float, default=3.0)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--learning-rate", type=float, default=2e-4)
    p.add_argument("--pool-size", type=int, default=50)
    p.add_argument("--gen-base-filters", type=int, default=64)
    p.add_argument("--gen-residual-blocks", type=int, default=None)
    p.add_argument("--disc-base-filters", type=int, default=64)
    p.add_argument("--disc-layers", type=int, default=3)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--low", type=float, default=0.1)
    p.add_argument("--high", type=float, default=0.2)
    p.add_argument("--soft-temperature", type=float, default=50.0)
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--sample-every", type=int, default=0)


def _gan_config(args, seed: int) -> GanConfig:
    return GanConfig(
        lambda_cyc=args.lambda_cyc, gamma_edge=args.gamma_edge, epochs=args.epochs,
        batch_size=args.batch_size, learning_rate=args.learning_rate, seed=seed,
        canny=CannyParams(args.sigma, args.low, args.high, args.soft_temperature),
        pool_size=args.pool_size, gen_base_filters=args.gen_base_filters,
        gen_residual_blocks=args.gen_residual_blocks,
        disc_base_filters=args.disc_base_filters, disc_layers=args.disc_layers,
        checkpoint_every=args.checkpoint_every, sample_every=args.sample_every)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgeadapt",
        description="Edge-preserving unpaired domain adaptation for vessel segmentation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic vascular domain")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--background", type=float, default=0.85)
    p.add_argument("--contrast", type=float, default=0.5)
    p.add_argument("--vignette", type=float, default=0.0)
    p.add_argument("--noise-std", type=float, default=0.02)

    p = sub.add_parser("train-gan", help="train the translation stage")
    p.add_argument("--domain-a", required=True, help="generic-layout dataset root")
    p.add_argument("--domain-b", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_gan_args(p)

    p = sub.add_parser("translate", help="run images through a trained generator")
    p.add_argument("--generator", required=True, help="generator checkpoint directory")
    p.add_argument("--data", required=True, help="generic-layout dataset root")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train-seg", help="train the segmentor stage")
    p.add_argument("--data", required=True, help="labeled generic-layout dataset root")
    p.add_argument("--generator", default=None, help="optional frozen generator checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--learning-rate", type=float, default=1e-4)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--unet-base-filters", type=int, default=64)
    p.add_argument("--unet-depth", type=int, default=4)

    p = sub.add_parser("evaluate", help="score a trained segmentor on a labeled dataset")
    p.add_argument("--unet", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", default="model")
    p.add_argument("--direction", default="")
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("report", help="tabulate metric reports")
    p.add_argument("reports", nargs="+", help="metrics JSON files from evaluate/pipeline")
    p.add_argument("--out", required=True)
    p.add_argument("--published", action="store_true",
                   help="annotate with the published reference scores")

    p = sub.add_parser("pipeline", help="run all stages from a config file")
    p.add_argument("--config", required=True, help="YAML/JSON experiment config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    return parser


def _load_dataset(entry: dict) -> FundusDataset:
    if "synth" in entry:
        s = dict(entry["synth"])
        style = DomainStyle(**s.pop("style", {}))
        return synth_fundus(SynthSpec(style=style, **s))
    return ingest_dataset(entry["root"], entry.get("layout", "generic"))


def _cmd_synth(args) -> int:
    style = DomainStyle(args.background, args.contrast, args.vignette, args.noise_std)
    ds = synth_fundus(SynthSpec(count=args.count, image_size=args.image_size,
                                style=style, seed=args.seed))
    export_generic(ds, args.out)
    print(f"wrote {len(ds)} synthetic images to {args.out}")
    return 0


def _cmd_train_gan(args) -> int:
    dom_a = ingest_dataset(args.domain_a, "generic")
    dom_b = ingest_dataset(args.domain_b, "generic")
    cfg = _gan_config(args, args.seed)
    result = train_edgecyclegan(dom_a, dom_b, cfg, args.out)
    last = result.history[-1].breakdown
    print(f"trained {cfg.epochs} epochs; final total loss {last.total:.4f}")
    print(f"checkpoints under {Path(args.out) / 'checkpoints'}")
    return 0


def _cmd_translate(args) -> int:
    gen = load_bundle(args.generator)
    ds = ingest_dataset(args.data, "generic")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(translate(gen, ds.images)):
        save_image(img, out / f"{i:04d}.png")
    print(f"translated {len(ds)} images into {out}")
    return 0


def _cmd_train_seg(args) -> int:
    ds = ingest_dataset(args.data, "generic")
    if ds.labels is None:
        raise SystemExit("train-seg requires a labels/ directory")
    gen = load_bundle(args.generator) if args.generator else None
    cfg = SegConfig(epochs=args.epochs, batch_size=args.batch_size,
                    learning_rate=args.learning_rate, seed=args.seed,
                    threshold=args.threshold, unet_base_filters=args.unet_base_filters,
                    unet_depth=args.unet_depth)
    _, history = train_segmentor(gen, ds.images, ds.labels, cfg, args.out)
    print(f"trained segmentor {cfg.epochs} epochs; final loss {history[-1].loss:.4f}")
    return 0


def _cmd_evaluate(args) -> int:
    unet = load_bundle(args.unet)
    ds = ingest_dataset(args.data, "generic")
    if ds.labels is None:
        raise SystemExit("evaluate requires a labels/ directory")
    report = MetricsReport(args.method, args.direction)
    for i, img in enumerate(ds.images):
        pred = predict_mask(unet, img, args.threshold)
        fov = ds.fov_masks[i] if ds.fov_masks is not None else None
        report.dice_per_image.append(dice_score(pred, ds.labels[i], fov))
        p, r = precision_recall(pred, ds.labels[i], fov)
        report.precision_per_image.append(p)
        report.recall_per_image.append(r)
        report.accuracy_per_image.append(accuracy(pred, ds.labels[i], fov))
    out = Path(args.out)
    save_report(report, out / f"metrics_{args.method}.json")
    print(f"mean DICE {100 * report.dice:.2f} over {len(ds)} images")
    return 0


def _cmd_report(args) -> int:
    reports = [load_report(p) for p in args.reports]
    table = compare_report(reports, args.out, include_published=args.published)
    print(table)
    return 0


def _cmd_pipeline(args) -> int:
    text = Path(args.config).read_text()
    cfg = yaml.safe_load(text) if not args.config.endswith(".json") else json.loads(text)
    source = _load_dataset(cfg["source"])
    target_train = _load_dataset(cfg["target"])
    target_test = _load_dataset(cfg.get("target_test", cfg["target"]))

    gan_cfg = GanConfig(seed=args.seed,
                        canny=CannyParams(**cfg.get("canny", {})), **cfg.get("gan", {}))
    seg_cfg = SegConfig(seed=args.seed, **cfg.get("seg", {}))
    augment = AugmentSpec(seed=args.seed, **cfg["augment"]) if "augment" in cfg else None
    out = Path(args.out)
    spec = ExperimentSpec(
        source_name=cfg.get("source_name", "source"),
        target_name=cfg.get("target_name", "target"),
        source_train=source, target_train=target_train, target_test=target_test,
        gan=gan_cfg, seg=seg_cfg, augment=augment, output_root=out)

    reports = [run_baseline(spec)]
    for edge_enabled in (False, True):
        report, _, _ = run_adapted(spec, edge_enabled=edge_enabled)
        reports.append(report)
    for r in reports:
        save_report(r, out / f"metrics_{r.method}.json")
    table = compare_report(reports, out)
    print(table)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "train-gan": _cmd_train_gan,
    "translate": _cmd_translate,
    "train-seg": _cmd_train_seg,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
    "pipeline": _cmd_pipeline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
