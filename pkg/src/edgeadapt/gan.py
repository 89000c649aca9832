"""Adversarial, cycle-consistency and edge-preservation losses, and the
alternating two-generator / two-discriminator training loop.

Training minimizes the least-squares adversarial surrogate by default; the
literal log-form adversarial value is computed every epoch and reported next
to the training losses. A flag switches training itself to the log form.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from .edges import CannyParams, soft_edges
from .image import Image, save_image, to_grayscale
from .networks import (
    DiscriminatorSpec,
    GeneratorSpec,
    ModelBundle,
    build_discriminator,
    build_generator,
    default_residual_blocks,
    images_to_tensor,
    save_bundle,
)
from .torchedges import grayscale_tensor, soft_edge_response

LOG_EPS = 1e-7


class GanDivergenceError(RuntimeError):
    """Raised when a loss term goes non-finite; names the offending term."""


@dataclass(frozen=True)
class GanConfig:
    lambda_cyc: float = 10.0
    gamma_edge: float = 3.0
    epochs: int = 200
    batch_size: int = 1
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    seed: int = 0
    canny: CannyParams = field(default_factory=CannyParams)
    use_least_squares_adv: bool = True
    pool_size: int = 50  # 0 disables the historical-fakes pool
    gen_base_filters: int = 64
    gen_residual_blocks: int | None = None  # None: 9 for >=256 px, 6 below
    disc_base_filters: int = 64
    disc_layers: int = 3
    checkpoint_every: int = 0  # epochs; 0 = final checkpoint only
    sample_every: int = 0  # epochs between sample triptychs; 0 = never

    def __post_init__(self):
        if self.lambda_cyc < 0 or self.gamma_edge < 0:
            raise ValueError("loss weights must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass(frozen=True)
class LossBreakdown:
    adv_AtoB: float
    adv_BtoA: float
    cyc: float
    edge: float
    total: float

    def __post_init__(self):
        for name in ("adv_AtoB", "adv_BtoA", "cyc", "edge", "total"):
            if not math.isfinite(getattr(self, name)):
                raise GanDivergenceError(f"non-finite loss term: {name}")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    breakdown: LossBreakdown
    adv_log_AtoB: float
    adv_log_BtoA: float


@dataclass
class GanTrainResult:
    G: ModelBundle  # A -> B
    F: ModelBundle  # B -> A
    D_A: ModelBundle
    D_B: ModelBundle
    history: list[EpochStats]


def _as_array(x) -> np.ndarray:
    return x.data if isinstance(x, Image) else np.asarray(x, dtype=np.float64)


def adversarial_loss(disc_real_scores, disc_fake_scores, least_squares: bool = False) -> float:
    """Patch-averaged adversarial objective.

    Log form treats scores as probabilities (clamped to [eps, 1-eps]) and
    returns E[log D(y)] + E[log(1 - D(G(x)))]; the least-squares form returns
    the discriminator surrogate 0.5 * (E[(D(y)-1)^2] + E[D(G(x))^2]).
    """
    real = _as_array(disc_real_scores)
    fake = _as_array(disc_fake_scores)
    if not (np.all(np.isfinite(real)) and np.all(np.isfinite(fake))):
        raise GanDivergenceError("non-finite loss term: adversarial scores")
    if least_squares:
        return float(0.5 * (np.mean((real - 1.0) ** 2) + np.mean(fake ** 2)))
    real = np.clip(real, LOG_EPS, 1.0 - LOG_EPS)
    fake = np.clip(fake, LOG_EPS, 1.0 - LOG_EPS)
    return float(np.mean(np.log(real)) + np.mean(np.log(1.0 - fake)))


def cycle_loss(x, x_rec, y, y_rec) -> float:
    """Mean absolute reconstruction error, both directions summed."""
    xa, xra, ya, yra = map(_as_array, (x, x_rec, y, y_rec))
    if xa.shape != xra.shape or ya.shape != yra.shape:
        raise ValueError("cycle_loss dimension mismatch")
    return float(np.mean(np.abs(xra - xa)) + np.mean(np.abs(yra - ya)))


def edge_loss(x: Image, x_rec: Image, y: Image, y_rec: Image, p: CannyParams) -> float:
    """L1 distance between soft edge maps of originals and reconstructions."""
    if (x.data.shape != x_rec.data.shape) or (y.data.shape != y_rec.data.shape):
        raise ValueError("edge_loss dimension mismatch")
    terms = []
    for orig, rec in ((x, x_rec), (y, y_rec)):
        e_orig = soft_edges(to_grayscale(orig), p).data
        e_rec = soft_edges(to_grayscale(rec), p).data
        terms.append(np.mean(np.abs(e_rec - e_orig)))
    return float(sum(terms))


def canny_edge_loss(x: Image, x_rec: Image, p: CannyParams) -> float:
    """Literal (non-differentiable) form: L1 between binary Canny maps."""
    from .edges import canny_edges

    e_orig = canny_edges(to_grayscale(x), p).data.astype(np.float64)
    e_rec = canny_edges(to_grayscale(x_rec), p).data.astype(np.float64)
    return float(np.mean(np.abs(e_rec - e_orig)))


def total_objective(adv_AtoB: float, adv_BtoA: float, cyc: float, edge: float,
                    cfg: GanConfig) -> LossBreakdown:
    total = adv_AtoB + adv_BtoA + cfg.lambda_cyc * cyc + cfg.gamma_edge * edge
    return LossBreakdown(adv_AtoB, adv_BtoA, cyc, edge, total)


# --- torch-side criteria ------------------------------------------------------


def gen_adv_criterion(fake_scores: torch.Tensor, least_squares: bool) -> torch.Tensor:
    """Generator-side adversarial term for one direction."""
    if least_squares:
        return ((fake_scores - 1.0) ** 2).mean()
    prob = torch.sigmoid(fake_scores).clamp(LOG_EPS, 1.0 - LOG_EPS)
    return torch.log(1.0 - prob).mean()


def disc_adv_criterion(real_scores: torch.Tensor, fake_scores: torch.Tensor,
                       least_squares: bool) -> torch.Tensor:
    """Discriminator loss (to minimize) for one domain."""
    if least_squares:
        return 0.5 * (((real_scores - 1.0) ** 2).mean() + (fake_scores ** 2).mean())
    real = torch.sigmoid(real_scores).clamp(LOG_EPS, 1.0 - LOG_EPS)
    fake = torch.sigmoid(fake_scores).clamp(LOG_EPS, 1.0 - LOG_EPS)
    return -(torch.log(real).mean() + torch.log(1.0 - fake).mean())


def soft_edge_l1(a: torch.Tensor, b: torch.Tensor, p: CannyParams) -> torch.Tensor:
    """L1 between soft edge maps of two [-1,1] image batches."""
    ga = grayscale_tensor((a + 1.0) * 0.5)
    gb = grayscale_tensor((b + 1.0) * 0.5)
    return (soft_edge_response(ga, p) - soft_edge_response(gb, p)).abs().mean()


class ImagePool:
    """Buffer of historical fakes shown to the discriminators (size 50 by
    convention); each query swaps the new fake in with probability 1/2."""

    def __init__(self, size: int, rng: np.random.Generator):
        self.size = size
        self.rng = rng
        self.items: list[torch.Tensor] = []

    def query(self, fakes: torch.Tensor) -> torch.Tensor:
        if self.size == 0:
            return fakes
        out = []
        for fake in fakes:
            fake = fake.detach()
            if len(self.items) < self.size:
                self.items.append(fake)
                out.append(fake)
            elif self.rng.random() < 0.5:
                idx = int(self.rng.integers(len(self.items)))
                out.append(self.items[idx])
                self.items[idx] = fake
            else:
                out.append(fake)
        return torch.stack(out)


def _check_finite(value: torch.Tensor, term: str) -> torch.Tensor:
    if not torch.isfinite(value):
        raise GanDivergenceError(f"non-finite loss term: {term}")
    return value


def _extract_images(dataset) -> list[Image]:
    imgs = list(dataset.images) if hasattr(dataset, "images") else list(dataset)
    if not imgs:
        raise ValueError("dataset is empty")
    shape = imgs[0].data.shape
    if any(im.data.shape != shape for im in imgs):
        raise ValueError("training requires uniform patch dims")
    return imgs


def train_edgecyclegan(domA, domB, cfg: GanConfig,
                       out_dir: str | Path | None = None) -> GanTrainResult:
    """Alternating adversarial optimization of generators {G: A->B, F: B->A}
    against discriminators {D_A, D_B}.

    Deterministic for a fixed seed on one device. Emits checkpoints, a
    per-epoch loss table, and optional sample triptychs under ``out_dir``.
    """
    imgs_a = _extract_images(domA)
    imgs_b = _extract_images(domB)
    channels = imgs_a[0].channels
    if imgs_b[0].channels != channels:
        raise ValueError("domains must share channel count")
    patch = imgs_a[0].height

    n_res = cfg.gen_residual_blocks
    if n_res is None:
        n_res = default_residual_blocks(patch)
    gspec = GeneratorSpec(channels, cfg.gen_base_filters, n_res)
    dspec = DiscriminatorSpec(channels, cfg.disc_base_filters, cfg.disc_layers)

    G = build_generator(gspec, cfg.seed)
    F_ = build_generator(gspec, cfg.seed + 1)
    D_A = build_discriminator(dspec, cfg.seed + 2)
    D_B = build_discriminator(dspec, cfg.seed + 3)
    for b in (G, F_, D_A, D_B):
        b.module.train()

    xa_all = images_to_tensor(imgs_a)
    xb_all = images_to_tensor(imgs_b)

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    pool_rng = np.random.default_rng(cfg.seed + 7919)
    pool_a = ImagePool(cfg.pool_size, pool_rng)
    pool_b = ImagePool(cfg.pool_size, pool_rng)

    gen_params = list(G.module.parameters()) + list(F_.module.parameters())
    disc_params = list(D_A.module.parameters()) + list(D_B.module.parameters())
    opt_g = torch.optim.Adam(gen_params, lr=cfg.learning_rate, betas=(cfg.beta1, cfg.beta2))
    opt_d = torch.optim.Adam(disc_params, lr=cfg.learning_rate, betas=(cfg.beta1, cfg.beta2))
    sched_g = torch.optim.lr_scheduler.LambdaLR(opt_g, _linear_decay(cfg.epochs))
    sched_d = torch.optim.lr_scheduler.LambdaLR(opt_d, _linear_decay(cfg.epochs))

    ls = cfg.use_least_squares_adv
    n_iter = max(len(imgs_a), len(imgs_b))
    history: list[EpochStats] = []
    out_dir = Path(out_dir) if out_dir is not None else None

    for epoch in range(1, cfg.epochs + 1):
        idx_a = rng.permutation(n_iter) % len(imgs_a)
        idx_b = rng.permutation(n_iter) % len(imgs_b)
        sums = {"adv_a2b": 0.0, "adv_b2a": 0.0, "cyc": 0.0, "edge": 0.0,
                "log_a2b": 0.0, "log_b2a": 0.0}
        batches = 0
        for start in range(0, n_iter, cfg.batch_size):
            real_a = xa_all[idx_a[start : start + cfg.batch_size]]
            real_b = xb_all[idx_b[start : start + cfg.batch_size]]

            # generators
            opt_g.zero_grad(set_to_none=True)
            fake_b = G.module(real_a)
            rec_a = F_.module(fake_b)
            fake_a = F_.module(real_b)
            rec_b = G.module(fake_a)
            adv_a2b = _check_finite(gen_adv_criterion(D_B.module(fake_b), ls), "adv_AtoB")
            adv_b2a = _check_finite(gen_adv_criterion(D_A.module(fake_a), ls), "adv_BtoA")
            cyc = _check_finite(
                (rec_a - real_a).abs().mean() + (rec_b - real_b).abs().mean(), "cyc")
            g_loss = adv_a2b + adv_b2a + cfg.lambda_cyc * cyc
            if cfg.gamma_edge > 0:
                edge = _check_finite(
                    soft_edge_l1(rec_a, real_a, cfg.canny)
                    + soft_edge_l1(rec_b, real_b, cfg.canny), "edge")
                g_loss = g_loss + cfg.gamma_edge * edge
                sums["edge"] += float(edge.detach())
            g_loss.backward()
            opt_g.step()

            # discriminators
            opt_d.zero_grad(set_to_none=True)
            fa = pool_a.query(fake_a.detach())
            fb = pool_b.query(fake_b.detach())
            d_a = _check_finite(
                disc_adv_criterion(D_A.module(real_a), D_A.module(fa), ls), "disc_A")
            d_b = _check_finite(
                disc_adv_criterion(D_B.module(real_b), D_B.module(fb), ls), "disc_B")
            (d_a + d_b).backward()
            opt_d.step()

            with torch.no_grad():
                pb_real = torch.sigmoid(D_B.module(real_b))
                pb_fake = torch.sigmoid(D_B.module(fake_b.detach()))
                pa_real = torch.sigmoid(D_A.module(real_a))
                pa_fake = torch.sigmoid(D_A.module(fake_a.detach()))
            sums["log_a2b"] += adversarial_loss(pb_real.numpy(), pb_fake.numpy())
            sums["log_b2a"] += adversarial_loss(pa_real.numpy(), pa_fake.numpy())
            sums["adv_a2b"] += float(adv_a2b.detach())
            sums["adv_b2a"] += float(adv_b2a.detach())
            sums["cyc"] += float(cyc.detach())
            batches += 1
            for b in (G, F_, D_A, D_B):
                b.step += 1

        sched_g.step()
        sched_d.step()
        breakdown = total_objective(
            sums["adv_a2b"] / batches, sums["adv_b2a"] / batches,
            sums["cyc"] / batches, sums["edge"] / batches, cfg)
        history.append(EpochStats(epoch, breakdown,
                                  sums["log_a2b"] / batches, sums["log_b2a"] / batches))

        if out_dir is not None:
            if cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
                _save_gan_checkpoint(out_dir / "checkpoints" / f"epoch_{epoch:04d}",
                                     G, F_, D_A, D_B)
            if cfg.sample_every and epoch % cfg.sample_every == 0:
                _save_triptych(out_dir / "samples" / f"epoch_{epoch:04d}.png",
                               imgs_a[0], G, F_)

    for b in (G, F_, D_A, D_B):
        b.module.eval()
    if out_dir is not None:
        _save_gan_checkpoint(out_dir / "checkpoints" / "final", G, F_, D_A, D_B)
        write_history_csv(history, out_dir / "loss_history.csv")
    return GanTrainResult(G, F_, D_A, D_B, history)


def _linear_decay(epochs: int):
    half = epochs - epochs // 2

    def factor(epoch: int) -> float:
        if epoch < epochs // 2:
            return 1.0
        return max(0.0, (epochs - epoch) / half)

    return factor


def translate(gen: ModelBundle, imgs: list[Image]) -> list[Image]:
    """Run images through a generator; outputs remapped from [-1,1] to [0,1]."""
    if gen.kind != "generator":
        raise ValueError("translate requires a generator bundle")
    gen.module.eval()
    x = images_to_tensor(imgs)
    with torch.no_grad():
        y = gen.module(x)
    out = ((y + 1.0) * 0.5).clamp(0.0, 1.0).numpy().transpose(0, 2, 3, 1)
    return [Image(a.astype(np.float64)) for a in out]


def write_history_csv(history: list[EpochStats], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "adv_AtoB", "adv_BtoA", "cyc", "edge", "total",
                    "adv_log_AtoB", "adv_log_BtoA"])
        for st in history:
            b = st.breakdown
            w.writerow([st.epoch, b.adv_AtoB, b.adv_BtoA, b.cyc, b.edge, b.total,
                        st.adv_log_AtoB, st.adv_log_BtoA])


def _save_gan_checkpoint(root: Path, G, F_, D_A, D_B) -> None:
    for name, bundle in (("G", G), ("F", F_), ("D_A", D_A), ("D_B", D_B)):
        save_bundle(bundle, root / name)


def _save_triptych(path: Path, img: Image, G: ModelBundle, F_: ModelBundle) -> None:
    """input | translated | reconstructed, side by side."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fake = translate(G, [img])[0]
    rec = translate(F_, [fake])[0]
    panel = np.concatenate([img.data, fake.data, rec.data], axis=1)
    save_image(Image(panel), path)
