"""Dataset ingestion (DRIVE/STARE/generic layouts), seeded augmentation and
patch generation, and a procedural synthetic vascular-image generator for
desk-scale reproducible experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .image import Image, SegMask, load_image, load_mask, resize, save_image, save_mask

RASTER_EXTS = (".png", ".tif", ".tiff", ".ppm", ".gif")


@dataclass
class FundusDataset:
    name: str
    images: list[Image]
    labels: list[SegMask] | None = None
    fov_masks: list[SegMask] | None = None
    split: str = "train"
    transforms: list["PatchTransform"] | None = None

    def __post_init__(self):
        if self.labels is not None:
            if len(self.labels) != len(self.images):
                raise ValueError(
                    f"{self.name}: {len(self.images)} images but {len(self.labels)} labels")
            for i, (img, lab) in enumerate(zip(self.images, self.labels)):
                if (img.height, img.width) != (lab.height, lab.width):
                    raise ValueError(f"{self.name}: image/label dim mismatch at index {i}")

    def __len__(self) -> int:
        return len(self.images)


@dataclass(frozen=True)
class AugmentSpec:
    max_rotation_degrees: float = 15.0
    max_shift_fraction: float = 0.1
    patches_per_domain: int = 400
    patch_size: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.patches_per_domain < 1:
            raise ValueError("patches_per_domain must be >= 1")
        if not (0 <= self.max_rotation_degrees <= 45):
            raise ValueError("rotation must stay minor (<= 45 degrees)")
        if not (0 <= self.max_shift_fraction <= 0.25):
            raise ValueError("shift must stay minor (<= 25%)")


@dataclass(frozen=True)
class PatchTransform:
    """Recorded parameters of one augmentation draw, replayable on demand."""

    image_index: int
    angle: float
    shift_r: float
    shift_c: float
    top: int
    left: int
    window: int


@dataclass(frozen=True)
class DomainStyle:
    """Rendering style of a synthetic domain: vessels stay darker than the
    background (positive contrast)."""

    background: float = 0.85
    contrast: float = 0.5
    vignette: float = 0.0
    noise_std: float = 0.02

    def __post_init__(self):
        if not (0.0 < self.background <= 1.0):
            raise ValueError("background must lie in (0,1]")
        if not (0.0 < self.contrast <= self.background):
            raise ValueError("contrast must keep vessels darker than background")
        if not (0.0 <= self.vignette <= 1.0):
            raise ValueError("vignette must lie in [0,1]")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


@dataclass(frozen=True)
class SynthSpec:
    count: int = 20
    image_size: int = 64
    branches: int = 3
    width_min: float = 1.2
    width_max: float = 2.6
    tortuosity: float = 0.25
    style: DomainStyle = field(default_factory=DomainStyle)
    seed: int = 0

    def __post_init__(self):
        if self.count < 1 or self.image_size < 8:
            raise ValueError("need count >= 1 and image_size >= 8")
        if not (0 < self.width_min <= self.width_max):
            raise ValueError("invalid width range")


# --- ingestion ---------------------------------------------------------------


def _index_of(path: Path) -> str:
    return path.name.split("_")[0]


def ingest_dataset(root_path: str | Path, layout: str) -> FundusDataset:
    """Load a dataset directory. Layouts: ``drive`` (images/, 1st_manual/,
    mask/), ``stare`` (flat im*.ppm with im*.ah.ppm labels), ``generic``
    (images/ + labels/ [+ fov/] with matching stems)."""
    root = Path(root_path)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root does not exist: {root}")
    if layout == "drive":
        return _ingest_drive(root)
    if layout == "stare":
        return _ingest_stare(root)
    if layout == "generic":
        return _ingest_generic(root)
    raise ValueError(f"unknown layout: {layout!r}")


def _rasters(d: Path) -> list[Path]:
    return sorted(p for p in d.iterdir() if p.suffix.lower() in RASTER_EXTS)


def _ingest_drive(root: Path) -> FundusDataset:
    for sub in ("images", "1st_manual", "mask"):
        if not (root / sub).is_dir():
            raise FileNotFoundError(f"DRIVE layout: missing {root / sub}")
    image_files = _rasters(root / "images")
    label_by_idx = {_index_of(p): p for p in _rasters(root / "1st_manual")}
    fov_by_idx = {_index_of(p): p for p in _rasters(root / "mask")}
    if len(image_files) != 20:
        raise ValueError(
            f"DRIVE split expects 20 images, found {len(image_files)} in {root/'images'}")
    images, labels, fovs = [], [], []
    for p in image_files:
        idx = _index_of(p)
        if idx not in label_by_idx:
            raise FileNotFoundError(f"DRIVE: no manual label for image {p.name}")
        if idx not in fov_by_idx:
            raise FileNotFoundError(f"DRIVE: no FOV mask for image {p.name}")
        images.append(load_image(p))
        labels.append(load_mask(label_by_idx[idx]))
        fovs.append(load_mask(fov_by_idx[idx]))
    split = "train" if "training" in image_files[0].name else "test"
    return FundusDataset("drive", images, labels, fovs, split=split)


def _ingest_stare(root: Path) -> FundusDataset:
    all_files = _rasters(root)
    image_files = [p for p in all_files if ".ah" not in p.name and ".vk" not in p.name]
    label_by_stem = {p.name.split(".")[0]: p for p in all_files if ".ah" in p.name}
    if len(image_files) != 20:
        raise ValueError(
            f"STARE expects 20 images, found {len(image_files)} in {root}")
    images, labels = [], []
    for p in image_files:
        stem = p.name.split(".")[0]
        if stem not in label_by_stem:
            raise FileNotFoundError(f"STARE: no .ah label for image {p.name}")
        images.append(load_image(p))
        labels.append(load_mask(label_by_stem[stem]))
    return FundusDataset("stare", images, labels, split="all")


def _ingest_generic(root: Path) -> FundusDataset:
    img_dir = root / "images"
    if not img_dir.is_dir():
        raise FileNotFoundError(f"generic layout: missing {img_dir}")
    image_files = _rasters(img_dir)
    if not image_files:
        raise ValueError(f"no raster files in {img_dir}")
    images = [load_image(p) for p in image_files]
    labels = fovs = None
    for sub, slot in (("labels", "labels"), ("fov", "fov")):
        d = root / sub
        if d.is_dir():
            by_stem = {p.stem: p for p in _rasters(d)}
            got = []
            for p in image_files:
                if p.stem not in by_stem:
                    raise FileNotFoundError(f"generic: no {sub} file for image {p.name}")
                got.append(load_mask(by_stem[p.stem]))
            if slot == "labels":
                labels = got
            else:
                fovs = got
    return FundusDataset(root.name, images, labels, fovs, split="all")


def export_generic(ds: FundusDataset, root: str | Path) -> None:
    """Write a dataset out in the generic layout (PNG rasters)."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    if ds.labels is not None:
        (root / "labels").mkdir(exist_ok=True)
    if ds.fov_masks is not None:
        (root / "fov").mkdir(exist_ok=True)
    for i, img in enumerate(ds.images):
        stem = f"{i:04d}"
        save_image(img, root / "images" / f"{stem}.png")
        if ds.labels is not None:
            save_mask(ds.labels[i], root / "labels" / f"{stem}.png")
        if ds.fov_masks is not None:
            save_mask(ds.fov_masks[i], root / "fov" / f"{stem}.png")


# --- augmentation / patches ---------------------------------------------------


def _transform_array(arr: np.ndarray, t: PatchTransform, order: int) -> np.ndarray:
    out = ndimage.rotate(arr, t.angle, reshape=False, order=order, mode="reflect")
    out = ndimage.shift(out, (t.shift_r, t.shift_c), order=order, mode="reflect")
    return out[t.top : t.top + t.window, t.left : t.left + t.window]


def apply_patch_transform(img: Image, t: PatchTransform, patch_size: int,
                          nearest: bool = False) -> Image:
    order = 0 if nearest else 1
    chans = [
        _transform_array(img.data[:, :, c], t, order) for c in range(img.channels)
    ]
    window = Image(np.clip(np.stack(chans, axis=2), 0.0, 1.0))
    return resize(window, patch_size, patch_size)


def apply_patch_transform_mask(mask: SegMask, t: PatchTransform, patch_size: int) -> SegMask:
    arr = _transform_array(mask.data.astype(np.float64), t, order=0)
    window = Image(np.clip(arr, 0.0, 1.0)[:, :, None])
    resized = resize(window, patch_size, patch_size)
    return SegMask((resized.data[:, :, 0] > 0.5).astype(np.uint8))


def make_patches(ds: FundusDataset, spec: AugmentSpec) -> FundusDataset:
    """Draw exactly ``patches_per_domain`` augmented patches: seeded random
    rotation, shift, square window extraction, resize to ``patch_size``.
    Labels and FOV masks follow the identical transform with nearest-neighbor
    resampling. Every draw's parameters are recorded on the result."""
    rng = np.random.default_rng(spec.seed)
    images, labels, fovs, transforms = [], [], [], []
    n = len(ds.images)
    for _ in range(spec.patches_per_domain):
        i = int(rng.integers(n))
        src = ds.images[i]
        h, w = src.height, src.width
        window = min(h, w)
        angle = float(rng.uniform(-spec.max_rotation_degrees, spec.max_rotation_degrees))
        shift_r = float(rng.uniform(-1, 1) * spec.max_shift_fraction * h)
        shift_c = float(rng.uniform(-1, 1) * spec.max_shift_fraction * w)
        top = int(rng.integers(h - window + 1))
        left = int(rng.integers(w - window + 1))
        t = PatchTransform(i, angle, shift_r, shift_c, top, left, window)
        transforms.append(t)
        images.append(apply_patch_transform(src, t, spec.patch_size))
        if ds.labels is not None:
            labels.append(apply_patch_transform_mask(ds.labels[i], t, spec.patch_size))
        if ds.fov_masks is not None:
            fovs.append(apply_patch_transform_mask(ds.fov_masks[i], t, spec.patch_size))
    return FundusDataset(
        f"{ds.name}_patches",
        images,
        labels if ds.labels is not None else None,
        fovs if ds.fov_masks is not None else None,
        split=ds.split,
        transforms=transforms,
    )


# --- synthetic vasculature -----------------------------------------------------


def _draw_walk(alpha: np.ndarray, rng: np.random.Generator, start, heading: float,
               width: float, steps: int, tortuosity: float, depth: int) -> None:
    """Stamp an anti-aliased decaying-width random walk onto the coverage map,
    branching recursively."""
    size = alpha.shape[0]
    r, c = start
    for _ in range(steps):
        heading += float(rng.normal(0.0, tortuosity))
        r += math.sin(heading)
        c += math.cos(heading)
        if not (-2 <= r < size + 2 and -2 <= c < size + 2):
            break
        width = max(0.7, width * 0.995)
        _stamp_disk(alpha, r, c, width / 2.0)
        if depth > 0 and rng.random() < 0.02:
            child_heading = heading + float(rng.choice((-1, 1))) * float(rng.uniform(0.4, 0.9))
            _draw_walk(alpha, rng, (r, c), child_heading, width * 0.7,
                       steps // 2, tortuosity, depth - 1)


def _stamp_disk(alpha: np.ndarray, r: float, c: float, radius: float) -> None:
    size = alpha.shape[0]
    lo_r = max(0, int(r - radius - 1))
    hi_r = min(size, int(r + radius + 2))
    lo_c = max(0, int(c - radius - 1))
    hi_c = min(size, int(c + radius + 2))
    if lo_r >= hi_r or lo_c >= hi_c:
        return
    rr, cc = np.mgrid[lo_r:hi_r, lo_c:hi_c]
    dist = np.sqrt((rr - r) ** 2 + (cc - c) ** 2)
    cover = np.clip(radius + 0.5 - dist, 0.0, 1.0)
    np.maximum(alpha[lo_r:hi_r, lo_c:hi_c], cover, out=alpha[lo_r:hi_r, lo_c:hi_c])


def _vessel_alpha(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    size = spec.image_size
    alpha = np.zeros((size, size))
    for _ in range(spec.branches):
        edge = int(rng.integers(4))
        pos = float(rng.uniform(0.2, 0.8)) * size
        start = {0: (0.0, pos), 1: (size - 1.0, pos), 2: (pos, 0.0), 3: (pos, size - 1.0)}[edge]
        heading = {0: math.pi / 2, 1: -math.pi / 2, 2: 0.0, 3: math.pi}[edge]
        heading += float(rng.uniform(-0.5, 0.5))
        width = float(rng.uniform(spec.width_min, spec.width_max))
        _draw_walk(alpha, rng, start, heading, width,
                   steps=int(1.5 * size), tortuosity=spec.tortuosity, depth=2)
    return alpha


def _render(alpha: np.ndarray, style: DomainStyle, rng: np.random.Generator) -> Image:
    size = alpha.shape[0]
    yy, xx = np.mgrid[0:size, 0:size]
    centre = (size - 1) / 2.0
    rad2 = ((yy - centre) ** 2 + (xx - centre) ** 2) / (2 * centre ** 2 + 1e-12)
    base = style.background * (1.0 - style.vignette * rad2)
    img = base - style.contrast * alpha
    if style.noise_std > 0:
        img = img + rng.normal(0.0, style.noise_std, img.shape)
    return Image(np.clip(img, 0.0, 1.0)[:, :, None])


def synth_fundus(spec: SynthSpec) -> FundusDataset:
    """Procedural branching vessel trees rendered dark-on-light with exact
    masks from the drawn strokes. Deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    images, labels = [], []
    for _ in range(spec.count):
        alpha = _vessel_alpha(spec, rng)
        images.append(_render(alpha, spec.style, rng))
        labels.append(SegMask((alpha >= 0.5).astype(np.uint8)))
    return FundusDataset(f"synth_seed{spec.seed}", images, labels, split="all")


def two_domain_synth(style_a: DomainStyle, style_b: DomainStyle,
                     spec: SynthSpec) -> tuple[FundusDataset, FundusDataset]:
    """Two domains with the same vessel-geometry distribution but different
    rendering styles; the domains draw from disjoint seeds."""
    dom_a = synth_fundus(replace(spec, style=style_a))
    dom_b = synth_fundus(replace(spec, style=style_b, seed=spec.seed + 100003))
    return dom_a, dom_b
