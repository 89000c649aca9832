"""Convolutional building blocks: residual generators, patch discriminators
and a U-Net segmentor, plus a seeded builder / checkpoint layer.

Networks consume tensors in [-1, 1]; remapping from [0, 1] images happens at
this boundary. Checkpoints are a directory with a JSON manifest and one
little-endian float32 blob per parameter tensor.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .image import Image, ProbMap

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class GeneratorSpec:
    input_channels: int = 3
    base_filters: int = 64
    residual_blocks: int = 9

    def __post_init__(self):
        if self.residual_blocks < 1:
            raise ValueError("residual_blocks must be >= 1")


def default_residual_blocks(patch_size: int) -> int:
    """9 blocks for >=256 px patches, 6 below (CycleGAN convention)."""
    return 9 if patch_size >= 256 else 6


@dataclass(frozen=True)
class DiscriminatorSpec:
    input_channels: int = 3
    base_filters: int = 64
    layers: int = 3  # number of stride-2 conv blocks

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("layers must be >= 1")


@dataclass(frozen=True)
class UNetSpec:
    input_channels: int = 3
    base_filters: int = 64
    depth: int = 4
    classes: int = 2

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.classes < 2:
            raise ValueError("classes must be >= 2")


_SPEC_TYPES = {
    "generator": GeneratorSpec,
    "discriminator": DiscriminatorSpec,
    "unet": UNetSpec,
}


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv2d(channels, channels, 3, 1, 1, padding_mode="reflect"),
            nn.InstanceNorm2d(channels),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, 3, 1, 1, padding_mode="reflect"),
            nn.InstanceNorm2d(channels),
        )

    def forward(self, x):
        return x + self.block(x)


class ResnetGenerator(nn.Module):
    """Shape-preserving translator with two downsampling stages, residual
    blocks, and a tanh output in [-1, 1]."""

    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        c, nf = spec.input_channels, spec.base_filters
        layers = [
            nn.Conv2d(c, nf, 7, 1, 3, padding_mode="reflect"),
            nn.InstanceNorm2d(nf),
            nn.ReLU(inplace=True),
        ]
        for mult in (1, 2):
            layers += [
                nn.Conv2d(nf * mult, nf * mult * 2, 3, 2, 1),
                nn.InstanceNorm2d(nf * mult * 2),
                nn.ReLU(inplace=True),
            ]
        layers += [ResidualBlock(nf * 4) for _ in range(spec.residual_blocks)]
        for mult in (4, 2):
            layers += [
                nn.ConvTranspose2d(nf * mult, nf * mult // 2, 3, 2, 1, output_padding=1),
                nn.InstanceNorm2d(nf * mult // 2),
                nn.ReLU(inplace=True),
            ]
        layers += [nn.Conv2d(nf, c, 7, 1, 3, padding_mode="reflect"), nn.Tanh()]
        self.model = nn.Sequential(*layers)

    def forward(self, x):
        return self.model(x)


class PatchDiscriminator(nn.Module):
    """Fully-convolutional discriminator emitting a patch-level score map."""

    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        nf = spec.base_filters
        layers = [
            nn.Conv2d(spec.input_channels, nf, 4, 2, 1),
            nn.LeakyReLU(0.2, inplace=True),
        ]
        mult = 1
        for i in range(1, spec.layers):
            prev, mult = mult, min(2 ** i, 8)
            layers += [
                nn.Conv2d(nf * prev, nf * mult, 4, 2, 1),
                nn.InstanceNorm2d(nf * mult),
                nn.LeakyReLU(0.2, inplace=True),
            ]
        prev, mult = mult, min(2 ** spec.layers, 8)
        layers += [
            nn.Conv2d(nf * prev, nf * mult, 4, 1, 1),
            nn.InstanceNorm2d(nf * mult),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(nf * mult, 1, 4, 1, 1),
        ]
        self.model = nn.Sequential(*layers)

    def forward(self, x):
        return self.model(x)


def discriminator_map_size(n: int, layers: int = 3) -> int:
    """Score-map side length for an n-pixel input (k=4, p=1 stride arithmetic)."""
    for _ in range(layers):
        n = (n + 2 - 4) // 2 + 1
    for _ in range(2):
        n = n + 2 - 4 + 1
    return n


class _DoubleConv(nn.Module):
    def __init__(self, cin: int, cout: int):
        super().__init__()
        # No normalization layers, matching the original U-Net: per-image
        # normalization would discard absolute intensity, which carries the
        # domain-specific appearance the adaptation stage exists to handle.
        self.block = nn.Sequential(
            nn.Conv2d(cin, cout, 3, 1, 1),
            nn.ReLU(inplace=True),
            nn.Conv2d(cout, cout, 3, 1, 1),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.block(x)


class UNet(nn.Module):
    """Encoder-decoder segmentor with skip connections at every level.

    Upsampling is bilinear + conv (no transposed convolutions, which leave
    checkerboard artifacts that would skew edge comparisons). Outputs logits;
    softmax is applied by the callers that need probabilities.
    """

    def __init__(self, spec: UNetSpec):
        super().__init__()
        self.depth = spec.depth
        nf = spec.base_filters
        chans = [nf * 2 ** i for i in range(spec.depth + 1)]
        self.enc = nn.ModuleList()
        cin = spec.input_channels
        for c in chans[:-1]:
            self.enc.append(_DoubleConv(cin, c))
            cin = c
        self.bottleneck = _DoubleConv(chans[-2], chans[-1])
        self.up = nn.ModuleList()
        self.dec = nn.ModuleList()
        for c in reversed(chans[:-1]):
            self.up.append(nn.Conv2d(c * 2, c, 3, 1, 1))
            self.dec.append(_DoubleConv(c * 2, c))
        self.head = nn.Conv2d(chans[0], spec.classes, 1)

    def forward(self, x):
        h, w = x.shape[-2:]
        div = 2 ** self.depth
        if h % div or w % div:
            raise ValueError(f"input dims {h}x{w} not divisible by 2^depth={div}")
        skips = []
        for enc in self.enc:
            x = enc(x)
            skips.append(x)
            x = F.max_pool2d(x, 2)
        x = self.bottleneck(x)
        for up, dec, skip in zip(self.up, self.dec, reversed(skips)):
            x = up(F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False))
            x = dec(torch.cat([skip, x], dim=1))
        return self.head(x)


@dataclass
class ModelBundle:
    """A network together with its spec, seed, and training step counter."""

    kind: str
    spec: GeneratorSpec | DiscriminatorSpec | UNetSpec
    module: nn.Module
    seed: int
    step: int = 0

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.module.parameters())

    def state_bytes(self) -> bytes:
        """Canonical little-endian float32 serialization of all parameters."""
        chunks = []
        for name, tensor in sorted(self.module.state_dict().items()):
            chunks.append(tensor.detach().numpy().astype("<f4").tobytes())
        return b"".join(chunks)


def _init_weights(module: nn.Module) -> None:
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.normal_(m.weight, 0.0, 0.02)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


def _build(kind: str, spec, seed: int) -> ModelBundle:
    torch.manual_seed(seed)
    ctor = {"generator": ResnetGenerator, "discriminator": PatchDiscriminator, "unet": UNet}[kind]
    module = ctor(spec)
    _init_weights(module)
    module.eval()
    return ModelBundle(kind=kind, spec=spec, module=module, seed=seed)


def build_generator(spec: GeneratorSpec, seed: int = 0) -> ModelBundle:
    return _build("generator", spec, seed)


def build_discriminator(spec: DiscriminatorSpec, seed: int = 0) -> ModelBundle:
    return _build("discriminator", spec, seed)


def build_unet(spec: UNetSpec, seed: int = 0) -> ModelBundle:
    return _build("unet", spec, seed)


def images_to_tensor(imgs: list[Image]) -> torch.Tensor:
    """Stack images into a (B,C,H,W) tensor remapped to [-1, 1]."""
    arr = np.stack([img.data for img in imgs]).transpose(0, 3, 1, 2)
    return torch.from_numpy(arr).to(torch.float32) * 2.0 - 1.0


def forward(bundle: ModelBundle, imgs: list[Image]):
    """Run a batch through the network, preserving order.

    Returns raw per-item outputs: H x W x C arrays in [-1, 1] for generators,
    H' x W' score maps for discriminators, and ProbMaps for the U-Net.
    """
    for img in imgs:
        if img.channels != bundle.spec.input_channels:
            raise ValueError(
                f"{bundle.kind} expects {bundle.spec.input_channels} channels, "
                f"got {img.channels}"
            )
    x = images_to_tensor(imgs)
    with torch.no_grad():
        y = bundle.module(x)
    if not torch.all(torch.isfinite(y)):
        raise FloatingPointError("network produced non-finite outputs")
    if bundle.kind == "generator":
        return [t.numpy().transpose(1, 2, 0) for t in y]
    if bundle.kind == "discriminator":
        return [t.numpy()[0] for t in y]
    probs = torch.softmax(y, dim=1)
    return [ProbMap(t.numpy().transpose(1, 2, 0)) for t in probs]


# --- checkpoints -------------------------------------------------------------


def save_bundle(bundle: ModelBundle, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tensors = []
    for name, tensor in sorted(bundle.module.state_dict().items()):
        fname = name.replace(".", "__") + ".bin"
        data = tensor.detach().numpy().astype("<f4")
        (directory / fname).write_bytes(data.tobytes())
        tensors.append({"name": name, "file": fname, "shape": list(tensor.shape)})
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": bundle.kind,
        "spec": asdict(bundle.spec),
        "seed": bundle.seed,
        "step": bundle.step,
        "tensors": tensors,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))


def load_bundle(directory: str | Path) -> ModelBundle:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {manifest['format_version']}")
    kind = manifest["kind"]
    spec = _SPEC_TYPES[kind](**manifest["spec"])
    bundle = _build(kind, spec, manifest["seed"])
    bundle.step = manifest["step"]
    state = {}
    for entry in manifest["tensors"]:
        raw = np.frombuffer((directory / entry["file"]).read_bytes(), dtype="<f4")
        state[entry["name"]] = torch.from_numpy(raw.reshape(entry["shape"]).copy())
    bundle.module.load_state_dict(state)
    return bundle
