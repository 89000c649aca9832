import numpy as np
import pytest
import torch

from edgeadapt.image import Image
from edgeadapt.networks import (
    DiscriminatorSpec,
    GeneratorSpec,
    UNetSpec,
    build_discriminator,
    build_generator,
    build_unet,
    default_residual_blocks,
    discriminator_map_size,
    forward,
    load_bundle,
    save_bundle,
)


def rand_images(rng, n=2, size=64, channels=3):
    return [Image(rng.random((size, size, channels))) for _ in range(n)]


SMALL_GEN = GeneratorSpec(input_channels=3, base_filters=8, residual_blocks=2)
SMALL_DISC = DiscriminatorSpec(input_channels=3, base_filters=8, layers=3)
SMALL_UNET = UNetSpec(input_channels=3, base_filters=8, depth=4)


class TestGenerator:
    def test_shape_and_range(self):
        rng = np.random.default_rng(0)
        bundle = build_generator(SMALL_GEN, seed=1)
        outs = forward(bundle, rand_images(rng))
        for out in outs:
            assert out.shape == (64, 64, 3)
            assert out.min() >= -1.0 and out.max() <= 1.0

    def test_same_seed_bit_identical(self):
        a = build_generator(SMALL_GEN, seed=7)
        b = build_generator(SMALL_GEN, seed=7)
        assert a.state_bytes() == b.state_bytes()
        c = build_generator(SMALL_GEN, seed=8)
        assert a.state_bytes() != c.state_bytes()

    def test_parameter_count_matches_hand_sum(self):
        spec = GeneratorSpec(input_channels=3, base_filters=64, residual_blocks=9)

        def conv(cin, cout, k):
            return cin * cout * k * k + cout

        expected = conv(3, 64, 7)
        expected += conv(64, 128, 3) + conv(128, 256, 3)
        expected += 9 * 2 * conv(256, 256, 3)
        expected += conv(256, 128, 3) + conv(128, 64, 3)  # transposed convs
        expected += conv(64, 3, 7)
        assert build_generator(spec).parameter_count() == expected

    def test_default_residual_blocks(self):
        assert default_residual_blocks(512) == 9
        assert default_residual_blocks(64) == 6


class TestDiscriminator:
    def test_score_map_dims_64(self):
        # stride arithmetic: 64 -> 32 -> 16 -> 8 (three k4 s2 p1),
        # then two k4 s1 p1 convs: 8 -> 7 -> 6
        assert discriminator_map_size(64, layers=3) == 6
        rng = np.random.default_rng(1)
        bundle = build_discriminator(SMALL_DISC, seed=2)
        out = forward(bundle, rand_images(rng, n=1))[0]
        assert out.shape == (6, 6)

    @pytest.mark.parametrize("n", [64, 128, 256])
    def test_fully_convolutional_stride_arithmetic(self, n):
        rng = np.random.default_rng(2)
        bundle = build_discriminator(SMALL_DISC, seed=2)
        out = forward(bundle, rand_images(rng, n=1, size=n))[0]
        expected = discriminator_map_size(n, layers=3)
        assert out.shape == (expected, expected)
        assert expected == n // 8 - 2

    def test_same_seed_bit_identical(self):
        a = build_discriminator(SMALL_DISC, seed=3)
        b = build_discriminator(SMALL_DISC, seed=3)
        assert a.state_bytes() == b.state_bytes()


class TestUNet:
    def test_probmap_output(self):
        rng = np.random.default_rng(3)
        bundle = build_unet(SMALL_UNET, seed=4)
        prob = forward(bundle, rand_images(rng, n=1))[0]
        assert prob.data.shape == (64, 64, 2)
        assert np.abs(prob.data.sum(axis=2) - 1.0).max() < 1e-5

    def test_indivisible_dims_error(self):
        rng = np.random.default_rng(4)
        bundle = build_unet(SMALL_UNET, seed=4)
        with pytest.raises(ValueError, match="divisible"):
            forward(bundle, [Image(rng.random((60, 60, 3)))])

    def test_same_seed_bit_identical(self):
        a = build_unet(SMALL_UNET, seed=5)
        b = build_unet(SMALL_UNET, seed=5)
        assert a.state_bytes() == b.state_bytes()

    def test_channel_mismatch_rejected(self):
        rng = np.random.default_rng(5)
        bundle = build_unet(SMALL_UNET, seed=4)
        with pytest.raises(ValueError, match="channels"):
            forward(bundle, [Image(rng.random((64, 64, 1)))])


class TestForward:
    def test_batch_order_preserved(self):
        rng = np.random.default_rng(6)
        imgs = rand_images(rng, n=3)
        bundle = build_generator(SMALL_GEN, seed=6)
        batch = forward(bundle, imgs)
        singles = [forward(bundle, [im])[0] for im in imgs]
        for got, want in zip(batch, singles):
            assert np.allclose(got, want, atol=1e-6)

    def test_forward_deterministic(self):
        rng = np.random.default_rng(7)
        imgs = rand_images(rng, n=2)
        bundle = build_generator(SMALL_GEN, seed=6)
        a = forward(bundle, imgs)
        b = forward(bundle, imgs)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)


class TestCheckpoints:
    @pytest.mark.parametrize("kind", ["generator", "discriminator", "unet"])
    def test_roundtrip_lossless(self, tmp_path, kind):
        builder, spec = {
            "generator": (build_generator, SMALL_GEN),
            "discriminator": (build_discriminator, SMALL_DISC),
            "unet": (build_unet, SMALL_UNET),
        }[kind]
        bundle = builder(spec, seed=9)
        bundle.step = 123
        save_bundle(bundle, tmp_path / kind)
        back = load_bundle(tmp_path / kind)
        assert back.kind == kind
        assert back.spec == spec
        assert back.seed == 9
        assert back.step == 123
        assert back.state_bytes() == bundle.state_bytes()

    def test_manifest_contents(self, tmp_path):
        import json

        bundle = build_generator(SMALL_GEN, seed=1)
        save_bundle(bundle, tmp_path / "g")
        manifest = json.loads((tmp_path / "g" / "manifest.json").read_text())
        assert manifest["format_version"] == 1
        assert manifest["kind"] == "generator"
        assert manifest["spec"]["base_filters"] == 8
        names = {t["name"] for t in manifest["tensors"]}
        assert names == {n for n, _ in bundle.module.state_dict().items()}

    def test_finite_gradients_after_one_step(self):
        # every parameter of every network gets a finite gradient
        rng = np.random.default_rng(8)
        gen = build_generator(SMALL_GEN, seed=1)
        disc = build_discriminator(SMALL_DISC, seed=2)
        x = torch.from_numpy(
            np.stack([im.data for im in rand_images(rng, 2)]).transpose(0, 3, 1, 2)
        ).float() * 2 - 1
        fake = gen.module(x)
        loss = ((disc.module(fake) - 1) ** 2).mean() + fake.abs().mean()
        loss.backward()
        for module in (gen.module, disc.module):
            for p in module.parameters():
                assert p.grad is not None
                assert torch.all(torch.isfinite(p.grad))
