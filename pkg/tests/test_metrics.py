import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgeadapt.image import SegMask
from edgeadapt.metrics import (
    MetricsReport,
    accuracy,
    dice_score,
    load_report,
    precision_recall,
    save_report,
)


def mask(arr):
    return SegMask(np.asarray(arr, dtype=np.uint8))


def random_mask(rng, n=8):
    return mask(rng.integers(0, 2, (n, n)))


class TestDice:
    def test_identical_nonempty(self):
        m = mask([[1, 0], [1, 1]])
        assert dice_score(m, m) == 1.0

    def test_disjoint(self):
        assert dice_score(mask([[1, 0]]), mask([[0, 1]])) == 0.0

    def test_hand_fixture(self):
        # |P|=5, |G|=3, |P∩G|=2 -> 2*2/8 = 0.5
        pred = mask([[1, 1, 1], [1, 1, 0], [0, 0, 0]])
        gt = mask([[1, 0, 0], [0, 1, 0], [0, 0, 1]])
        assert dice_score(pred, gt) == 0.5

    def test_both_empty(self):
        z = mask(np.zeros((3, 3)))
        assert dice_score(z, z) == 1.0

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a, b = random_mask(rng), random_mask(rng)
            assert dice_score(a, b) == dice_score(b, a)

    def test_equals_f1_on_random_pairs(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            pred, gt = random_mask(rng, 6), random_mask(rng, 6)
            p, r = precision_recall(pred, gt)
            if p + r > 0:
                assert abs(dice_score(pred, gt) - 2 * p * r / (p + r)) < 1e-12

    def test_fov_restriction(self):
        pred = mask([[1, 1], [0, 0]])
        gt = mask([[1, 0], [0, 0]])
        fov = mask([[1, 0], [1, 1]])  # excludes the false positive at (0,1)
        assert dice_score(pred, gt, fov) == 1.0

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            dice_score(mask(np.zeros((2, 2))), mask(np.zeros((3, 3))))


class TestPrecisionRecall:
    def test_perfect(self):
        m = mask([[1, 0], [1, 1]])
        assert precision_recall(m, m) == (1.0, 1.0)

    def test_strict_subset(self):
        pred = mask([[1, 0], [0, 0]])
        gt = mask([[1, 1], [0, 0]])
        p, r = precision_recall(pred, gt)
        assert p == 1.0 and r == 0.5

    def test_hand_counted_3x3(self):
        pred = mask([[1, 1, 0], [0, 1, 0], [0, 0, 1]])
        gt = mask([[1, 0, 0], [1, 1, 0], [0, 0, 0]])
        p, r = precision_recall(pred, gt)
        assert p == pytest.approx(2 / 4)
        assert r == pytest.approx(2 / 3)

    def test_accuracy(self):
        pred = mask([[1, 0], [0, 0]])
        gt = mask([[1, 1], [0, 0]])
        assert accuracy(pred, gt) == 0.75


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_dice_in_unit_interval(seed):
    rng = np.random.default_rng(seed)
    pred, gt = random_mask(rng, 5), random_mask(rng, 5)
    d = dice_score(pred, gt)
    assert 0.0 <= d <= 1.0


class TestReportIO:
    def test_roundtrip(self, tmp_path):
        r = MetricsReport("baseline", "a->b", dice_per_image=[0.5, 0.7],
                          precision_per_image=[0.6, 0.8], recall_per_image=[0.4, 0.9],
                          config={"seg": {"epochs": 3}}, seed=5, elapsed_seconds=1.5)
        save_report(r, tmp_path / "m.json")
        back = load_report(tmp_path / "m.json")
        assert back == r
        assert back.dice == pytest.approx(0.6)
