import numpy as np
import pytest

from edgeadapt.data import AugmentSpec, DomainStyle, SynthSpec, two_domain_synth
from edgeadapt.edges import CannyParams
from edgeadapt.experiments import (
    ExperimentSpec,
    compare_report,
    edge_fidelity_report,
    run_adapted,
    run_baseline,
)
from edgeadapt.gan import GanConfig
from edgeadapt.metrics import MetricsReport
from edgeadapt.segmentation import SegConfig


def tiny_spec(tmp_path=None, epochs=1):
    style_a = DomainStyle(background=0.9, contrast=0.6, noise_std=0.01)
    style_b = DomainStyle(background=0.5, contrast=0.25, noise_std=0.01)
    dom_a, dom_b = two_domain_synth(style_a, style_b,
                                    SynthSpec(count=4, image_size=32, seed=0))
    target_test = two_domain_synth(style_a, style_b,
                                   SynthSpec(count=4, image_size=32, seed=500))[1]
    gan = GanConfig(epochs=epochs, batch_size=2, seed=0, pool_size=0,
                    gen_base_filters=8, gen_residual_blocks=2,
                    disc_base_filters=8, disc_layers=2)
    seg = SegConfig(epochs=2, batch_size=2, seed=0, unet_base_filters=8, unet_depth=2)
    return ExperimentSpec("synthA", "synthB", dom_a, dom_b, target_test,
                          gan, seg, output_root=tmp_path)


class TestRuns:
    def test_baseline(self, tmp_path):
        spec = tiny_spec(tmp_path)
        report = run_baseline(spec)
        assert report.method == "baseline"
        assert len(report.dice_per_image) == 4
        assert all(0 <= d <= 1 for d in report.dice_per_image)
        assert (tmp_path / "baseline" / "manifest.json").exists()

    def test_adapted_both_arms(self, tmp_path):
        spec = tiny_spec(tmp_path)
        for edge_enabled, method in ((True, "edgecyclegan"), (False, "cyclegan")):
            report, gan, unet = run_adapted(spec, edge_enabled=edge_enabled)
            assert report.method == method
            assert len(report.dice_per_image) == 4
            assert len(report.edge_f_per_image) == 4
            assert (tmp_path / method / "manifest.json").exists()
            if not edge_enabled:
                assert gan.history[-1].breakdown.edge == 0.0

    def test_source_equals_target_rejected(self, tmp_path):
        spec = tiny_spec(tmp_path)
        with pytest.raises(ValueError):
            ExperimentSpec("same", "same", spec.source_train, spec.target_train,
                           spec.target_test, spec.gan, spec.seg)


class TestEdgeFidelity:
    def test_identity_generators_score_perfectly(self):
        import torch

        from edgeadapt.networks import GeneratorSpec, build_generator

        spec = tiny_spec()

        class Identity(torch.nn.Module):
            def forward(self, x):
                return x

        g = build_generator(GeneratorSpec(1, 8, 2), 0)
        f = build_generator(GeneratorSpec(1, 8, 2), 1)
        g.module = Identity()
        f.module = Identity()
        report = edge_fidelity_report((g, f), spec.source_train, CannyParams())
        assert report.median_edge_f == pytest.approx(1.0)
        assert report.median_edge_l1 == pytest.approx(0.0, abs=1e-6)


class TestCompareReport:
    def reports(self):
        out = []
        for method, d1, d2 in (("baseline", 0.6808, 0.6382),
                               ("cyclegan", 0.7282, 0.7105),
                               ("edgecyclegan", 0.7784, 0.7629)):
            for direction, d in (("DRIVE->STARE", d1), ("STARE->DRIVE", d2)):
                out.append(MetricsReport(method, direction, dice_per_image=[d]))
        return out

    def test_three_by_two_table(self, tmp_path):
        table = compare_report(self.reports(), tmp_path)
        lines = table.splitlines()
        assert "DRIVE->STARE" in lines[0] and "STARE->DRIVE" in lines[0]
        assert len(lines) == 5  # header + rule + 3 methods
        assert "77.84" in table and "76.29" in table
        assert (tmp_path / "scores.csv").exists()
        assert (tmp_path / "scores.png").exists()

    def test_published_annotation(self):
        table = compare_report(self.reports(), include_published=True)
        assert "edgecyclegan (published)" in table

    def test_empty_reports_error(self):
        with pytest.raises(ValueError):
            compare_report([])

    def test_pure_function_of_inputs(self):
        assert compare_report(self.reports()) == compare_report(self.reports())
