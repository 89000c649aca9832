import json

import pytest
import yaml

from edgeadapt.cli import main
from edgeadapt.data import ingest_dataset


GAN_FLAGS = [
    "--epochs", "1", "--batch-size", "2", "--pool-size", "0",
    "--gen-base-filters", "8", "--gen-residual-blocks", "2",
    "--disc-base-filters", "8", "--disc-layers", "2",
]


def synth_domain(tmp_path, name, background, contrast, seed):
    out = tmp_path / name
    assert main(["synth", "--out", str(out), "--count", "4", "--image-size", "32",
                 "--seed", str(seed), "--background", str(background),
                 "--contrast", str(contrast), "--noise-std", "0.01"]) == 0
    return out


class TestSynthCommand:
    def test_writes_generic_layout(self, tmp_path):
        out = synth_domain(tmp_path, "a", 0.9, 0.6, 0)
        ds = ingest_dataset(out, "generic")
        assert len(ds) == 4
        assert ds.labels is not None


class TestStageCommands:
    def test_full_stage_sequence(self, tmp_path, capsys):
        dom_a = synth_domain(tmp_path, "a", 0.9, 0.6, 0)
        dom_b = synth_domain(tmp_path, "b", 0.5, 0.25, 77)

        gan_out = tmp_path / "gan"
        assert main(["train-gan", "--domain-a", str(dom_a), "--domain-b", str(dom_b),
                     "--out", str(gan_out), "--seed", "0", *GAN_FLAGS]) == 0
        gen_ckpt = gan_out / "checkpoints" / "final" / "G"
        assert gen_ckpt.is_dir()

        trans_out = tmp_path / "translated"
        assert main(["translate", "--generator", str(gen_ckpt),
                     "--data", str(dom_a), "--out", str(trans_out)]) == 0
        assert len(list(trans_out.glob("*.png"))) == 4

        seg_out = tmp_path / "seg"
        assert main(["train-seg", "--data", str(dom_a), "--generator", str(gen_ckpt),
                     "--out", str(seg_out), "--seed", "0", "--epochs", "2",
                     "--batch-size", "2", "--unet-base-filters", "8",
                     "--unet-depth", "2"]) == 0
        unet_ckpt = seg_out / "checkpoints" / "unet_final"
        assert unet_ckpt.is_dir()

        eval_out = tmp_path / "eval"
        assert main(["evaluate", "--unet", str(unet_ckpt), "--data", str(dom_b),
                     "--out", str(eval_out), "--method", "adapted",
                     "--direction", "a->b"]) == 0
        metrics = json.loads((eval_out / "metrics_adapted.json").read_text())
        assert len(metrics["dice_per_image"]) == 4

        report_out = tmp_path / "report"
        assert main(["report", str(eval_out / "metrics_adapted.json"),
                     "--out", str(report_out)]) == 0
        assert (report_out / "scores.csv").exists()
        assert "a->b" in capsys.readouterr().out


class TestPipelineCommand:
    def test_pipeline_from_config(self, tmp_path, capsys):
        cfg = {
            "source_name": "synthA",
            "target_name": "synthB",
            "source": {"synth": {"count": 4, "image_size": 32, "seed": 0,
                                 "style": {"background": 0.9, "contrast": 0.6,
                                           "noise_std": 0.01}}},
            "target": {"synth": {"count": 4, "image_size": 32, "seed": 100,
                                 "style": {"background": 0.5, "contrast": 0.25,
                                           "noise_std": 0.01}}},
            "gan": {"epochs": 1, "batch_size": 2, "pool_size": 0,
                    "gen_base_filters": 8, "gen_residual_blocks": 2,
                    "disc_base_filters": 8, "disc_layers": 2},
            "seg": {"epochs": 2, "batch_size": 2, "unet_base_filters": 8,
                    "unet_depth": 2},
        }
        cfg_path = tmp_path / "exp.yaml"
        cfg_path.write_text(yaml.safe_dump(cfg))
        out = tmp_path / "run"
        assert main(["pipeline", "--config", str(cfg_path), "--seed", "0",
                     "--out", str(out)]) == 0
        for method in ("baseline", "cyclegan", "edgecyclegan"):
            assert (out / f"metrics_{method}.json").exists()
        assert (out / "scores.txt").exists()
        stdout = capsys.readouterr().out
        assert "synthA->synthB" in stdout

    def test_pipeline_requires_seed(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["pipeline", "--config", "x.yaml", "--out", str(tmp_path)])
