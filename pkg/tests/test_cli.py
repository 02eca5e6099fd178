import numpy as np
import pytest

from pgadyn import cli
from pgadyn import dataset as D
from pgadyn import physics as P
from pgadyn import render as R


class TestParseObjects:
    def test_single_kind(self):
        shapes = cli.parse_objects("3xcircle")
        assert shapes == [P.Circle(0.25)] * 3

    def test_mixed_spec(self):
        shapes = cli.parse_objects("2xcircle+1xrect")
        assert shapes == [P.Circle(0.25), P.Circle(0.25), P.Rect(0.25, 0.15)]

    def test_bad_kind(self):
        with pytest.raises(ValueError, match="unknown shape"):
            cli.parse_objects("2xtriangle")

    def test_bad_count(self):
        with pytest.raises(ValueError, match="object spec"):
            cli.parse_objects("circle")


class TestWorkerCount:
    def test_env_cap(self, monkeypatch):
        monkeypatch.setenv("PGDYN_THREADS", "2")
        assert cli.worker_count(8) == 2

    def test_uncapped(self, monkeypatch):
        monkeypatch.delenv("PGDYN_THREADS", raising=False)
        assert cli.worker_count(3) == 3


class TestGenerate:
    def test_writes_dataset_and_manifest(self, tmp_path):
        out = str(tmp_path / "d.pgdy")
        code = cli.main(
            ["generate", "--objects", "2xcircle", "--episodes", "3",
             "--frames", "8", "--seed", "1", "--out", out]
        )
        assert code == 0
        eps = D.read_dataset(out)
        assert len(eps) == 3 and eps[0].states.shape == (8, 2, 6)
        manifest = D.read_manifest(out + ".manifest")
        assert manifest["objects"] == "2xcircle"
        assert "config_hash" in manifest

    def test_deterministic_reruns(self, tmp_path):
        argv = ["generate", "--objects", "1xrect", "--episodes", "2",
                "--frames", "6", "--seed", "3"]
        a, b = str(tmp_path / "a.pgdy"), str(tmp_path / "b.pgdy")
        cli.main(argv + ["--out", a])
        cli.main(argv + ["--out", b])
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_invalid_spec_is_usage_error(self, tmp_path):
        code = cli.main(
            ["generate", "--objects", "2xblob", "--episodes", "1",
             "--out", str(tmp_path / "d.pgdy")]
        )
        assert code == cli.EXIT_USAGE


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    data = str(root / "d.pgdy")
    ckpt = str(root / "model.ck")
    assert cli.main(
        ["generate", "--objects", "2xcircle", "--episodes", "4",
         "--frames", "16", "--seed", "2", "--out", data]
    ) == 0
    assert cli.main(
        ["train", "--variant", "s", "--blocks", "1", "--heads", "2",
         "--channels", "4", "--seq-len", "2", "--epochs", "2",
         "--val-fraction", "0.25", "--data", data, "--out", ckpt]
    ) == 0
    return root, data, ckpt


class TestTrainEvalRender:
    def test_train_outputs(self, pipeline):
        root, data, ckpt = pipeline
        assert (root / "model.ck").exists()
        assert (root / "model.ck.cfg").exists()
        assert (root / "model.ck.log.csv").exists()
        assert "params=" in (root / "model.ck.manifest").read_text()

    def test_eval_csv_and_dump(self, pipeline):
        root, data, ckpt = pipeline
        out = str(root / "eval.csv")
        dump = str(root / "pred.pgdy")
        code = cli.main(
            ["eval", "--ckpt", ckpt, "--data", data, "--horizon", "5",
             "--per-type", "--euler", "--dump", dump, "--out", out]
        )
        assert code == 0
        text = (root / "eval.csv").read_text()
        assert "object_wall" in text and "euler_rmse" in text
        preds = D.read_dataset(dump)
        assert len(preds) == 4 and preds[0].states.shape == (6, 2, 6)
        assert "predicted=True" in (root / "pred.pgdy.manifest").read_text()

    def test_render_truth_and_pred(self, pipeline):
        root, data, ckpt = pipeline
        dump = str(root / "pred.pgdy")
        outdir = root / "svg"
        code = cli.main(
            ["render", "--episode", data, "--pred", dump,
             "--frames", "0,2,4", "--out", str(outdir)]
        )
        assert code == 0
        files = sorted(p.name for p in outdir.iterdir())
        assert files == [
            "frame_0000.svg", "frame_0000_pred.svg",
            "frame_0002.svg", "frame_0002_pred.svg",
            "frame_0004.svg", "frame_0004_pred.svg",
        ]

    def test_render_out_of_range_frame(self, pipeline):
        root, data, _ = pipeline
        code = cli.main(
            ["render", "--episode", data, "--frames", "99",
             "--out", str(root / "svg2")]
        )
        assert code == cli.EXIT_DATA

    def test_eval_horizon_too_long(self, pipeline):
        root, data, ckpt = pipeline
        code = cli.main(
            ["eval", "--ckpt", ckpt, "--data", data, "--horizon", "99",
             "--out", str(root / "e2.csv")]
        )
        assert code == cli.EXIT_DATA

    def test_missing_data_file(self, pipeline):
        root, data, ckpt = pipeline
        code = cli.main(
            ["eval", "--ckpt", ckpt, "--data", str(root / "nope.pgdy"),
             "--out", str(root / "e3.csv")]
        )
        assert code == cli.EXIT_DATA


class TestConfigFile:
    def test_config_defaults_overridable(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("frames=6\nseed=9\n")
        out = str(tmp_path / "d.pgdy")
        code = cli.main(
            ["generate", "--config", str(cfg), "--objects", "1xcircle",
             "--episodes", "1", "--seed", "4", "--out", out]
        )
        assert code == 0
        manifest = D.read_manifest(out + ".manifest")
        assert manifest["frames"] == "6"  # from the config file
        assert manifest["seed"] == "4"  # flag wins

    def test_unknown_command_usage(self):
        assert cli.main(["frobnicate"]) == cli.EXIT_USAGE


class TestRenderDeterminism:
    def test_svg_bytes_stable(self, tmp_path):
        shapes = [P.Circle(0.25), P.Rect(0.25, 0.15)]
        ep = P.sample_episode(np.random.default_rng(5), shapes, P.WorldConfig(), frames=4)
        arena = P.WorldConfig().arena
        a = R.frame_svg(ep.states[2], shapes, arena)
        b = R.frame_svg(ep.states[2], shapes, arena)
        assert a == b
        assert a.startswith("<?xml")
        assert "<circle" in a and "<rect" in a

    def test_coordinate_mapping(self):
        x, y = R.to_svg_coords(1.0, 1.0, (0.0, 0.0, 4.0, 4.0))
        assert (x, y) == (100.0, 300.0)  # y flipped, 100 units per meter
