import re

import pytest

from pgaviz import cli


def run(*argv):
    return cli.main(list(argv))


class TestCommands:
    def test_each_figure_matches_reference(self, fixtures, tmp_path):
        csv = str(fixtures / "eval.csv")
        cases = [
            (["rmse-by-type", csv], "ref_rmse_by_type.svg"),
            (["horizon", csv], "ref_horizon.svg"),
            (["euler", csv], "ref_euler.svg"),
            (
                [
                    "sample-efficiency",
                    f"s={fixtures / 's.log.csv'}",
                    f"transformer={fixtures / 'transformer.log.csv'}",
                    "--baseline", "transformer",
                ],
                "ref_sample_efficiency.svg",
            ),
            (
                [
                    "rollout-strip",
                    "--episode", str(fixtures / "episode.pgdy"),
                    "--pred", str(fixtures / "pred.pgdy"),
                    "--frames", "1,3,5,7,9,11",
                ],
                "ref_rollout_strip.svg",
            ),
        ]
        for argv, ref in cases:
            out = tmp_path / ref
            assert run(*argv, "--out", str(out)) == 0
            assert out.read_bytes() == (fixtures / ref).read_bytes()

    def test_header_only_csv_is_data_error(self, tmp_path):
        from pgaviz import data as D

        path = tmp_path / "empty.csv"
        path.write_text(",".join(D.EVAL_COLUMNS) + "\n")
        assert run("horizon", str(path), "--out", str(tmp_path / "x.svg")) == 3

    def test_missing_file_is_data_error(self, tmp_path):
        assert run("euler", str(tmp_path / "none.csv"), "--out", "x.svg") == 3

    def test_unknown_command_is_usage_error(self):
        assert run("scatter") == 2

    def test_bad_log_spec_is_usage_error(self, tmp_path):
        assert run(
            "sample-efficiency", "nameonly", "--baseline", "s",
            "--out", str(tmp_path / "x.svg"),
        ) == 2

    def test_bad_episode_index_is_data_error(self, fixtures, tmp_path):
        assert run(
            "rollout-strip", "--episode", str(fixtures / "episode.pgdy"),
            "--index", "5", "--out", str(tmp_path / "x.svg"),
        ) == 3


class TestRenderAgreement:
    """The strip must place bodies where the pipeline's own renderer does."""

    def test_panel_coordinates_match_primary_render(self, fixtures, tmp_path):
        pgadyn_cli = pytest.importorskip("pgadyn.cli")
        frame = 5
        code = pgadyn_cli.main(
            [
                "render", "--episode", str(fixtures / "episode.pgdy"),
                "--frames", str(frame), "--out", str(tmp_path / "ref"),
            ]
        )
        assert code == 0
        ref_svg = (tmp_path / "ref" / f"frame_{frame:04d}.svg").read_text()
        assert run(
            "rollout-strip", "--episode", str(fixtures / "episode.pgdy"),
            "--frames", str(frame), "--out", str(tmp_path / "strip.svg"),
        ) == 0
        strip_svg = (tmp_path / "strip.svg").read_text()
        pattern = r'<circle cx="([-\d.]+)" cy="([-\d.]+)" r="([-\d.]+)"'
        ref_pts = [tuple(map(float, m)) for m in re.findall(pattern, ref_svg)]
        strip_pts = [tuple(map(float, m)) for m in re.findall(pattern, strip_svg)]
        assert len(ref_pts) == 2 and len(strip_pts) == 2
        for (rx, ry, rr), (sx, sy, sr) in zip(ref_pts, strip_pts):
            assert abs(rx - sx) <= 1.0
            assert abs(ry - sy) <= 1.0
            assert abs(rr - sr) <= 1.0
