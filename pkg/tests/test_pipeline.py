import json

import numpy as np
import pytest
from PIL import Image

from stereolane import PipelineConfig, PipelineReport, run_pipeline
from stereolane.cli import main
from stereolane.errors import RoadProfileError, StageError
from stereolane.io import read_csv, read_disparity_pgm
from stereolane.pipeline import STAGES, bench, lanes_signature, parse_kv
from stereolane.road import road_fn, vpy_profile


# configuration ----------------------------------------------------------------

def test_config_defaults():
    c = PipelineConfig()
    assert (c.rho, c.tau, c.d_max, c.tr_lrc, c.sigma_floor) == (3, 1, 64, 3, 1e-4)
    assert (c.lambda_y, c.tr_y, c.eps_y, c.varpi) == (30, 4, 0.99, 3)
    assert (c.sigma_s, c.sigma_r, c.bf_window, c.sobel_threshold) == (300, 0.3, 11, 100)
    assert (c.chi, c.rho_vote, c.lambda_x, c.tr_x, c.eps_x) == (25, 1, 10, 16, 0.99)
    assert (c.sigma_g, c.nu, c.varsigma, c.lambda_g, c.xi, c.min_lane_sep) == (3.5, 1, 3, 1.0, 0.5, 20)
    assert c.tr_lpv is None and c.paper_sign is False


def test_parse_kv():
    vals = parse_kv("# comment\nrho = 2\n\nd_max=40  # trailing\npaper_sign = true\n")
    assert vals == {"rho": "2", "d_max": "40", "paper_sign": "true"}
    with pytest.raises(ValueError):
        parse_kv("rho = 2\nrho = 3\n")
    with pytest.raises(ValueError):
        parse_kv("just words\n")


def test_config_from_mapping_coerces_and_validates():
    c = PipelineConfig.from_mapping({"rho": "2", "d_max": "40", "paper_sign": "true", "tr_lpv": "-12.5"})
    assert (c.rho, c.d_max, c.paper_sign, c.tr_lpv) == (2, 40, True, -12.5)
    assert PipelineConfig.from_mapping({"tr_lpv": "auto"}).tr_lpv is None
    with pytest.raises(ValueError):
        PipelineConfig.from_mapping({"no_such_key": "1"})
    with pytest.raises(ValueError):
        PipelineConfig.from_mapping({"rho": "two"})
    for bad in ({"eps_y": "0"}, {"bf_window": "10"}, {"sigma_r": "0"}, {"d_max": "0"}, {"chi": "-1"}):
        with pytest.raises(ValueError):
            PipelineConfig.from_mapping(bad)


def test_config_text_roundtrip(tmp_path):
    c = PipelineConfig(d_max=90, rng_seed=4, paper_sign=True, tr_lpv=-3.0)
    p = tmp_path / "c.cfg"
    p.write_text(c.to_text())
    assert PipelineConfig.from_file(p) == c
    assert PipelineConfig.from_file(tmp_path / "c.cfg").with_overrides({"rho": 2}).rho == 2


# end to end -----------------------------------------------------------------------

def test_default_scene_lanes(default_scene, default_result):
    starts = sorted(default_result.lanes.starts)
    assert len(starts) == 3
    assert all(abs(s - b) <= 5 for s, b in zip(starts, sorted(default_scene.lane_bottoms)))


def test_default_scene_road_profile(default_scene, default_result):
    beta = np.array(default_result.report.beta)
    rows = np.arange(default_scene.horizon, 360)
    assert np.max(np.abs(road_fn(beta, rows) - road_fn(default_scene.true_beta, rows))) <= 1.0
    assert abs(default_result.report.horizon_row - default_scene.horizon) <= 2
    assert np.max(np.abs(vpy_profile(beta, rows) - default_scene.true_vp.vpy[rows])) <= 2.0


@pytest.mark.xfail(strict=True, reason="one path point per integer disparity quantises the rows; the three "
                                       "coefficients trade off against each other by 2-5% at sub-pixel profile error")
def test_default_scene_beta_coefficients_within_two_percent(default_scene, default_result):
    beta = np.array(default_result.report.beta)
    assert np.all(np.abs(beta - default_scene.true_beta) <= 0.02 * np.abs(default_scene.true_beta))


def test_report_invariants(default_result):
    rep = default_result.report
    assert len(rep.stage_times) == 12
    assert sum(rep.stage_times.values()) <= rep.total_time
    assert PipelineReport.from_json(rep.to_json()) == rep
    assert rep.lane_count == len(default_result.lanes)
    assert [l["start"] for l in rep.lanes] == default_result.lanes.starts


def test_lane_polylines_follow_recursion(default_result):
    vp = default_result.artifacts["vp"]
    for lane in default_result.lanes.lanes:
        for (v1, u1), (v0, u0) in zip(zip(lane.rows[:-1], lane.cols[:-1]), zip(lane.rows[1:], lane.cols[1:])):
            expect = (vp.vpx[v1] + v0 * u1 - vp.vpy[v1] * u1) / (v1 - vp.vpy[v1])
            assert u0 == pytest.approx(expect, abs=1e-6)
    energies = [l.energy for l in default_result.lanes.lanes]
    assert energies == sorted(energies)


def test_identical_views_fail_in_road_stage():
    from stereolane.testkit import gen_scene

    sc = gen_scene(width=160, height=120, seed=2)
    with pytest.raises(RoadProfileError) as info:
        run_pipeline(sc.left, sc.left, PipelineConfig(d_max=sc.d_max))
    assert info.value.stage in (5, 6) and STAGES[info.value.stage] in str(info.value)


def test_mismatched_pair_rejected():
    with pytest.raises(ValueError):
        run_pipeline(np.zeros((50, 60)), np.zeros((50, 61)))


def test_rerun_is_bit_identical(default_scene, default_result):
    again = run_pipeline(default_scene.left, default_scene.right, PipelineConfig(d_max=default_scene.d_max),
                         threads=3)
    assert lanes_signature(again.lanes) == lanes_signature(default_result.lanes)
    assert np.array_equal(again.artifacts["disparity"], default_result.artifacts["disparity"])


# artifacts and CLI ----------------------------------------------------------------

STANDARD = ["disparity.pgm", "vdisparity.pgm", "vpx_accumulator.pgm", "edges.png", "lanes.csv", "overlay.png",
            "report.json"]


@pytest.fixture(scope="module")
def cli_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out-dir", str(root / "scene"), "--seed", "1"]) == 0
    code = main(["detect", "--left", str(root / "scene/left.png"), "--right", str(root / "scene/right.png"),
                 "--config", str(root / "scene/scene.cfg"), "--out-dir", str(root / "out"), "--emit-all"])
    return root, code


def test_cli_detect_outputs(cli_run):
    root, code = cli_run
    assert code == 0
    out = root / "out"
    for name in STANDARD:
        assert (out / name).is_file(), name
    rows = read_csv(out / "lanes.csv")
    assert list(rows[0]) == ["lane_id", "v", "u"]
    truth = json.loads((root / "scene/truth.json").read_text())
    report = json.loads((out / "report.json").read_text())
    assert report["lane_count"] == len(truth["lanes"])
    assert Image.open(out / "overlay.png").mode == "RGB"


def test_cli_disparity_pgm_is_16bit(cli_run):
    root, _ = cli_run
    im = Image.open(root / "out/disparity.pgm")
    assert im.mode.startswith("I;16") or im.mode == "I"
    raw = np.array(im).astype(np.int64)
    assert np.all(raw % 256 == 0)
    true_d = read_disparity_pgm(root / "scene/true_disparity.pgm")
    got = read_disparity_pgm(root / "out/disparity.pgm")
    valid = got > 0
    assert np.mean(np.abs(got - true_d)[valid] <= 1) > 0.8


def test_emit_all_covers_every_stage(cli_run):
    root, _ = cli_run
    names = {p.name for p in (root / "out").iterdir()}
    for stage in STAGES:
        assert any(n.startswith(f"{stage:02d}_") for n in names), STAGES[stage]


def test_cli_errors(tmp_path, capsys):
    assert main(["detect", "--left", str(tmp_path / "nope.png"), "--right", str(tmp_path / "nope.png"),
                 "--out-dir", str(tmp_path)]) == 2
    img = (np.random.default_rng(0).uniform(0, 1, (60, 80)) * 255).astype(np.uint8)
    Image.fromarray(img).save(tmp_path / "a.png")
    args = ["detect", "--left", str(tmp_path / "a.png"), "--right", str(tmp_path / "a.png"), "--out-dir",
            str(tmp_path / "o")]
    assert main(args + ["--threads", "0"]) == 2
    assert main(args + ["--set", "bogus=1"]) == 2
    assert main(args + ["--set", "d_max=8"]) == 2  # identical views: no road
    assert "stage" in capsys.readouterr().err


def test_bench_small_single_sample():
    table = bench(scene=dict(width=160, height=120), repetitions=1)
    assert table["low_confidence"] and table["identical_disparity"]
    assert table["eta"] > 0 and len(table["stage_medians"]) == 12


def test_cli_bench_json(capsys):
    assert main(["bench", "--width", "160", "--height", "120", "--repetitions", "2", "--json"]) == 0
    table = json.loads(capsys.readouterr().out)
    assert not table["low_confidence"] and table["image_size"] == [160, 120]
