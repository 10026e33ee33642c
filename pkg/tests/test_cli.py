"""End-to-end runs of the command-line interface."""

import csv
import json

import numpy as np
import pytest

import main as cli
from data.volume_io import read_volume
from tools.validator import VolumeValidator


@pytest.fixture(autouse=True)
def isolated_cwd(tmp_path, monkeypatch):
    # Keep a developer .env out of the runs.
    monkeypatch.chdir(tmp_path)


def make_phantom_dir(tmp_path, *extra, dims="16,16,8", volumes=2):
    out = tmp_path / "phantom"
    code = cli.main(["phantom", "--dims", dims, "--volumes", str(volumes), "--rank", "2",
                     "-o", str(out), *extra])
    assert code == 0
    return out


def phantom_inputs(directory, volumes=2):
    return [str(directory / f"phantom_{i:02d}.mhd") for i in range(volumes)]


def load_report(path):
    return json.loads(path.read_text())


def test_phantom_writes_volumes_truths_and_masks(tmp_path):
    out = make_phantom_dir(tmp_path, "--report", str(tmp_path / "phantom.json"))
    report = load_report(tmp_path / "phantom.json")
    assert VolumeValidator().validate_report(report) == (True, [])
    assert len(report["outputs"]) == 8
    assert report["outputs"]["mask_01"].endswith("mask_01.mhd")
    for i in range(2):
        for prefix in ("phantom", "lowrank_truth", "sparse_truth", "mask"):
            assert (out / f"{prefix}_{i:02d}.mhd").exists()
            assert (out / f"{prefix}_{i:02d}.raw").exists()
    x, meta = read_volume(out / "phantom_00.mhd")
    low, _ = read_volume(out / "lowrank_truth_00.mhd")
    sparse, _ = read_volume(out / "sparse_truth_00.mhd")
    assert meta.dims == (16, 16, 8)
    np.testing.assert_allclose(x.data, low.data + sparse.data, atol=1e-5)


def test_phantom_decompose_metrics_pipeline(tmp_path, capsys):
    out = make_phantom_dir(tmp_path)
    results = tmp_path / "results"
    code = cli.main([
        "decompose", "--input", *phantom_inputs(out), "-o", str(results),
        "--segment-length", "3", "--truth-masks", str(out / "mask_00.mhd"), str(out / "mask_01.mhd"),
        "--mask", str(out / "mask_00.mhd"), "--workers", "2",
    ])
    assert code == 0
    assert "Decomposition completed successfully" in capsys.readouterr().out

    report = load_report(results / "decompose_report.json")
    assert VolumeValidator().validate_report(report) == (True, [])
    assert report["command"]["name"] == "decompose"
    assert report["config"]["transform"] == "dct"
    assert report["config"]["segment_length"] == 3
    assert len(report["segments"]) == 3
    assert all(seg["residual_trace"] for seg in report["segments"])
    assert "mean_support_dice" in report["metrics"]
    assert "phantom_00.lowrank.masked_sigma" in report["metrics"]
    assert set(report["outputs"]) == {
        "phantom_00.lowrank", "phantom_00.sparse", "phantom_01.lowrank", "phantom_01.sparse",
    }

    code = cli.main([
        "metrics", "--a", str(out / "mask_00.mhd"), "--b", str(out / "mask_01.mhd"),
        "--report", str(tmp_path / "metrics.json"),
    ])
    assert code == 0
    metrics = load_report(tmp_path / "metrics.json")["metrics"]
    assert 0.0 <= metrics["dice"] <= 100.0
    assert metrics["jaccard"] <= metrics["dice"]
    assert metrics["asd_mm"] >= 0.0


def test_zero_phantom_gives_zero_outputs(tmp_path):
    out = tmp_path / "phantom"
    code = cli.main(["phantom", "--dims", "8,8,6", "--volumes", "1", "--rank", "0",
                     "--sparse-fraction", "0", "-o", str(out)])
    assert code == 0
    results = tmp_path / "results"
    code = cli.main(["decompose", "--input", str(out / "phantom_00.mhd"), "-o", str(results),
                     "--segment-length", "2"])
    assert code == 0
    low, _ = read_volume(results / "phantom_00.lowrank.mhd")
    sparse, _ = read_volume(results / "phantom_00.sparse.mhd")
    assert np.all(low.data == 0.0)
    assert np.all(sparse.data == 0.0)


def test_segment_length_one_is_rejected(tmp_path):
    out = make_phantom_dir(tmp_path)
    code = cli.main(["decompose", "--input", *phantom_inputs(out), "-o", str(tmp_path / "r"),
                     "--segment-length", "1"])
    assert code == 1


@pytest.mark.parametrize("command, flag", [("decompose", "--input"), ("bench-transforms", "--inputs")])
def test_segment_length_zero_is_rejected(tmp_path, capsys, command, flag):
    out = make_phantom_dir(tmp_path)
    extra = ["--mask", str(out / "mask_00.mhd")] if command == "bench-transforms" else []
    code = cli.main([command, flag, *phantom_inputs(out), "-o", str(tmp_path / "r"),
                     "--segment-length", "0", *extra])
    assert code == 1
    assert ">= 2, got 0" in capsys.readouterr().out
    assert not (tmp_path / "r").exists()


def test_iteration_cap_reports_non_convergence(tmp_path):
    out = make_phantom_dir(tmp_path)
    results = tmp_path / "results"
    code = cli.main(["decompose", "--input", *phantom_inputs(out), "-o", str(results), "--max-iters", "1"])
    assert code == 2
    report = load_report(results / "decompose_report.json")
    assert not any(seg["converged"] for seg in report["segments"])
    assert (results / "phantom_00.lowrank.mhd").exists()


def test_missing_input(tmp_path, capsys):
    code = cli.main(["decompose", "--input", str(tmp_path / "absent.mhd"), "-o", str(tmp_path / "r")])
    assert code == 1
    assert "not found" in capsys.readouterr().out


def test_mismatched_inputs(tmp_path):
    a = make_phantom_dir(tmp_path, dims="8,8,6", volumes=1)
    b_dir = tmp_path / "other"
    assert cli.main(["phantom", "--dims", "8,9,6", "--volumes", "1", "--rank", "2", "-o", str(b_dir)]) == 0
    code = cli.main(["decompose", "--input", str(a / "phantom_00.mhd"), str(b_dir / "phantom_00.mhd"),
                     "-o", str(tmp_path / "r")])
    assert code == 1


def test_usage_error_exits_one():
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["decompose"])
    assert excinfo.value.code == 1


def test_bad_lambda_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["decompose", "--input", "x.mhd", "--lambda", "-1"])
    assert excinfo.value.code == 1


def test_tsvd_report(tmp_path):
    out = make_phantom_dir(tmp_path, "--sparse-fraction", "0", volumes=1)
    report_path = tmp_path / "tsvd.json"
    # Volumes are stored as f32, so the rank cut sits above single-precision noise.
    code = cli.main(["tsvd", "--input", str(out / "lowrank_truth_00.mhd"), "--transform", "dct",
                     "--rank-tol", "1e-3", "--report", str(report_path)])
    assert code == 0
    metrics = load_report(report_path)["metrics"]
    assert metrics["tubal_rank"] == 2
    assert metrics["reconstruction_error"] < 1e-10


def test_sweep_k_table(tmp_path):
    out = make_phantom_dir(tmp_path)
    csv_path = tmp_path / "sweep.csv"
    code = cli.main(["sweep-k", "--inputs", *phantom_inputs(out), "--mask", str(out / "mask_00.mhd"),
                     "--k-values", "2,4", "--max-iters", "100", "--csv", str(csv_path),
                     "--plot", str(tmp_path / "sweep.png"), "-o", str(tmp_path / "r")])
    assert code == 0
    with open(csv_path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["k", "sigma", "entropy_bits"]
    assert [r[0] for r in rows[1:]] == ["2", "4"]
    assert (tmp_path / "sweep.png").stat().st_size > 0
    report = load_report(tmp_path / "r" / "sweep_report.json")
    assert VolumeValidator().validate_report(report) == (True, [])


def test_sweep_k_rejects_short_segments(tmp_path):
    out = make_phantom_dir(tmp_path)
    code = cli.main(["sweep-k", "--inputs", *phantom_inputs(out), "--mask", str(out / "mask_00.mhd"),
                     "--k-values", "1,3", "-o", str(tmp_path / "r")])
    assert code == 1


def test_bench_transforms_table(tmp_path):
    out = make_phantom_dir(tmp_path)
    code = cli.main(["bench-transforms", "--inputs", *phantom_inputs(out), "--mask", str(out / "mask_00.mhd"),
                     "--segment-length", "3", "--max-iters", "100", "-o", str(tmp_path / "r")])
    assert code == 0
    with open(tmp_path / "r" / "bench_transforms.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["transform", "sigma", "entropy_bits", "mean_solve_ms"]
    assert [r[0] for r in rows[1:]] == ["dct", "fft", "dwt4"]
    for row in rows[1:]:
        assert float(row[3]) > 0.0
    report = load_report(tmp_path / "r" / "bench_report.json")
    assert VolumeValidator().validate_report(report) == (True, [])
    assert "raw_entropy_bits" in report["metrics"]


def test_bench_transforms_rejects_odd_dwt4_lengths(tmp_path, capsys):
    out = make_phantom_dir(tmp_path, volumes=3)
    code = cli.main(["bench-transforms", "--inputs", *phantom_inputs(out, 3), "--mask", str(out / "mask_00.mhd"),
                     "--segment-length", "3", "-o", str(tmp_path / "r")])
    assert code == 1
    assert "DWT4 needs an even segment tensor length" in capsys.readouterr().out
    assert not (tmp_path / "r" / "bench_transforms.csv").exists()


def test_image_metrics(tmp_path):
    out = make_phantom_dir(tmp_path)
    report_path = tmp_path / "m.json"
    code = cli.main(["metrics", "--image", str(out / "phantom_00.mhd"), "--mask", str(out / "mask_00.mhd"),
                     "--reference", str(out / "phantom_00.mhd"), "--report", str(report_path)])
    assert code == 0
    metrics = load_report(report_path)["metrics"]
    assert metrics["ncc"] == pytest.approx(1.0)
    assert metrics["sigma"] >= 0.0


def test_metrics_needs_inputs():
    assert cli.main(["metrics"]) == 1


@pytest.mark.slow
def test_default_phantom_acceptance_run(tmp_path):
    out = tmp_path / "phantom"
    assert cli.main(["phantom", "--dims", "64,64,30", "--volumes", "6", "-o", str(out)]) == 0
    results = tmp_path / "results"
    masks = [str(out / f"mask_{i:02d}.mhd") for i in range(6)]
    code = cli.main(["decompose", "--input", *phantom_inputs(out, 6), "-o", str(results),
                     "--truth-masks", *masks, "--support-threshold", "0.1"])
    assert code == 0
    report = load_report(results / "decompose_report.json")
    assert VolumeValidator().validate_report(report) == (True, [])
    assert report["metrics"]["mean_support_dice"] > 80.0
