"""End-to-end CLI runs on a small tube dataset: every subcommand, config
defaults, determinism, and error paths."""

import json

import numpy as np
import pytest

from spectralmesh.cli import main
from spectralmesh.mesh import load_obj
from spectralmesh.nn.training import AE_METRIC_FIELDS, read_metrics_csv

TINY_AE = [
    "--filters", "2", "2", "2", "2",
    "--factors", "4", "4", "2", "2",
    "--latent", "4",
    "--order", "2",
    "--batch-size", "8",
]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    rc = main(
        [
            "gen-dataset",
            "--output-dir", str(out),
            "--out", "data",
            "--count", "16",
            "--registrations", "10",
            "--pose-clusters", "4",
            "--seed", "0",
        ]
    )
    assert rc == 0
    rc = main(
        [
            "train-ae",
            "--output-dir", str(out),
            "--dataset", str(out / "data"),
            "--out", "ae.gmm",
            "--metrics", "ae_metrics.csv",
            "--epochs", "5",
            *TINY_AE,
        ]
    )
    assert rc == 0
    return out


def test_gen_dataset_wrote_a_loadable_dataset(workspace):
    meta = json.loads((workspace / "data" / "meta.json").read_text())
    assert meta["count"] == 16
    assert (workspace / "data" / "meshes" / "00015.obj").exists()


def test_train_ae_metrics_curve(workspace):
    rows = read_metrics_csv(workspace / "ae_metrics.csv")
    assert (workspace / "ae.gmm").exists()
    assert [tuple(r) for r in rows] == [AE_METRIC_FIELDS] * 5
    assert all(r["split"] == "train" for r in rows)
    assert [int(r["epoch"]) for r in rows] == list(range(5))
    assert float(rows[-1]["l1_mm"]) < float(rows[0]["l1_mm"])


def test_eval_report(workspace):
    rc = main(
        [
            "eval",
            "--output-dir", str(workspace),
            "--dataset", str(workspace / "data"),
            "--decoder", str(workspace / "ae.gmm"),
            "--split", "val",
            "--out", "eval.json",
            "--latency-runs", "10",
        ]
    )
    assert rc == 0
    report = json.loads((workspace / "eval.json").read_text())
    assert report["split"] == "val" and report["samples"] == 1
    assert report["decoder_params"] == report["decoder_params_formula"]
    assert report["mesh_l1"] > 0 and report["decoder_latency_ms"] > 0
    assert len(report["per_joint_px"]) == 5
    csv_rows = read_metrics_csv(workspace / "eval.csv")
    assert {r["metric"] for r in csv_rows} >= {"mesh_l1", "decoder_params"}


def test_reconstruct_reports_its_own_error(workspace, capsys):
    source = workspace / "data" / "meshes" / "00000.obj"
    rc = main(
        [
            "reconstruct",
            "--output-dir", str(workspace),
            "--decoder", str(workspace / "ae.gmm"),
            "--input", str(source),
            "--out", "recon.obj",
        ]
    )
    assert rc == 0
    reported = float(capsys.readouterr().out.split("l1=")[1])
    recon = load_obj(workspace / "recon.obj")
    measured = float(np.abs(recon.vertices - load_obj(source).vertices).mean())
    assert measured == pytest.approx(reported, rel=1e-4)


def test_interpolate_endpoints_are_reconstructions(workspace):
    rc = main(
        [
            "interpolate",
            "--output-dir", str(workspace),
            "--decoder", str(workspace / "ae.gmm"),
            "--input-a", str(workspace / "data" / "meshes" / "00000.obj"),
            "--input-b", str(workspace / "data" / "meshes" / "00001.obj"),
            "--steps", "5",
            "--out-dir", "interp",
        ]
    )
    assert rc == 0
    files = sorted((workspace / "interp").glob("interp_*.obj"))
    assert [f.name for f in files] == [f"interp_{i:02d}.obj" for i in range(5)]
    # step 0 is exactly the reconstruction of input A (written by the test above)
    assert files[0].read_bytes() == (workspace / "recon.obj").read_bytes()
    a = load_obj(files[0]).vertices
    mid = load_obj(files[2]).vertices
    b = load_obj(files[-1]).vertices
    assert not np.allclose(a, b)
    assert np.abs(mid - a).mean() < np.abs(b - a).mean()  # path moves gradually


def test_sample_is_seed_deterministic(workspace):
    args = [
        "sample",
        "--output-dir", str(workspace),
        "--decoder", str(workspace / "ae.gmm"),
        "--count", "2",
    ]
    assert main(args + ["--seed", "3", "--out-dir", "s_a"]) == 0
    assert main(args + ["--seed", "3", "--out-dir", "s_b"]) == 0
    assert main(args + ["--seed", "4", "--out-dir", "s_c"]) == 0
    for i in range(2):
        name = f"sample_{i:02d}.obj"
        assert (workspace / "s_a" / name).read_bytes() == (
            workspace / "s_b" / name
        ).read_bytes()
    assert (workspace / "s_a" / "sample_00.obj").read_bytes() != (
        workspace / "s_c" / "sample_00.obj"
    ).read_bytes()


def test_train_encoder_and_joint_eval(workspace):
    rc = main(
        [
            "train-encoder",
            "--output-dir", str(workspace),
            "--dataset", str(workspace / "data"),
            "--decoder", str(workspace / "ae.gmm"),
            "--out", "enc.gmm",
            "--metrics", "enc_metrics.csv",
            "--hidden", "8",
            "--epochs", "2",
            "--batch-size", "8",
        ]
    )
    assert rc == 0
    rows = read_metrics_csv(workspace / "enc_metrics.csv")
    assert len(rows) == 2 and rows[0]["split"] == "train"
    rc = main(
        [
            "eval",
            "--output-dir", str(workspace),
            "--dataset", str(workspace / "data"),
            "--decoder", str(workspace / "ae.gmm"),
            "--encoder", str(workspace / "enc.gmm"),
            "--split", "val",
            "--out", "eval_enc.json",
            "--latency-runs", "5",
        ]
    )
    assert rc == 0
    report = json.loads((workspace / "eval_enc.json").read_text())
    assert "encoder_mesh_l1" in report and "encoder_reproj_px" in report


def test_pose_study_rows_and_repeatability(workspace):
    rc = main(
        [
            "pose-study",
            "--output-dir", str(workspace),
            "--dataset", str(workspace / "data"),
            "--references", "rest", "half", "rest",
            "--epochs", "1",
            "--out", "study.csv",
            *TINY_AE,
        ]
    )
    assert rc == 0
    rows = read_metrics_csv(workspace / "study.csv")
    assert [r["reference"] for r in rows] == ["rest", "half", "rest"]
    for row in rows:
        assert float(row["final_val_l1"]) > 0
        assert row["epochs"] == "1"
    # identical reference and seed must reproduce the same number
    assert rows[0]["final_val_l1"] == rows[2]["final_val_l1"]


def test_config_file_supplies_overridable_defaults(tmp_path):
    config = tmp_path / "gen.json"
    config.write_text(
        json.dumps({"count": 6, "registrations": 10, "pose_clusters": 4})
    )
    base = [
        "gen-dataset",
        "--config", str(config),
        "--output-dir", str(tmp_path),
    ]
    assert main(base + ["--out", "from_config"]) == 0
    meta = json.loads((tmp_path / "from_config" / "meta.json").read_text())
    assert meta["count"] == 6
    # an explicit flag beats the config value
    assert main(base + ["--out", "flag_wins", "--count", "4"]) == 0
    meta = json.loads((tmp_path / "flag_wins" / "meta.json").read_text())
    assert meta["count"] == 4


def test_output_dir_env_var(workspace, tmp_path, monkeypatch):
    monkeypatch.setenv("SPECTRALMESH_OUTPUT_DIR", str(tmp_path))
    rc = main(
        [
            "sample",
            "--decoder", str(workspace / "ae.gmm"),
            "--count", "1",
            "--out-dir", "env_samples",
        ]
    )
    assert rc == 0
    assert (tmp_path / "env_samples" / "sample_00.obj").exists()


def test_help_screens(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    assert "gen-dataset" in capsys.readouterr().out
    with pytest.raises(SystemExit) as info:
        main(["train-ae", "--help"])
    assert info.value.code == 0
    assert "--latent" in capsys.readouterr().out


def test_missing_inputs_fail_with_named_path(workspace, capsys):
    rc = main(
        [
            "reconstruct",
            "--output-dir", str(workspace),
            "--decoder", str(workspace / "nope.gmm"),
            "--input", str(workspace / "data" / "meshes" / "00000.obj"),
        ]
    )
    assert rc == 1
    err = capsys.readouterr().err
    assert "nope.gmm" in err and err.startswith("error:")

    rc = main(
        [
            "eval",
            "--output-dir", str(workspace),
            "--dataset", str(workspace / "data"),
            "--decoder", str(workspace / "ae.gmm"),
            "--split", "bogus",
        ]
    )
    assert rc == 1
    assert "bogus" in capsys.readouterr().err


def test_bad_config_is_rejected(tmp_path, capsys):
    missing = tmp_path / "none.json"
    rc = main(["gen-dataset", "--config", str(missing), "--output-dir", str(tmp_path)])
    assert rc == 1
    assert "config" in capsys.readouterr().err

    not_object = tmp_path / "list.json"
    not_object.write_text("[1, 2]")
    rc = main(["gen-dataset", "--config", str(not_object), "--output-dir", str(tmp_path)])
    assert rc == 1
    assert "JSON object" in capsys.readouterr().err
