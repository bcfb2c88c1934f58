import json

import pytest

from prospect_drive.cli import main
from prospect_drive.config import SEED_ENV

SMALL_CONFIG = """
seed: 1
window: 10
horizon: 15
irl:
  candidate_count: 6
  max_iterations: 15
synth:
  n_pairs: 5
  samples: 12
  horizon: 15
cpt:
  grid_resolution: 4
  test_fraction: 0.4
"""


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(SEED_ENV, raising=False)
    config = tmp_path / "pipeline.yaml"
    config.write_text(SMALL_CONFIG)
    return tmp_path, str(config)


def test_full_pipeline(workspace, capsys):
    root, config = workspace
    data = root / "data"
    assert main(["gen", "--config", config, "--out-dir", str(data)]) == 0
    trajectories, labels = str(data / "trajectories.csv"), str(data / "labels.csv")

    theta = str(root / "theta.json")
    assert main(["train-irl", "--config", config, "--data", trajectories, "--out", theta]) in (0, 3)
    assert len(json.loads((root / "theta.json").read_text())["theta"]) == 4

    cpt = str(root / "cpt.json")
    code = main(["fit-cpt", "--config", config, "--data", trajectories, "--labels", labels,
                 "--theta", theta, "--out", cpt])
    assert code in (0, 3)
    fit = json.loads((root / "cpt.json").read_text())
    assert 0.0 < fit["alpha"] <= 1.0 and 0.0 < fit["gamma"] <= 1.0
    assert len(fit["train_pairs"]) == 3 and len(fit["test_pairs"]) == 2

    cpt_predictions = str(root / "pred_cpt.csv")
    ttc_predictions = str(root / "pred_ttc.csv")
    assert main(["predict", "--config", config, "--data", trajectories, "--model", "cpt",
                 "--theta", theta, "--cpt", cpt, "--out", cpt_predictions]) == 0
    assert main(["predict", "--config", config, "--data", trajectories, "--model", "ttc",
                 "--out", ttc_predictions]) == 0
    assert len((root / "pred_cpt.csv").read_text().splitlines()) == 1 + 5 * 3

    report_path = root / "report.json"
    capsys.readouterr()
    assert main(["evaluate", "--config", config, "--predictions", cpt_predictions, ttc_predictions,
                 "--labels", labels, "--exclude-train", cpt, "--out", str(report_path)]) == 0
    report = json.loads(report_path.read_text())
    assert set(report["models"]) == {"cpt", "ttc"}
    assert report["sample_count"] == 2 * 3
    assert "Success rates" in capsys.readouterr().out

    curves = root / "curves.csv"
    assert main(["curves", "--config", config, "--cpt", cpt, "--samples", "11", "--out", str(curves)]) == 0
    assert len(curves.read_text().splitlines()) == 12


def test_gen_is_deterministic(workspace):
    root, config = workspace
    main(["gen", "--config", config, "--out-dir", str(root / "a")])
    main(["gen", "--config", config, "--out-dir", str(root / "b")])
    assert (root / "a" / "trajectories.csv").read_bytes() == (root / "b" / "trajectories.csv").read_bytes()
    assert (root / "a" / "labels.csv").read_bytes() == (root / "b" / "labels.csv").read_bytes()


def test_missing_column_exits_with_input_error(workspace, capsys):
    root, config = workspace
    bad = root / "bad.csv"
    bad.write_text("pair_id,role,t_s,station_m\na,target,0.0,1.0\n")
    code = main(["train-irl", "--config", config, "--data", str(bad), "--out", str(root / "theta.json")])
    assert code == 2
    assert "lateral_m" in capsys.readouterr().err


def test_missing_model_inputs(workspace):
    root, config = workspace
    data = root / "data"
    main(["gen", "--config", config, "--out-dir", str(data)])
    code = main(["predict", "--config", config, "--data", str(data / "trajectories.csv"), "--model", "cpt",
                 "--out", str(root / "p.csv")])
    assert code == 2


def test_metrics_file_written(workspace):
    root, config = workspace
    metrics = root / "metrics.prom"
    code = main(["--metrics-out", str(metrics), "gen", "--config", config, "--out-dir", str(root / "d")])
    assert code == 0
    assert "prospect_drive_stage_duration_seconds" in metrics.read_text()


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "prospect-drive" in capsys.readouterr().out


def test_frenetize_command(workspace):
    root, config = workspace
    paths = root / "paths.csv"
    paths.write_text("path_id,seq,x_m,y_m\neast,0,-50.0,0.0\neast,1,50.0,0.0\nnorth,0,0.0,-40.0\nnorth,1,0.0,60.0\n")
    tracks = root / "tracks.csv"
    tracks.write_text(
        "pair_id,role,t_s,x_m,y_m\n"
        "p,target,0.0,-20.0,0.0\np,target,0.1,-19.0,0.0\n"
        "p,interacting,0.0,0.0,-30.0\np,interacting,0.1,0.0,-29.5\n"
    )
    out = root / "frenet.csv"
    assert main(["frenetize", "--config", config, "--paths", str(paths), "--cartesian", str(tracks),
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "pair_id,role,t_s,station_m,lateral_m"
    assert lines[1].startswith("p,target,0.0,-20.0,")


def test_curves_rejects_weights_file(workspace, capsys):
    root, config = workspace
    theta = root / "theta.json"
    theta.write_text(json.dumps({"theta": [1.0, 0.5, 0.2, -0.3], "loss": 0.1, "converged": True}))
    code = main(["curves", "--config", config, "--cpt", str(theta), "--out", str(root / "curves.csv")])
    assert code == 2
    assert "VALIDATION_ERROR" in capsys.readouterr().err
    assert not (root / "curves.csv").exists()


def test_fits_are_deterministic(workspace):
    root, config = workspace
    data = root / "data"
    main(["gen", "--config", config, "--out-dir", str(data)])
    trajectories, labels = str(data / "trajectories.csv"), str(data / "labels.csv")
    for run in ("a", "b"):
        theta = str(root / f"theta_{run}.json")
        main(["train-irl", "--config", config, "--data", trajectories, "--out", theta])
        main(["fit-cpt", "--config", config, "--data", trajectories, "--labels", labels,
              "--theta", theta, "--out", str(root / f"cpt_{run}.json")])
    assert (root / "theta_a.json").read_bytes() == (root / "theta_b.json").read_bytes()
    assert (root / "cpt_a.json").read_bytes() == (root / "cpt_b.json").read_bytes()
