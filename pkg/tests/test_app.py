import pandas as pd
import pytest

from app import build_parser, main
from utils import verification


def write_config(tmp_path, harness_extra=""):
    path = tmp_path / "run.yaml"
    path.write_text(
        "scenario:\n  n_bs: 1\n  n_users: 2\n  n_ul_subcarriers: 1\n  n_dl_subcarriers: 1\n  n_power_levels: 1\n"
        "harness:\n  seeds: [0, 1]\n  iterations: 80\n  convergence_window: 10\n" + harness_extra,
        encoding="utf-8",
    )
    return str(path)


def test_count_actions(capsys):
    assert main(["count-actions", "--dims", "2", "1", "2", "2"]) == 0
    assert "formula=65 enumerated=65 agree=True" in capsys.readouterr().out


def test_count_actions_skips_large_catalogs(capsys):
    assert main(["count-actions", "--dims", "6", "9", "9", "10", "--cap", "1000"]) == 0
    assert "enumeration skipped" in capsys.readouterr().out


def test_verify_action_counts(tmp_path, capsys):
    assert main(["--output-dir", str(tmp_path), "verify", "--theorem", "3"]) == 0
    assert "✅ action count" in capsys.readouterr().out
    df = pd.read_csv(tmp_path / "verify_action_counts.csv")
    assert df["formula_agrees"].all()


def test_run_writes_series_and_scenario(tmp_path, capsys):
    out = tmp_path / "out"
    argv = [
        "--config", write_config(tmp_path), "--output-dir", str(out),
        "run", "--algo", "qlearning", "--seed", "1", "--save-scenario", str(tmp_path / "s.yaml"),
    ]
    assert main(argv) == 0
    series = pd.read_csv(out / "run_qlearning_seed1.csv")
    assert len(series) == 80
    assert (tmp_path / "s.yaml").exists()
    assert "✅ qlearning seed 1" in capsys.readouterr().out
    # replaying the saved scenario gives the same series
    replay = tmp_path / "replay"
    argv = [
        "--config", write_config(tmp_path), "--output-dir", str(replay),
        "run", "--algo", "qlearning", "--seed", "1", "--scenario", str(tmp_path / "s.yaml"),
    ]
    assert main(argv) == 0
    pd.testing.assert_frame_equal(series, pd.read_csv(replay / "run_qlearning_seed1.csv"))


def test_sweep_with_explicit_axis(tmp_path):
    argv = [
        "--config", write_config(tmp_path), "--output-dir", str(tmp_path),
        "sweep", "--axis", "alpha", "--values", "0.3", "0.9", "--algos", "multistack", "--gnuplot",
    ]
    assert main(argv) == 0
    table = pd.read_csv(tmp_path / "sweep_alpha.csv")
    assert table["value"].tolist() == [0.3, 0.9]
    assert (tmp_path / "sweep_alpha.dat").exists()


def test_sweep_needs_an_axis(tmp_path, capsys):
    assert main(["--config", write_config(tmp_path), "--output-dir", str(tmp_path), "sweep"]) == 1
    assert "❌" in capsys.readouterr().out


def test_bad_config_fails_cleanly(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("learner:\n  alpha: 3\n", encoding="utf-8")
    assert main(["--config", str(path), "count-actions", "--dims", "1", "1", "1", "1"]) == 1
    assert "❌" in capsys.readouterr().err


def test_parser_rejects_unknown_algorithm():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "--algo", "sarsa"])


def test_global_options_after_the_subcommand(tmp_path, capsys):
    out = tmp_path / "out"
    argv = [
        "run", "--config", write_config(tmp_path), "--output-dir", str(out),
        "--algo", "qlearning", "--seed", "0",
    ]
    assert main(argv) == 0
    assert len(pd.read_csv(out / "run_qlearning_seed0.csv")) == 80
    assert build_parser().parse_args(["verify", "--workers", "2"]).workers == 2
    # a value given before the subcommand is kept
    assert build_parser().parse_args(["--workers", "3", "verify"]).workers == 3
    assert build_parser().parse_args(["verify"]).workers is None


def test_sweep_uses_the_configured_experiment(tmp_path, capsys):
    cfg = write_config(tmp_path, "  experiment_id: result-ratio-delay\n")
    argv = ["--config", cfg, "--output-dir", str(tmp_path), "sweep", "--values", "0.5", "--algos", "multistack"]
    assert main(argv) == 0
    table = pd.read_csv(tmp_path / "result-ratio-delay.csv")
    assert table["axis"].unique().tolist() == ["nu"]
    assert table["value"].tolist() == [0.5]
    assert "✅ Maximal delay vs result ratio" in capsys.readouterr().out


def test_unknown_configured_experiment(tmp_path, capsys):
    cfg = write_config(tmp_path, "  experiment_id: nope\n")
    assert main(["--config", cfg, "--output-dir", str(tmp_path), "sweep"]) == 1
    assert "❌" in capsys.readouterr().err


def test_verify_oracle_uses_the_worker_count(tmp_path, monkeypatch):
    seen = []
    real = verification.solve_exhaustive

    def counting(s, **kwargs):
        seen.append(kwargs["workers"])
        return real(s, **kwargs)

    monkeypatch.setattr(verification, "solve_exhaustive", counting)
    argv = [
        "--output-dir", str(tmp_path), "verify", "--workers", "2",
        "--theorem", "3", "--oracle", "--oracle-seeds", "1", "--max-iterations", "50",
    ]
    main(argv)
    assert seen == [2]
