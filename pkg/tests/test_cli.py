import csv

import pytest

from trustsim.charts import emit_charts, render_line_chart
from trustsim.config import (
    ConfigError,
    ExperimentConfig,
    apply_override,
    load_config_file,
    manifest_lines,
)
from trustsim.metrics import CSV_COLUMNS, ConfusionMatrix, EpisodeRecord
from trustsim.runner import run_experiment, run_matrix
from trustsim.cli import main

FAST = dict(episodes=3, steps=30, seed=42)


def test_config_defaults_resolve_episodes():
    assert ExperimentConfig(attack="nma").resolve_episodes() == (50, None)
    assert ExperimentConfig(attack="tdp").resolve_episodes() == (100, None)


def test_tdp_short_run_warns_and_extends():
    episodes, warning = ExperimentConfig(attack="tdp", episodes=50).resolve_episodes()
    assert episodes == 100
    assert warning is not None and "auto-extending" in warning


def test_tdp_short_run_override_respected():
    episodes, warning = ExperimentConfig(
        attack="tdp", episodes=50, allow_short_tdp=True
    ).resolve_episodes()
    assert episodes == 50 and warning is None


def test_config_rejects_unknown_agent():
    with pytest.raises(ConfigError):
        ExperimentConfig(agent="dqn")


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(
        "[experiment]\n"
        "agent = marl\n"
        "attack = cra\n"
        "episodes = 7\n"
        "seed = 99\n"
        "[attack]\n"
        "cra_intensity = 0.7\n"
        "[reward]\n"
        "w_fn = 2.5\n"
        "[agent_hyperparams]\n"
        "batch_size = 32\n"
        "[trust]\n"
        "decay_gamma = 0.8\n"
        "[env]\n"
        "detect_p = 0.4\n"
    )
    cfg = load_config_file(path)
    assert cfg.agent == "marl" and cfg.attack == "cra"
    assert cfg.episodes == 7 and cfg.seed == 99
    assert cfg.attack_cfg.cra_intensity == 0.7
    assert cfg.reward.w_fn == 2.5
    assert cfg.hyper.batch_size == 32
    assert cfg.trust.decay_gamma == 0.8
    assert cfg.env.detect_p == 0.4


def test_config_file_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[experiment]\nagnet = drl\n")
    with pytest.raises(ConfigError):
        load_config_file(path)


def test_config_file_rejects_unknown_section(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[nonsense]\nx = 1\n")
    with pytest.raises(ConfigError):
        load_config_file(path)


def test_override_flag():
    cfg = apply_override(ExperimentConfig(), "attack.bfi_sybil_k=8")
    assert cfg.attack_cfg.bfi_sybil_k == 8
    with pytest.raises(ConfigError):
        apply_override(ExperimentConfig(), "bogus")
    with pytest.raises(ConfigError):
        apply_override(ExperimentConfig(), "attack.unknown=1")


def test_run_experiment_artifacts_and_schema(tmp_path):
    cfg = ExperimentConfig(agent="rl", attack="nma", out=str(tmp_path / "run"), **FAST)
    records = run_experiment(cfg)
    out = tmp_path / "run"
    for name in (
        "episodes.csv",
        "summary.csv",
        "confusion.csv",
        "agent.ckpt",
        "manifest.txt",
        "reward_per_episode.svg",
        "f1_per_episode.svg",
        "chart_data.csv",
    ):
        assert (out / name).exists(), name
    with open(out / "episodes.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + len(records) == 4


def test_run_experiment_deterministic_bytes(tmp_path):
    a = ExperimentConfig(agent="drl", attack="bfi", out=str(tmp_path / "a"), **FAST)
    b = ExperimentConfig(agent="drl", attack="bfi", out=str(tmp_path / "b"), **FAST)
    run_experiment(a)
    run_experiment(b)
    for name in ("episodes.csv", "summary.csv", "agent.ckpt", "manifest.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_run_matrix_shape_and_median(tmp_path):
    base = ExperimentConfig(out=str(tmp_path / "m"), **FAST)
    results, failures = run_matrix(base, ["rl", "drl"], ["nma", "bfi"], seeds=[42, 43, 44])
    assert not failures
    assert len(results) == 4
    assert all(len(v) == 3 for v in results.values())
    with open(tmp_path / "m" / "matrix_f1.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["attack", "rl", "drl"]
    assert [r[0] for r in rows[1:]] == ["nma", "bfi"]
    assert all(len(r) == 3 for r in rows[1:])


def test_run_matrix_rejects_empty_lists(tmp_path):
    base = ExperimentConfig(out=str(tmp_path / "m"), **FAST)
    with pytest.raises(ConfigError):
        run_matrix(base, [], ["nma"], seeds=[42])


def test_run_matrix_records_failures_and_continues(tmp_path, monkeypatch):
    import trustsim.runner as runner_mod

    calls = {"n": 0}
    real = runner_mod._matrix_cell

    def flaky(args):
        calls["n"] += 1
        if args[1] == "rl":
            raise RuntimeError("boom")
        return real(args)

    monkeypatch.setattr(runner_mod, "_matrix_cell", flaky)
    base = ExperimentConfig(out=str(tmp_path / "m"), **FAST)
    results, failures = run_matrix(base, ["rl", "drl"], ["nma"], seeds=[42])
    assert len(failures) == 1
    with open(tmp_path / "m" / "matrix_f1.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[1][1] == "missing"
    assert rows[1][2] != "missing"


def rec(ep, reward, f1_value):
    return EpisodeRecord(
        episode=ep,
        cumulative_reward=reward,
        confusion=ConfusionMatrix(5, 0, 0, 11),
        f1=f1_value,
        precision=1.0,
        recall=1.0,
        throughput=100,
        chain_length=10,
        mean_kappa=1.0,
        trust_separation=0.3,
        delegation_ratio=0.5,
    )


def test_charts_single_point_no_crash(tmp_path):
    written = emit_charts([rec(1, 50.0, 0.9)], tmp_path)
    for path in written:
        assert path.exists()
    svg = (tmp_path / "f1_per_episode.svg").read_text()
    assert svg.startswith("<svg") and "circle" in svg


def test_chart_polyline_length_matches_records(tmp_path):
    records = [rec(i, 10.0 * i, 0.5) for i in range(1, 13)]
    emit_charts(records, tmp_path)
    svg = (tmp_path / "reward_per_episode.svg").read_text()
    points = svg.split('points="')[1].split('"')[0].split()
    assert len(points) == 12


def test_render_chart_rejects_empty():
    with pytest.raises(ValueError):
        render_line_chart([], [], "t", "x", "y")


def test_manifest_contains_resolved_config():
    cfg = ExperimentConfig(agent="marl", attack="cra", seed=7)
    lines = manifest_lines(cfg, 50, "numpy", "0.1.0")
    text = "\n".join(lines)
    assert "agent=marl" in text
    assert "attack_cfg.cra_intensity=0.85" in text
    assert "seed=7" in text
    assert "episodes_resolved=50" in text


def test_cli_single_run(tmp_path, capsys):
    code = main(
        ["--agent", "rl", "--attack", "nma", "--episodes", "2", "--steps", "20",
         "--seed", "1", "--out", str(tmp_path / "cli")]
    )
    assert code == 0
    assert (tmp_path / "cli" / "episodes.csv").exists()
    out = capsys.readouterr().out
    assert "tail-10 mean F1" in out


def test_cli_rejects_bad_agent(capsys):
    assert main(["--agent", "bogus", "--episodes", "1"]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_set_override(tmp_path):
    code = main(
        ["--agent", "rl", "--attack", "nma", "--episodes", "1", "--steps", "10",
         "--out", str(tmp_path / "o"), "--set", "env.detect_p=0.4"]
    )
    assert code == 0
    manifest = (tmp_path / "o" / "manifest.txt").read_text()
    assert "env.detect_p=0.4" in manifest


def test_cli_matrix_mode(tmp_path):
    code = main(
        ["--matrix", "--agent", "rl", "--attack", "nma", "--seeds", "42,43",
         "--episodes", "2", "--steps", "20", "--out", str(tmp_path / "mx")]
    )
    assert code == 0
    assert (tmp_path / "mx" / "matrix_f1.csv").exists()


def test_cli_tdp_warning(tmp_path, capsys):
    code = main(
        ["--agent", "rl", "--attack", "tdp", "--episodes", "26", "--steps", "5",
         "--allow-short-tdp", "--out", str(tmp_path / "t")]
    )
    assert code == 0
    code = main(
        ["--agent", "rl", "--attack", "tdp", "--episodes", "5", "--steps", "5",
         "--out", str(tmp_path / "t2")]
    )
    assert code == 0
    assert "auto-extending" in capsys.readouterr().err
