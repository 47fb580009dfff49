import csv
import json

import pytest

from hiel import cli, experiment
from hiel.experiment import ConfigError, beta_sweep, compare_models, load_config, run_experiment
from hiel.synthetic import write_repository

SMALL = (("alpha", "1.0", 60), ("beta", "1.0", 50), ("beta", "2.0", 50), ("gamma", "1.0", 60))


@pytest.fixture
def small_config(tmp_path):
    data = tmp_path / "data"
    write_repository(data, seed=3, releases=SMALL)
    cfg = json.loads((data / "config.json").read_text())
    cfg["ensemble"] = {"T": 2, "inducers": [{"kind": "LogisticRegression"}, {"kind": "DecisionTree"},
                                            {"kind": "NaiveBayes"}]}
    (data / "config.json").write_text(json.dumps(cfg))
    return data / "config.json"


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_reports(small_config, tmp_path):
    cfg = load_config(small_config).with_overrides(output_dir=tmp_path / "out")
    report = run_experiment(cfg)
    assert report["errors"] == []
    assert [r["target"] for r in report["rows"]] == ["alpha-1.0", "beta-1.0", "beta-2.0", "gamma-1.0"]
    out = tmp_path / "out"
    for name in ("report.json", "run_report.csv", "cost_table.csv", "proposed_measures.csv"):
        assert (out / name).exists()
    row = report["rows"][0]
    assert row["n_experts"] == 6
    assert row["tp"] + row["fp"] + row["fn"] + row["tn"] == row["modules"] == 60
    assert row["expected_mistakes"] <= row["mistake_bound"] + 1e-9
    assert row["saved_budget"] + row["remaining_service_time"] == row["total_loc"]
    trace = read_rows(out / "traces" / "alpha-1.0.csv")
    assert len(trace) == 60
    assert float(trace[-1]["M_cumulative"]) == pytest.approx(row["expected_mistakes"])


def test_run_is_deterministic_and_rerunnable_from_report(small_config, tmp_path):
    cfg = load_config(small_config)
    a = run_experiment(cfg.with_overrides(output_dir=tmp_path / "a"))
    b = run_experiment(cfg.with_overrides(output_dir=tmp_path / "b"))
    assert a["rows"] == b["rows"]
    echo = json.loads((tmp_path / "a" / "report.json").read_text())
    again = experiment.config_from_dict(echo)
    assert again.to_dict() == echo["config"]
    assert run_experiment(again, write=False)["rows"] == a["rows"]


def test_seed_override_changes_ensemble(small_config):
    cfg = load_config(small_config).with_overrides(targets=["alpha-1.0"])
    a = run_experiment(cfg, write=False)["rows"][0]
    b = run_experiment(cfg.with_overrides(seed=99), write=False)["rows"][0]
    assert a["target"] == b["target"]
    assert (a["expected_mistakes"], a["auc"]) != (b["expected_mistakes"], b["auc"])


def test_target_selection_errors(small_config):
    cfg = load_config(small_config).with_overrides(targets=["nope-1"])
    with pytest.raises(experiment.DataError, match="unknown targets"):
        run_experiment(cfg, write=False)


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="seed"):
        experiment.config_from_dict({"repositories": [{"name": "x"}]})
    with pytest.raises(ConfigError, match="no repositories"):
        experiment.config_from_dict({"seed": 1})
    with pytest.raises(ConfigError, match="not found"):
        experiment.config_from_dict({"seed": 1, "repositories": [{"name": "x", "directory": "missing"}]}, tmp_path)


def test_sweep_shape(small_config, tmp_path):
    cfg = load_config(small_config).with_overrides(targets=["gamma-1.0"], output_dir=tmp_path / "sw")
    rows = beta_sweep(cfg, betas=[0.1, 0.5, 0.9], set_sizes=[3, 4, 6])
    assert len(rows) == 9
    assert [(r[1], r[2]) for r in rows[:3]] == [(0.1, 3), (0.1, 4), (0.1, 6)]
    assert len(read_rows(tmp_path / "sw" / "sweep.csv")) == 9
    with pytest.raises(ValueError):
        beta_sweep(cfg, betas=[1.5], set_sizes=[3])
    with pytest.raises(ValueError):
        beta_sweep(cfg, betas=[0.5], set_sizes=[7])


def test_compare_against_baseline_files(small_config, tmp_path):
    report = run_experiment(load_config(small_config).with_overrides(output_dir=tmp_path / "out"))
    base = tmp_path / "tds.csv"
    with open(base, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["target", "f_measure", "auc"])
        for r in report["rows"][:3]:
            w.writerow([r["target"], 0.1, 0.5])
        w.writerow(["other-9", 0.2, 0.6])
    result = compare_models(report, {"TDS": base})
    assert set(k for k in result if not k.startswith("_")) == {"f_measure", "auc"}
    assert result["_excluded"]["TDS"] == ["gamma-1.0", "other-9"]
    row = result["f_measure"]["TDS"]
    assert row.wins + row.ties + row.losses == 3
    experiment.write_comparison(result, tmp_path / "cmp")
    footer = read_rows(tmp_path / "cmp" / "comparison_f_measure.csv")
    assert [r[""] for r in footer][:3] == ["Average", "Improvement", "W/T/L"]


def test_cli_run_and_compare(small_config, tmp_path, capsys):
    out = tmp_path / "cli"
    assert cli.main(["run", "--config", str(small_config), "--target", "beta-2.0", "--out", str(out),
                     "--beta", "0.3"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["pwmv"]["beta"] == 0.3
    assert [r["target"] for r in report["rows"]] == ["beta-2.0"]
    base = tmp_path / "b.csv"
    base.write_text("target,f_measure\nbeta-2.0,0.25\n")
    assert cli.main(["compare", "--report", str(out / "report.json"), "--baseline", f"X={base}"]) == 0
    assert (out / "comparison_f_measure.csv").exists()


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"repositories": []}))
    assert cli.main(["run", "--config", str(bad)]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ConfigError"
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2


def test_cli_synth_and_sweep(tmp_path):
    data = tmp_path / "syn"
    assert cli.main(["synth", "--out", str(data)]) == 0
    assert sorted(p.name for p in data.glob("*.csv")) == ["alpha-1.0.csv", "beta-2.0.csv", "gamma-0.5.csv"]
    cfg = json.loads((data / "config.json").read_text())
    cfg["ensemble"] = {"T": 1, "inducers": [{"kind": "NaiveBayes"}, {"kind": "LogisticRegression"}]}
    (data / "config.json").write_text(json.dumps(cfg))
    assert cli.main(["sweep", "--config", str(data / "config.json"), "--betas", "0.2", "--sizes", "1", "2",
                     "--target", "alpha-1.0", "--out", str(tmp_path / "sw")]) == 0
    assert len(read_rows(tmp_path / "sw" / "sweep.csv")) == 2
