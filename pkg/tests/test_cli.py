import json
import subprocess
import sys

from noisysemo import serialize
from noisysemo.cli import main
from noisysemo.validate import CheckResult


def test_run_example(capsys):
    assert main(["run", "--n", "8", "--p", "0", "--variant", "cached", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "trial 0: covered" in out and "censored=0.000" in out


def test_unknown_flag_is_usage_error(capsys):
    assert main(["run", "--n", "8", "--bogus"]) == 2
    assert "usage:" in capsys.readouterr().err


def test_missing_subcommand_is_usage_error():
    assert main([]) == 2


def test_bad_rule_reports_position(capsys):
    assert main(["run", "--n", "8", "--p", "0.25/x"]) == 2
    err = capsys.readouterr().err
    assert "position 5" in err and "     ^" in err


def test_rule_out_of_range_is_usage_error():
    assert main(["run", "--n", "2", "--p", "3/n"]) == 2


def test_keep_without_k_is_usage_error():
    assert main(["run", "--n", "8", "--variant", "keep"]) == 2


def test_run_writes_csv_and_traces(tmp_path):
    out = tmp_path / "run.csv"
    code = main(["run", "--n", "6", "--p", "0.2/n", "--variant", "keep", "--K", "20", "--trials", "2",
                 "--trace", "full", "--out", str(out)])
    assert code == 0
    config, rows = serialize.read_records_csv(out)
    assert config["variant"] == "keep20" and config["seed"] == 0
    assert len(rows) == 2 and all(r["K"] == 20 for r in rows)
    assert (tmp_path / "run.trace-0.csv").exists() and (tmp_path / "run.trace-1.csv").exists()


def test_trial_seed_replays_trial(tmp_path, capsys):
    out = tmp_path / "cell.csv"
    assert main(["run", "--n", "10", "--p", "0.1/n", "--trials", "3", "--seed", "4", "--out", str(out)]) == 0
    _, rows = serialize.read_records_csv(out)
    capsys.readouterr()
    assert main(["run", "--n", "10", "--p", "0.1/n", "--trial-seed", str(rows[2]["seed"])]) == 0
    assert f"T_total={rows[2]['T_total']} " in capsys.readouterr().out


def test_run_json(tmp_path):
    out = tmp_path / "run.json"
    assert main(["run", "--n", "5", "--variant", "reeval", "--format", "json", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["schema_version"] == serialize.SCHEMA_VERSION
    assert data["records"][0]["n"] == 5


def test_missing_input_is_io_error(tmp_path):
    assert main(["fit", str(tmp_path / "nope.csv")]) == 1
    assert main(["sweep", "--config", str(tmp_path / "nope.cfg")]) == 1


def test_unwritable_output_is_io_error(tmp_path):
    assert main(["run", "--n", "4", "--out", str(tmp_path / "missing" / "x.csv")]) == 1


def test_sweep_config_flags_override_and_fit(tmp_path):
    cfg = tmp_path / "grid.cfg"
    cfg.write_text("# small grid\nn = 8,12,16\np = 0,0.25/n\nvariant = cached\ntrials = 4\nseed = 9\n")
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--config", str(cfg), "--trials", "3", "--out", str(out)]) == 0
    config, rows = serialize.read_records_csv(out)
    assert config["trials"] == 3 and config["seed"] == 9
    assert len(rows) == 3 * 2 * 3
    summary = json.loads(out.with_suffix(".summary.json").read_text())
    assert len(summary["cells"]) == 6 and summary["fits"]
    fit_out = tmp_path / "fit.json"
    assert main(["fit", str(out), "--out", str(fit_out)]) == 0
    fits = json.loads(fit_out.read_text())["fits"]
    assert {f["p_rule"] for f in fits} == {"0", "0.25/n"}


def test_sweep_without_grid_is_usage_error(tmp_path):
    assert main(["sweep", "--out", str(tmp_path / "x.csv")]) == 2


def test_sweep_byte_identical_across_workers(tmp_path):
    texts = []
    for workers in (1, 2):
        out = tmp_path / f"w{workers}.csv"
        args = ["sweep", "--n", "8,12", "--p", "0,0.5/n", "--variant", "cached,reeval", "--trials", "4",
                "--seed", "5", "--out", str(out)]
        assert main(args + ["--workers", str(workers)]) == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]


def test_validate_quick_passes():
    assert main(["validate", "--quick"]) == 0


def test_validate_failure_exit_code(monkeypatch):
    import noisysemo.validate as validate

    monkeypatch.setattr(validate, "run_suite",
                        lambda **kw: [CheckResult("fake", False, 1, "forced failure")])
    assert main(["validate", "--quick"]) == 3


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "noisysemo", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "validate" in out.stdout
