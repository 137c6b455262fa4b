import csv
import json

import pytest

from recshock.cli import main
from recshock.pipeline import OUTPUT_FILES

SMALL_CONFIG = """\
# tiny scenario for command-line tests
seed = 3
n_focal = 30
recs_per_focal = 2
n_days = 30
shock_min = 60
shock_max = 200
"""


@pytest.fixture
def small(tmp_path):
    cfg = tmp_path / "small.txt"
    cfg.write_text(SMALL_CONFIG)
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "data")]) == 0
    return tmp_path / "data"


def run_args(data, out, *extra):
    return ["run", "--log", str(data / "events.jsonl"), "--catalog", str(data / "catalog.csv"),
            "--out", str(out), "--min-category-size", "1", *extra]


def test_generate_writes_files(small):
    assert sorted(p.name for p in small.iterdir()) == ["catalog.csv", "events.jsonl", "truth.jsonl"]


def test_generate_missing_config(tmp_path, capsys):
    assert main(["generate", "--config", str(tmp_path / "nope.txt"), "--out", str(tmp_path)]) == 2
    assert "config file not found" in capsys.readouterr().err


def test_generate_invalid_config(tmp_path, capsys):
    cfg = tmp_path / "bad.txt"
    cfg.write_text("rho_max = 3\n")
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
    assert "rho_max" in capsys.readouterr().err


def test_generate_same_seed_identical(tmp_path, small):
    cfg = tmp_path / "small.txt"
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "again")]) == 0
    for name in ("events.jsonl", "truth.jsonl", "catalog.csv"):
        assert (small / name).read_bytes() == (tmp_path / "again" / name).read_bytes()
    assert main(["generate", "--config", str(cfg), "--seed", "4", "--out", str(tmp_path / "other")]) == 0
    assert (small / "events.jsonl").read_bytes() != (tmp_path / "other" / "events.jsonl").read_bytes()


def test_usage_errors():
    assert main([]) == 2
    assert main(["run", "--beta", "1.5", "--log", "a", "--catalog", "b", "--out", "c"]) == 2
    assert main(["run", "--window", "6", "--log", "a", "--catalog", "b", "--out", "c"]) == 2


def test_run_outputs_and_headline(small, tmp_path, capsys):
    out = tmp_path / "report"
    assert main(run_args(small, out)) == 0
    assert "rho=" in capsys.readouterr().out
    for name in OUTPUT_FILES:
        assert (out / name).is_file()
    report = json.loads((out / "report.json").read_text())
    assert report["beta"] == 0.7 and report["window"] == 7
    assert {"rho", "rho_se", "lambda", "n_shocks"} <= set(report["headline"])
    summary = json.loads((out / "ingest_summary.json").read_text())
    assert summary["events_read"] > 0 and summary["lines_malformed"] == 0


def test_run_missing_input(tmp_path, capsys):
    assert main(["run", "--log", str(tmp_path / "none.jsonl"), "--catalog", str(tmp_path / "c.csv"),
                 "--out", str(tmp_path / "o")]) == 2
    assert "input not found" in capsys.readouterr().err


def test_run_unreadable_log(tmp_path, small):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("garbage\n" * 5)
    args = run_args(small, tmp_path / "o")
    args[2] = str(bad)
    assert main(args) == 2


def test_beta_sweep_rows(small, tmp_path):
    out = tmp_path / "sweep"
    assert main(run_args(small, out, "--beta-sweep")) == 0
    for name, header in [("rho_vs_beta.csv", ["beta", "n_shocks", "rho_mean", "rho_se"]),
                         ("lambda_vs_beta.csv", ["beta", "n_shocks", "lambda", "naive_outbound"])]:
        rows = list(csv.reader(open(out / name)))
        assert rows[0] == header
        assert [float(r[0]) for r in rows[1:]] == [round(0.1 * k, 1) for k in range(11)]


def test_no_shocks_empty_report(small, tmp_path, capsys):
    out = tmp_path / "empty"
    assert main(run_args(small, out, "--min-users", "100000")) == 0
    assert "no eligible shocks" in capsys.readouterr().out
    report = json.loads((out / "report.json").read_text())
    assert report["headline"]["n_shocks"] == 0 and report["headline"]["rho"] is None
    assert report["shocks"] == []


def test_beta_one_on_noisy_data(preset_data, tmp_path):
    paths, _, _ = preset_data("noisy")
    out = tmp_path / "strict"
    assert main(["run", "--log", str(paths.log), "--catalog", str(paths.catalog), "--out", str(out),
                 "--beta", "1.0"]) == 0
    report = json.loads((out / "report.json").read_text())
    eligible = [s for s in report["shocks"] if s["eligible"]]
    # only shocks whose products have no recommendations survive exact constancy
    assert all("no_edges" in s["flags"] for s in eligible)
    assert len(eligible) < 0.5 * report["n_detected"]


def test_exclude_dates(small, tmp_path):
    out = tmp_path / "ex"
    assert main(run_args(small, out, "--exclude-dates", "2000-01-01:2100-01-01")) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["shocks"] == [] and report["excluded_ranges"] == [["2000-01-01", "2100-01-01"]]
    assert main(run_args(small, out, "--exclude-dates", "2014-02-30:2014-03-01")) == 2


def _verify(paths, report_dir, *extra):
    return main(["verify", "--log", str(paths.log), "--truth", str(paths.truth),
                 "--report", str(report_dir / "report.json"), *extra])


def test_verify_within_tolerance(preset_data, tmp_path, capsys):
    paths, _, _ = preset_data("convenience")
    out = tmp_path / "conv"
    assert main(["run", "--log", str(paths.log), "--catalog", str(paths.catalog), "--out", str(out)]) == 0
    assert _verify(paths, out) == 0
    text = capsys.readouterr().out
    assert "causal rate" in text and "causal fraction" in text and "rel_err" in text


def test_verify_unfiltered_correlated_data_fails(preset_data, tmp_path, capsys):
    paths, _, _ = preset_data("mixed")
    out = tmp_path / "b0"
    assert main(["run", "--log", str(paths.log), "--catalog", str(paths.catalog), "--out", str(out),
                 "--beta", "0"]) == 0
    capsys.readouterr()
    assert _verify(paths, out) == 1
    rate_line = next(line for line in capsys.readouterr().out.splitlines() if line.startswith("causal rate"))
    assert rate_line.endswith("FAIL")
    out7 = tmp_path / "b7"
    assert main(["run", "--log", str(paths.log), "--catalog", str(paths.catalog), "--out", str(out7)]) == 0
    assert _verify(paths, out7) == 0


def test_verify_mismatched_files(preset_data, small, tmp_path, capsys):
    paths, _, _ = preset_data("convenience")
    out = tmp_path / "small-report"
    assert main(run_args(small, out)) == 0
    assert _verify(paths, out) == 2
    assert "sha256" in capsys.readouterr().err


def test_accounting_command(small, tmp_path):
    assert main(["accounting", "--log", str(small / "events.jsonl"), "--truth", str(small / "truth.jsonl")]) == 0
    lines = (small / "events.jsonl").read_text().splitlines()
    (small / "events.jsonl").write_text("\n".join(lines[1:]) + "\n")
    assert main(["accounting", "--log", str(small / "events.jsonl"), "--truth", str(small / "truth.jsonl")]) == 1
