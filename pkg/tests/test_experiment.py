import subprocess
import sys
from dataclasses import replace

import pytest

from ethersim.cli import main
from ethersim.experiment import (
    ConfigError,
    ExperimentConfig,
    dump_config,
    load_config,
    parse_config,
    run_sweep,
)

SMALL = """
# short runs for tests
duration_s = 230
warmup_s = 10
bin_widths_s = 1, 2, 5
seeds_per_point = 2
max_retx_sweep = 3, 9
"""


def test_empty_config_gives_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    cfg = load_config(path)
    assert cfg.workload.n_clients == 32 and cfg.workload.n_servers == 2
    assert cfg.max_retx_sweep == (3, 6, 9)
    assert cfg.bin_widths_s == ("5", "10", "20")
    assert cfg.seeds_per_point == 5 and cfg.duration == 4000 * 10**9 and cfg.warmup == 100 * 10**9
    assert cfg.ethernet.slot_time == 51_200 and cfg.ethernet.jam_time == 3_200 and cfg.ethernet.ifg == 9_600


def test_single_point_sweep():
    assert parse_config("max_retx_sweep = 3").max_retx_sweep == (3,)


def test_duration_below_warmup_rejected():
    with pytest.raises(ConfigError, match="duration_s must exceed warmup_s"):
        parse_config("duration_s = 50\nwarmup_s = 100\n")


@pytest.mark.parametrize(
    "text, match",
    [
        ("foo = 1", ":1: unknown key 'foo'"),
        ("\n\nseeds_per_point", ":3: expected"),
        ("seeds_per_point = x", ":1: bad value"),
        ("bin_widths_s = 10, 5", "ascending"),
        ("slot_time_s = 1e-7", "slot_time"),
        ("seeds_per_point = 1\nseeds_per_point = 2", ":2: duplicate"),
    ],
)
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_config_units_and_distributions():
    cfg = parse_config(
        "slot_time_s = 51.2e-6\nfile_size_dist = pareto:1.5:65536\nthink_time_dist = exponential:2\n"
        "congestion_periods_s = 25, 75 # seconds\n"
    )
    assert cfg.ethernet.slot_time == 51_200
    assert cfg.workload.file_size_dist.kind == "pareto"
    assert cfg.workload.think_time_dist.mean == 2
    assert cfg.workload.congestion_periods_s == (25.0, 75.0)


def test_dump_round_trips():
    cfg = parse_config(SMALL + "file_size_dist = constant:5000\ncongestion_periods_s = 5, 10\n")
    assert parse_config(dump_config(cfg)) == cfg
    assert parse_config(dump_config(ExperimentConfig())) == ExperimentConfig()


@pytest.fixture(scope="module")
def small_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    cfg = replace(parse_config(SMALL), output_dir=str(out))
    return run_sweep(cfg), out


def test_sweep_cardinality(small_report):
    report, out = small_report
    assert len(report.runs) == 4 and not report.failures
    assert [(r.max_retx, r.seed_index) for r in report.runs] == [(3, 0), (3, 1), (9, 0), (9, 1)]
    assert all(len(r.estimates) == 3 for r in report.runs)


def test_table_echoes_report(small_report):
    report, out = small_report
    lines = (out / "table.csv").read_text().splitlines()
    assert lines[0] == "max_retx,bin_width_s,mean_H,sd_H,n_seeds"
    assert len(lines) == 1 + 2 * 3
    first = lines[1].split(",")
    assert first[:2] == ["3", "1"] and first[4] == "2"
    assert float(first[2]) == report.mean_h(3, 10**9)


def test_single_run_sd_zero(tmp_path):
    cfg = replace(parse_config(SMALL), seeds_per_point=1, max_retx_sweep=(3,), output_dir=str(tmp_path))
    report = run_sweep(cfg)
    rows = report.table_rows()
    assert len(rows) == 3 and all(r["sd_H"] == 0 for r in rows)


def test_figure_panels(small_report):
    report, out = small_report
    panels = sorted(p.name for p in (out / "panels").iterdir())
    assert panels == ["3_1.csv", "3_2.csv", "3_5.csv", "9_1.csv", "9_2.csv", "9_5.csv"]
    totals = {}
    for width in (1, 2, 5):
        rows = (out / "panels" / f"3_{width}.csv").read_text().splitlines()
        assert rows[0] == "bin_start_s,bytes"
        assert len(rows) - 1 == (230 - 10) // width
        totals[width] = sum(int(r.split(",")[1]) for r in rows[1:])
    # 220 s divides into whole 1 s and 2 s bins, so those totals agree
    assert totals[1] == totals[2] >= totals[5]


def test_per_run_artifacts(small_report):
    report, out = small_report
    run_dir = out / "3" / "0"
    names = {p.name for p in run_dir.iterdir()}
    assert {"run.txt", "trace_1.csv", "trace_5.csv", "pox_1.csv"} <= names
    assert (out / "pox" / "9_1_2.csv").read_text().startswith("n,mean_rs\n")
    summary = dict(line.split("=", 1) for line in (out / "summary.txt").read_text().splitlines())
    assert summary["runs"] == "4" and summary["failures"] == "0"
    assert 0.15 < float(summary["utilization.3.0"]) < 0.85


def test_failures_are_recorded(tmp_path, monkeypatch):
    import ethersim.experiment as exp

    real = exp.NetworkSimulation

    def flaky(params, workload, seed):
        if params.max_retx == 9:
            raise RuntimeError("boom")
        return real(params, workload, seed)

    monkeypatch.setattr(exp, "NetworkSimulation", flaky)
    cfg = replace(parse_config(SMALL), seeds_per_point=1, output_dir=str(tmp_path))
    report = run_sweep(cfg)
    assert [r.ok for r in report.runs] == [True, False]
    assert "boom" in (tmp_path / "summary.txt").read_text()


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("duration_s = 50\nwarmup_s = 100\n")
    assert main(["run", str(bad)]) == 1
    assert main(["run", str(tmp_path / "missing.cfg")]) == 1
    good = tmp_path / "good.cfg"
    good.write_text(SMALL.replace("seeds_per_point = 2", "seeds_per_point = 1") + f"output_dir = {tmp_path / 'o'}\n")
    assert main(["run", str(good)]) == 0
    out = capsys.readouterr().out
    assert "max_retx=3 width=1s" in out


def test_cli_analyze(tmp_path, capsys):
    import numpy as np

    from ethersim.selfsim import gen_white_noise
    from ethersim.trace import TrafficTrace, write_trace_csv

    bins = np.round(1000 + 100 * gen_white_noise(1024, 4)).astype(int)
    write_trace_csv(TrafficTrace(5 * 10**9, 0, bins), tmp_path / "t.csv")
    assert main(["analyze", str(tmp_path / "t.csv"), "--pox", str(tmp_path / "pox.csv")]) == 0
    out = dict(line.split("=") for line in capsys.readouterr().out.splitlines())
    assert 0.4 < float(out["H"]) < 0.65 and int(out["points"]) >= 4
    assert (tmp_path / "pox.csv").read_text().startswith("n,mean_rs\n")
    (tmp_path / "short.csv").write_text("bin_start_s,bytes\n0,1\n5,2\n")
    assert main(["analyze", str(tmp_path / "short.csv")]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ethersim", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "selftest" in res.stdout
