import json
import math

import numpy as np
import pytest

from ensmc import config as C
from ensmc.cli import COMPARE_COLUMNS, compare_row, main, render_csv, render_table
from ensmc.datagen import DataGenSpec, write_generated
from ensmc.diagnostics import autocorrelation, ess, mode_switch_count
from ensmc.plot import pixel_points, render_svg, write_svg, y_range
from ensmc.runner import build_measure, build_target, file_sha256, run_config, summarize_trace
from ensmc.samplers import TraceRecord
from ensmc.trace import read_trace, write_trace

LN10 = math.log(10)


@pytest.fixture(scope="module")
def small_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "small.csv"
    write_generated(path, DataGenSpec(n=30, p=3, noise_sd=0.4, seed=2))
    return str(path)


def small_cfg(data, **kw):
    return C.resolve({"data": data, "budget": 600, "thin_records": 100}, kw)


# configuration


def test_config_text_roundtrip():
    text = """
    # comment line
    data = d.csv
    algo = single-rwm   # trailing comment
    k = 9
    budget = 1200
    grid-extent = 2.5
    center = no
    thin = none
    """
    cfg = C.resolve(C.parse_config_text(text))
    assert cfg["algo"] == "single-rwm"
    assert cfg["K"] == 9
    assert cfg["budget"] == 1200
    assert cfg["grid_extent"] == 2.5
    assert cfg["center"] is False
    assert cfg["thin"] is None
    assert cfg["measure"] == "grid"


@pytest.mark.parametrize("text", ["nonsense = 1", "data", "budget = lots", "algo = gibbs", "measure = fancy"])
def test_config_rejects(text):
    with pytest.raises(C.ConfigError):
        C.parse_config_text(text)


@pytest.mark.parametrize("override", [
    {"budget": 0}, {"K": 1}, {"s": 0.0}, {"shift_sd": -1.0}, {"grid_jitter": 0.5}, {"hold": 0},
    {"algo": "ensemble-chol", "path": "eig"}, {"algo": "ensemble-eig", "path": "chol"},
])
def test_config_validation(override):
    with pytest.raises(C.ConfigError):
        C.resolve({"data": "d.csv"}, override)


def test_config_requires_data():
    with pytest.raises(C.ConfigError, match="dataset"):
        C.resolve({})


def test_effective_path():
    base = {"data": "d.csv"}
    assert C.effective_path(C.resolve(base, {"algo": "joint-rwm"})) == "direct"
    assert C.effective_path(C.resolve(base, {"algo": "ensemble-chol"})) == "chol"
    assert C.effective_path(C.resolve(base, {"algo": "single-rwm"})) == "eig"
    assert C.effective_path(C.resolve(base, {"algo": "single-rwm", "path": "chol"})) == "chol"


def test_describe_keys_lists_every_key():
    text = C.describe_keys()
    for k in C.KEYS:
        assert k.name in text


def test_grid_measure_needs_perfect_power(small_csv):
    cfg = small_cfg(small_csv, K=50)
    with pytest.raises(C.ConfigError):
        build_measure(cfg, build_target(cfg))
    cfg = small_cfg(small_csv, K=49)
    m = build_measure(cfg, build_target(cfg))
    assert m.counts == (7, 7)


def test_shift_with_independent_rejected(small_csv, tmp_path):
    code = main(["run", "--data", small_csv, "--measure", "independent", "--shift-sd", "0.1",
                 "--budget", "30", "--out", str(tmp_path / "t.csv")])
    assert code == 2


# diagnostics


def test_mode_switch_examples():
    assert mode_switch_count(np.zeros(100), -1.0) == 0
    assert mode_switch_count(np.tile([0.0, 1.0], 500), 0.5) == 999
    assert mode_switch_count([0.0, 0.5, 1.0], 0.5) == 1
    assert mode_switch_count([0.5, 0.4], 0.5) == 1


def test_autocorrelation_lag0():
    r = autocorrelation(np.random.default_rng(1).normal(size=64))
    assert r[0] == pytest.approx(1.0)


def test_ess_iid():
    x = np.random.default_rng(7).normal(size=10_000)
    assert 8_000 <= ess(x) <= 12_000


def test_ess_constant():
    assert ess(np.full(50, 3.0)) == 1.0


def test_ess_ar1():
    rng = np.random.default_rng(11)
    n, phi = 100_000, 0.9
    e = rng.normal(size=n)
    x = np.empty(n)
    x[0] = e[0] / math.sqrt(1 - phi**2)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    expected = n * (1 - phi) / (1 + phi)
    assert abs(ess(x) - expected) <= 0.3 * expected


def test_ess_rejects_short_or_nonfinite():
    with pytest.raises(ValueError):
        ess(np.arange(5.0))
    with pytest.raises(ValueError):
        ess(np.r_[np.arange(20.0), np.nan])


# trace files


def _toy_records(n=5):
    return [TraceRecord(i + 1, 3 * (i + 1), 5 * (i + 1), -10.0 / (i + 1), 0.1 * i, -0.3, math.log(0.2) + i / 7,
                        0.5, float("nan") if i == 0 else 1 / 3) for i in range(n)]


def test_trace_roundtrip_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    recs = _toy_records()
    write_trace(a, recs)
    back = read_trace(a)
    write_trace(b, back)
    assert a.read_bytes() == b.read_bytes()
    assert back[2] == recs[2]


def test_trace_header_checked(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_trace(p)


# plotting


def test_plot_pixels_by_hand():
    # log10 values 0, 1, -1 -> y range (-1, 1); plot area x 60..780, y 20..260
    recs = [TraceRecord(i, i, i, 0.0, 0.0, LN10, -LN10, 1.0, 1.0) for i in (1, 2)]
    assert y_range(recs) == (-1.0, 1.0)
    assert pixel_points(recs, "mean_log_nu") == [(60.0, 140.0), (780.0, 140.0)]
    assert pixel_points(recs, "log_eta") == [(60.0, 20.0), (780.0, 20.0)]
    assert pixel_points(recs, "log_sigma") == [(60.0, 260.0), (780.0, 260.0)]
    svg = render_svg(recs)
    assert 'class="mean_log_nu" fill="none" stroke="red" stroke-width="0.8" points="60.00,140.00 780.00,140.00"' in svg
    assert 'class="log_eta" fill="none" stroke="green" stroke-width="0.8" points="60.00,20.00 780.00,20.00"' in svg
    assert 'class="log_sigma" fill="none" stroke="blue" stroke-width="0.8" points="60.00,260.00 780.00,260.00"' in svg
    assert svg.count("<polyline") == 3
    assert ">1e-1</text>" in svg and ">1e0</text>" in svg and ">1e1</text>" in svg


def test_plot_title_escaped():
    svg = render_svg(_toy_records(), title="a<b & c")
    assert "a&lt;b &amp; c" in svg


def test_plot_empty_trace_no_file(tmp_path):
    out = tmp_path / "p.svg"
    with pytest.raises(ValueError):
        write_svg(out, [])
    assert not out.exists()
    trace = tmp_path / "empty.csv"
    write_trace(trace, [])
    assert main(["plot", "--trace", str(trace), "--out", str(out)]) == 3
    assert not out.exists()


# CLI end to end


def test_gen_data_cli(tmp_path, capsys):
    out = tmp_path / "d.csv"
    assert main(["gen-data", "--preset", "paper", "--seed", "3", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 101
    assert lines[0] == ",".join([f"z{j}" for j in range(1, 13)] + ["y"])
    assert all(len(line.split(",")) == 13 for line in lines[1:])
    first = file_sha256(out)
    assert first in capsys.readouterr().out
    assert main(["gen-data", "--preset", "paper", "--seed", "3", "--out", str(out)]) == 0
    assert file_sha256(out) == first


@pytest.mark.parametrize("argv", [
    ["gen-data", "--n", "0", "--out", "x.csv"],
    ["gen-data", "--p", "2", "--out", "x.csv"],
    ["gen-data", "--preset", "paper", "--p", "5", "--out", "x.csv"],
    ["run", "--budget", "10"],
    ["run", "--data", "d.csv", "--set", "bogus=1"],
    ["run", "--data", "d.csv", "--algo", "gibbs"],
    ["frobnicate"],
])
def test_cli_config_errors_exit_2(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2
    assert not (tmp_path / "x.csv").exists()


def test_cli_missing_data_exit_3(tmp_path):
    assert main(["run", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "t.csv")]) == 3


def test_run_cli_trace_and_summary(small_csv, tmp_path):
    trace = tmp_path / "t.csv"
    assert main(["run", "--data", small_csv, "--algo", "single-rwm", "--budget", "6000",
                 "--out", str(trace)]) == 0
    recs = read_trace(trace)
    assert len(recs) == 1000
    assert recs[-1].slow_evals == 6000
    assert all(a.slow_evals <= b.slow_evals for a, b in zip(recs, recs[1:]))
    summary = json.loads((tmp_path / "t.json").read_text())
    assert "timing" not in summary
    assert summary["data_sha256"] == file_sha256(small_csv)
    recomputed = summarize_trace(recs, C.resolve(summary["config"]), summary["data_sha256"])
    live = {k: v for k, v in summary.items() if k not in ("diagnostics", "timing")}
    assert json.loads(json.dumps(recomputed)) == live
    for rate in summary["rejection"].values():
        assert 0.0 <= rate <= 1.0


def test_run_cli_timing_and_set(small_csv, tmp_path):
    trace = tmp_path / "t.csv"
    summary = tmp_path / "s.json"
    assert main(["run", "--data", small_csv, "--set", "budget=60", "--set", "measure=chain",
                 "--timing", "--out", str(trace), "--summary", str(summary)]) == 0
    s = json.loads(summary.read_text())
    assert s["config"]["measure"] == "chain"
    assert s["timing"]["wall_time"] > 0


def test_run_with_config_file_and_override(small_csv, tmp_path):
    cfgfile = tmp_path / "r.cfg"
    cfgfile.write_text(f"data = {small_csv}\nalgo = joint-rwm\nbudget = 50\n")
    assert main(["run", "--config", str(cfgfile), "--budget", "40", "--out", str(tmp_path / "t.csv")]) == 0
    s = json.loads((tmp_path / "t.json").read_text())
    assert s["slow_evals"] == 40
    assert s["path"] == "direct"
    assert s["rejection"]["fast"] is None


def test_extra_fast_counts(small_csv):
    # eig path, p = 3: a sweep costs 3 slow and 3 + 2 fast evaluations
    _, single = run_config(small_cfg(small_csv, algo="single-rwm", budget=300))
    _, extra = run_config(small_cfg(small_csv, algo="extra-fast", budget=300, extra=7))
    assert single["iterations"] == extra["iterations"] == 100
    assert single["fast_evals"] == 100 * 5
    assert extra["fast_evals"] == 100 * (5 + 7)
    assert extra["slow_evals"] == single["slow_evals"] == 300


def test_extra_fast_direct_path_rejected(small_csv):
    with pytest.raises(C.ConfigError):
        run_config(small_cfg(small_csv, algo="extra-fast", path="direct"))


@pytest.mark.parametrize("algo", ["joint-rwm", "single-rwm", "extra-fast", "random-grid", "ensemble-chol", "ensemble-eig"])
def test_every_algo_runs(small_csv, algo):
    trace, summary = run_config(small_cfg(small_csv, algo=algo, K=9))
    assert summary["slow_evals"] >= 600
    assert all(math.isfinite(r.log_post) for r in trace)


def test_compare_identical_configs(small_csv):
    cfg = small_cfg(small_csv, algo="ensemble-eig", K=9)
    rows = [compare_row("x", run_config(cfg)[1]) for _ in range(2)]
    assert rows[0] == rows[1]
    table = render_table(rows, COMPARE_COLUMNS)
    body = table.splitlines()[1:]
    assert body[0] == body[1]
    lines = render_csv(rows, COMPARE_COLUMNS).splitlines()
    assert lines[0] == ",".join(COMPARE_COLUMNS)
    assert lines[1] == lines[2]


def test_compare_cli_from_summaries(small_csv, tmp_path, capsys):
    for name, algo in (("a", "single-rwm"), ("b", "ensemble-eig")):
        assert main(["run", "--data", small_csv, "--algo", algo, "--budget", "90", "--k", "9",
                     "--out", str(tmp_path / f"{name}.csv")]) == 0
    capsys.readouterr()
    out_csv = tmp_path / "cmp.csv"
    assert main(["compare", str(tmp_path / "a.json"), str(tmp_path / "b.json"), "--csv", str(out_csv)]) == 0
    table = capsys.readouterr().out.splitlines()
    assert table[0].split() == list(COMPARE_COLUMNS)
    assert table[1].startswith("a ") and table[2].startswith("b ")
    assert len(out_csv.read_text().splitlines()) == 3


def test_compare_needs_two(small_csv, tmp_path):
    cfgfile = tmp_path / "one.cfg"
    cfgfile.write_text(f"data = {small_csv}\nbudget = 30\n")
    assert main(["compare", str(cfgfile)]) == 2


def test_plot_cli(small_csv, tmp_path):
    trace = tmp_path / "t.csv"
    assert main(["run", "--data", small_csv, "--budget", "3000", "--out", str(trace)]) == 0
    svg = tmp_path / "t.svg"
    assert main(["plot", "--trace", str(trace), "--out", str(svg), "--seed", "5"]) == 0
    text = svg.read_text()
    n = len(read_trace(trace))
    assert text.count("<polyline") == 3
    for name in ("mean_log_nu", "log_eta", "log_sigma"):
        start = text.index(f'class="{name}"')
        pts = text[text.index('points="', start) + 8: text.index('"/>', start)]
        assert len(pts.split()) == n


def test_cli_byte_determinism(small_csv, tmp_path):
    outs = []
    for rep in range(2):
        d = tmp_path / str(rep)
        d.mkdir()
        assert main(["gen-data", "--n", "20", "--p", "3", "--seed", "4", "--out", str(d / "d.csv")]) == 0
        assert main(["run", "--data", small_csv, "--budget", "120", "--out", str(d / "t.csv")]) == 0
        assert main(["plot", "--trace", str(d / "t.csv"), "--out", str(d / "t.svg")]) == 0
        outs.append([(d / f).read_bytes() for f in ("d.csv", "t.csv", "t.json", "t.svg")])
    assert outs[0] == outs[1]


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "ensmc", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    assert "gen-data" in r.stdout
