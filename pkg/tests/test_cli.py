import json
import math
import statistics
from pathlib import Path

import pytest

from rdwsim.cli import (CSV_COLUMNS, bundled_env_names, main, resolve_env,
                        summarize)
from rdwsim.sim import mann_whitney_u


def run_cli(*args):
    return main(list(args))


def read_csv(path):
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    return header, [dict(zip(header, line.split(","))) for line in lines[1:]]


def test_bundled_envs_resolve():
    names = bundled_env_names()
    assert {"square5", "rect2p5x5", "square4", "square3",
            "lshape5", "square5_pillar"} <= set(names)
    for name in names:
        assert resolve_env(name).exists()
    with pytest.raises(Exception):
        resolve_env("no_such_room")


def test_precompute(tmp_path, capsys):
    out = tmp_path / "cache.json"
    assert run_cli("precompute", "square5", "--out", str(out)) == 0
    msg = capsys.readouterr().out
    assert "100 positions x 30 orientations" in msg
    doc = json.loads(out.read_text())
    assert len(doc["positions"]) == 100
    # rerun writes identical bytes
    out2 = tmp_path / "cache2.json"
    run_cli("precompute", "square5", "--out", str(out2))
    assert out.read_bytes() == out2.read_bytes()


def test_precompute_empty_free_space(tmp_path, capsys):
    env = tmp_path / "tiny.json"
    env.write_text(json.dumps({"boundary": [[0, 0], [1, 0], [1, 1], [0, 1]],
                               "obstacles": [], "clearance": 0.45}))
    rc = run_cli("precompute", str(env), "--out", str(tmp_path / "c.json"))
    assert rc == 2


def _write_config(tmp_path, **overrides):
    doc = {"label": "t", "envs": ["square5", "square5"], "method": "ours",
           "threshold_m": 30.0}
    doc.update(overrides)
    p = tmp_path / "config.json"
    p.write_text(json.dumps(doc))
    return p


def test_run_echoes_seed(tmp_path):
    cfg = _write_config(tmp_path)
    out = tmp_path / "rows.csv"
    rc = run_cli("run", str(cfg), "--seed", "7", "--out", str(out),
                 "--cache-dir", str(tmp_path / "cache"))
    assert rc == 0
    header, rows = read_csv(out)
    assert tuple(header) == CSV_COLUMNS
    assert len(rows) == 1
    assert rows[0]["seed"] == "7"
    assert rows[0]["trial_id"] == "t:ours:7"
    assert rows[0]["status"] == "ok"
    assert rows[0]["wall_time_ms"] == ""
    # identical invocation gives identical bytes
    out2 = tmp_path / "rows2.csv"
    run_cli("run", str(cfg), "--seed", "7", "--out", str(out2),
            "--cache-dir", str(tmp_path / "cache"))
    assert out.read_bytes() == out2.read_bytes()


def test_run_unknown_method(tmp_path, capsys):
    cfg = _write_config(tmp_path, method="apf")
    rc = run_cli("run", str(cfg), "--out", str(tmp_path / "x.csv"))
    assert rc == 2
    assert "supported methods" in capsys.readouterr().err


def test_run_timing_column(tmp_path):
    cfg = _write_config(tmp_path, method="s2c", threshold_m=5.0)
    out = tmp_path / "rows.csv"
    run_cli("run", str(cfg), "--out", str(out), "--timing")
    _, rows = read_csv(out)
    assert rows[0]["wall_time_ms"] != ""
    assert int(rows[0]["wall_time_ms"]) >= 0


def _write_spec(tmp_path, **overrides):
    doc = {
        "methods": ["ours", "s2c"],
        "trials": 2,
        "base_seed": 0,
        "defaults": {"threshold_m": 25.0},
        "configs": [{"label": "A", "envs": ["square5", "square5"]},
                    {"label": "B", "envs": ["square3"]}],
    }
    doc.update(overrides)
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(doc))
    return p


def test_compare_matrix_and_summary(tmp_path):
    spec = _write_spec(tmp_path)
    out = tmp_path / "out"
    rc = run_cli("compare", str(spec), "--out", str(out))
    assert rc == 0
    header, rows = read_csv(out / "results.csv")
    assert len(rows) == 8  # 2 configs x 2 methods x 2 trials
    summary = json.loads((out / "summary.json").read_text())
    assert summary["failed_trials"] == 0
    groups = {(g["config"], g["method"]): g for g in summary["groups"]}
    assert set(groups) == {("A", "ours"), ("A", "s2c"), ("B", "ours"), ("B", "s2c")}
    assert "vs_ours" in groups[("A", "s2c")]
    assert groups[("A", "s2c")]["vs_ours"]["comparisons"] == 1
    assert "vs_ours" not in groups[("A", "ours")]


def test_compare_determinism_across_jobs(tmp_path):
    spec = _write_spec(tmp_path)
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    assert run_cli("compare", str(spec), "--out", str(out1), "--jobs", "1") == 0
    assert run_cli("compare", str(spec), "--out", str(out2), "--jobs", "3") == 0
    assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()
    assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()


def test_compare_rejects_bad_specs(tmp_path, capsys):
    rc = run_cli("compare", str(_write_spec(tmp_path, methods=[])),
                 "--out", str(tmp_path / "x"))
    assert rc == 2
    rc = run_cli("compare", str(_write_spec(tmp_path, methods=["ours", "nope"])),
                 "--out", str(tmp_path / "x"))
    assert rc == 2
    assert "supported methods" in capsys.readouterr().err
    rc = run_cli("compare", str(_write_spec(tmp_path, configs=[{"envs": ["square5"]}])),
                 "--out", str(tmp_path / "x"))
    assert rc == 2


def test_summary_matches_independent_recomputation(tmp_path):
    spec = _write_spec(tmp_path, trials=3)
    out = tmp_path / "out"
    run_cli("compare", str(spec), "--out", str(out))
    header, rows = read_csv(out / "results.csv")
    summary = json.loads((out / "summary.json").read_text())
    by_key = {}
    for r in rows:
        if r["status"] != "ok":
            continue
        label = r["trial_id"].rsplit(":", 2)[0]
        by_key.setdefault((label, r["method"]), []).append(int(r["common_resets"]))
    for g in summary["groups"]:
        data = by_key[(g["config"], g["method"])]
        assert g["n"] == len(data)
        assert g["mean"] == statistics.fmean(data)
        q1, med, q3 = statistics.quantiles(data, n=4, method="inclusive")
        assert (g["q1"], g["median"], g["q3"]) == (q1, med, q3)
        assert (g["min"], g["max"]) == (min(data), max(data))
        if "vs_ours" in g:
            ours = by_key[(g["config"], "ours")]
            u, p = mann_whitney_u(ours, data)
            assert g["vs_ours"]["U"] == u
            assert g["vs_ours"]["p"] == p
            assert g["vs_ours"]["p_bonferroni"] == min(1.0, p * g["vs_ours"]["comparisons"])


def test_report_boxplots_and_heatmaps(tmp_path):
    spec = _write_spec(tmp_path)
    out = tmp_path / "out"
    run_cli("compare", str(spec), "--out", str(out))
    cache = tmp_path / "cache.json"
    run_cli("precompute", "square5", "--out", str(cache))
    rep = tmp_path / "rep"
    rc = run_cli("report", str(out / "results.csv"), "--out", str(rep),
                 "--cache", str(cache))
    assert rc == 0
    assert (rep / "boxplot_A.svg").exists()
    assert (rep / "boxplot_B.svg").exists()
    for f in ("heatmap_cache_best_time.svg", "heatmap_cache_harmonic_time.svg"):
        body = (rep / f).read_text()
        assert body.startswith("<svg")
        assert "<rect" in body
    box = (rep / "boxplot_A.svg").read_text()
    assert box.count("<rect") >= 3  # background plus one box per method


def test_report_missing_column(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("trial_id,method,seed\nx:ours:0,ours,0\n")
    rc = run_cli("report", str(bad), "--out", str(tmp_path / "rep"))
    assert rc == 2
    err = capsys.readouterr().err
    assert "n_users" in err


def test_report_ragged_row(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text(",".join(CSV_COLUMNS) + "\nx:ours:0,ours,0\n")
    rc = run_cli("report", str(bad), "--out", str(tmp_path / "rep"))
    assert rc == 2
    assert ":2:" in capsys.readouterr().err  # row number named


def test_heatmap_best_field_peaks_centrally(tmp_path):
    # the harmonic-mean field peaks in the middle of an empty square: being
    # boxed in on any side drags the mean down
    cache = tmp_path / "cache.json"
    run_cli("precompute", "square5", "--out", str(cache))
    doc = json.loads(cache.read_text())
    vals = [math.inf if v is None else v for v in doc["harmonic_time"]]
    best = max(range(len(vals)), key=lambda i: vals[i])
    x, y = doc["positions"][best]
    assert (x, y) in {(2.25, 2.25), (2.25, 2.75), (2.75, 2.25), (2.75, 2.75)}


def test_summarize_handles_failures():
    rows = [
        ["A:ours:0", "ours", "0", "2", "10", "1;1", "", "ok"],
        ["A:ours:1", "ours", "1", "2", "", "", "", "error:ValueError"],
        ["A:s2c:0", "s2c", "0", "2", "15", "1;1", "", "ok"],
    ]
    summary = summarize(rows)
    assert summary["failed_trials"] == 1
    ours = [g for g in summary["groups"] if g["method"] == "ours"][0]
    assert ours["n"] == 1 and ours["mean"] == 10
