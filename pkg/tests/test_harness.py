import json
import math

import numpy as np
import pytest

from cfsim import cli
from cfsim.config import ConfigError, SimConfig, load_config
from cfsim.harness import (
    CSV_COLUMNS,
    FULL_FADINGS,
    FULL_LAYOUTS,
    emit,
    read_results,
    render,
    run_layout,
    run_scenario,
    summarize,
    sweep,
    worker_count,
)

TINY = dict(num_rus=4, num_ues=20, antennas_per_ru=4, pilot_dim=3, max_cluster_size=2,
            area_side=500.0, num_layouts=3, num_fadings=2)


def tiny(**kw):
    return SimConfig(**{**TINY, **kw})


def test_run_scenario_one_result_per_layout():
    cfg = tiny()
    res = run_scenario(cfg, workers=1)
    assert [r.layout_index for r in res] == [0, 1, 2]
    for r in res:
        assert len(r.per_ue_se) == cfg.num_ues
        assert r.sum_se == pytest.approx(sum(r.per_ue_se))
        assert 0 <= r.outage_prob <= 1


def test_layout_results_repeat():
    a, b = run_layout(tiny(), 1), run_layout(tiny(), 1)
    assert a.per_ue_se == b.per_ue_se
    assert run_layout(tiny(seed=1), 1).per_ue_se != a.per_ue_se


def test_changing_fadings_keeps_layout_and_assignment():
    a, b = run_layout(tiny(num_fadings=1), 0), run_layout(tiny(num_fadings=3), 0)
    assert a.mean_cluster_size == b.mean_cluster_size
    assert a.outage_prob == b.outage_prob


def test_summary_statistics():
    cfg = tiny()
    res = run_scenario(cfg, workers=1)
    (s,) = summarize(res, cfg)
    sums = np.array([r.sum_se for r in res])
    assert s.sum_se_mean == pytest.approx(sums.mean())
    assert s.sum_se_stderr == pytest.approx(sums.std(ddof=1) / math.sqrt(3))
    assert s.layouts == 3 and s.fadings == 2
    (single,) = summarize(res[:1], cfg)
    assert math.isnan(single.sum_se_stderr)


def test_parallel_output_is_identical(tmp_path):
    cfg = tiny()
    p1 = emit(summarize(run_scenario(cfg, workers=1), cfg), "csv", tmp_path / "a.csv", timing=False)
    p2 = emit(summarize(run_scenario(cfg, workers=2), cfg), "csv", tmp_path / "b.csv", timing=False)
    assert p1.read_bytes() == p2.read_bytes()


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_emit_round_trip(tmp_path, fmt):
    cfg = tiny(num_layouts=1)
    rows = summarize(run_scenario(cfg, workers=1), cfg)
    path = emit(rows, fmt, tmp_path / f"out.{fmt}")
    back = read_results(path)
    assert len(back) == 1
    assert list(back[0]) == CSV_COLUMNS
    assert back[0]["sum_se_mean"] == pytest.approx(rows[0].sum_se_mean, rel=1e-5)
    assert math.isnan(back[0]["sum_se_stderr"])
    assert back[0]["K"] == cfg.num_ues


def test_emit_empty_leaves_no_file(tmp_path):
    with pytest.raises(ValueError):
        emit([], "csv", tmp_path / "x.csv")
    assert not (tmp_path / "x.csv").exists()
    with pytest.raises(ValueError):
        render([object()], "xml")


def test_emit_unwritable_path(tmp_path):
    cfg = tiny(num_layouts=1)
    rows = summarize(run_scenario(cfg, workers=1), cfg)
    with pytest.raises(OSError):
        emit(rows, "csv", tmp_path / "missing" / "x.csv")


def test_sweep_cross_product():
    rows = sweep(tiny(num_layouts=1, num_fadings=1), "K", [10, 20], schemes=["SiaOpa", "RopaWgf"],
                 estimators=["PM", "SP"], workers=1)
    assert len(rows) == 8
    assert {(r.K, r.scheme, r.estimator) for r in rows} == {
        (k, s, e) for k in (10, 20) for s in ("SiaOpa", "RopaWgf") for e in ("PM", "SP")}


def test_sweep_over_scheme_axis_has_no_duplicates():
    rows = sweep(tiny(num_layouts=1, num_fadings=1), "scheme", ["NonOverloaded", "RopaRandom"],
                 schemes=["SiaOpa"], workers=1)
    assert [r.scheme for r in rows] == ["NonOverloaded", "RopaRandom"]


def test_sweep_lm_axis():
    rows = sweep(tiny(num_layouts=1, num_fadings=1), "LM", ["4x4", "5x2"], workers=1)
    assert [(r.L, r.M) for r in rows] == [(4, 4), (5, 2)]


def test_sweep_unknown_axis():
    with pytest.raises(ConfigError):
        sweep(tiny(), "colour", [1])


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("CFSIM_THREADS", "2")
    assert worker_count(8) == 2
    monkeypatch.setenv("CFSIM_THREADS", "lots")
    with pytest.raises(ConfigError):
        worker_count(8)
    monkeypatch.delenv("CFSIM_THREADS")
    assert worker_count(3) == 3


def test_load_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"num_ues": 77, "scheme": "ropa-wgf", "estimator": "pm"}))
    cfg = load_config(path, seed=5, num_ues=None)
    assert (cfg.num_ues, cfg.seed, cfg.scheme.value, cfg.estimator.value) == (77, 5, "RopaWgf", "PM")
    assert SimConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("text", ['{"bogus": 1}', "[1, 2]", "{not json", '{"num_ues": 2.5}'])
def test_load_config_errors(tmp_path, text):
    path = tmp_path / "c.json"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.json")


# command line


def write_config(tmp_path, **kw):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({**TINY, **kw}))
    return str(path)


def test_cli_run_writes_csv(tmp_path):
    out = tmp_path / "r.csv"
    code = cli.main(["run", "--config", write_config(tmp_path), "--scheme", "RopaRandom",
                     "--layouts", "2", "--out", str(out), "--no-timing"])
    assert code == 0
    (row,) = read_results(out)
    assert row["scheme"] == "RopaRandom" and row["layouts"] == 2 and row["wall_time_s"] == 0


def test_cli_run_json_stdout(tmp_path, capsys):
    assert cli.main(["run", "--config", write_config(tmp_path), "--format", "json", "--layouts", "1"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data[0]["K"] == TINY["num_ues"]


def test_cli_sweep(tmp_path):
    out = tmp_path / "s.csv"
    code = cli.main(["sweep", "--config", write_config(tmp_path, num_layouts=1, num_fadings=1),
                     "--axis", "K", "--values", "8,12", "--estimators", "PM,Ideal", "--out", str(out)])
    assert code == 0
    assert [(r["K"], r["estimator"]) for r in read_results(out)] == [(8, "PM"), (8, "Ideal"), (12, "PM"), (12, "Ideal")]


def test_cli_dumps(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert cli.main(["dump-assignment", "--config", cfg]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "k,leader,pilot,outage,cluster"
    assert len(lines) == TINY["num_ues"] + 1
    out = tmp_path / "sup.csv"
    assert cli.main(["dump-supports", "--config", cfg, "--out", str(out)]) == 0
    rows = out.read_text().strip().splitlines()
    assert len(rows) == TINY["num_rus"] * TINY["num_ues"] + 1
    l, k, size, idx = rows[1].split(",")
    assert int(size) == len(idx.split())


def test_cli_full_scale_flag(tmp_path):
    args = cli.build_parser().parse_args(["run", "--config", write_config(tmp_path), "--paper-scale"])
    cfg = cli.config_from_args(args)
    assert (cfg.num_layouts, cfg.num_fadings) == (FULL_LAYOUTS, FULL_FADINGS)


@pytest.mark.parametrize("argv", [
    ["run", "--scheme", "bogus"],
    ["run", "--config", "/nonexistent/cfg.json"],
    ["run", "-K", "0"],
    ["sweep", "--axis", "colour", "--values", "1"],
])
def test_cli_errors_exit_nonzero(argv, capsys):
    assert cli.main(argv) != 0
    assert "error" in capsys.readouterr().err
