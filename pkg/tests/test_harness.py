import json
import os

import numpy as np
import pytest

from natmo import cli, harness
from natmo.traces import IterRecord, RunTrace, read_trace


def write_config(tmp_path, **kw):
    cfg = {
        "problem": "mackey_glass",
        "methods": ["ngd", "qnhb"],
        "seeds": [0, 1],
        "overrides": {"max_iters": 3},
    }
    cfg.update(kw)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_load_config_roundtrip(tmp_path):
    cfg = harness.load_config(write_config(tmp_path))
    assert cfg.problem == "mackey_glass"
    assert cfg.methods == ("ngd", "qnhb")
    assert cfg.seeds == (0, 1)
    opt = cfg.opt_config("ngd")
    assert opt.max_iters == 3


def test_load_config_rejects_unknowns(tmp_path):
    with pytest.raises(ValueError):
        harness.load_config(write_config(tmp_path, problem="nope"))
    with pytest.raises(ValueError):
        harness.load_config(write_config(tmp_path, methods=["adam"]))
    with pytest.raises(ValueError):
        harness.load_config(write_config(tmp_path, overrides={"lr": 0.1}))
    with pytest.raises(ValueError):
        harness.load_config(write_config(tmp_path, seeds=[]))


def test_config_override_mapping(tmp_path):
    path = write_config(tmp_path, overrides={
        "reg": "cutoff", "eps_rel": 1e-9, "hb_beta": 0.25, "nesterov_scale": 0.75,
        "clip_cap": 0.2, "max_iters": 7, "stop_threshold": 1e-3,
        "metric_W": "hessian", "metric_X": "l2",
    })
    opt = harness.load_config(path).opt_config("nhb")
    assert opt.reg.kind == "cutoff" and opt.reg.eps == 1e-9
    assert opt.hb_beta == 0.25
    assert opt.nesterov_scale == 0.75
    assert opt.clip_cap == 0.2
    assert opt.max_iters == 7
    assert opt.stop_threshold == 1e-3
    assert opt.metric_w == "hessian"


def test_run_matrix_writes_traces_and_manifest(tmp_path, monkeypatch):
    monkeypatch.setenv("NATMO_WORKERS", "1")
    cfg = harness.load_config(write_config(tmp_path))
    traces = harness.run_matrix(cfg, tmp_path / "out")
    assert len(traces) == 4
    files = sorted(os.listdir(tmp_path / "out"))
    csvs = [f for f in files if f.endswith(".csv")]
    assert len(csvs) == 4
    assert "manifest.txt" in files
    manifest = (tmp_path / "out" / "manifest.txt").read_text()
    assert "problem=mackey_glass" in manifest
    assert "run.ngd.seed0=" in manifest
    for f in csvs:
        tr = read_trace(tmp_path / "out" / f)
        tr.validate()
        assert tr.status == "max_iters"
        assert len(tr.records) == 4  # rows 0..3


def test_run_matrix_deterministic_columns(tmp_path, monkeypatch):
    monkeypatch.setenv("NATMO_WORKERS", "1")
    cfg = harness.load_config(write_config(tmp_path))
    a = harness.run_matrix(cfg, tmp_path / "a")
    b = harness.run_matrix(cfg, tmp_path / "b")
    for ta, tb in zip(a, b):
        assert ta.run_id == tb.run_id
        for ra, rb in zip(ta.records, tb.records):
            assert (ra.train_loss, ra.stop_metric, ra.test_metric, ra.alpha,
                    ra.beta, ra.grad_norm) == (rb.train_loss, rb.stop_metric,
                                               rb.test_metric, rb.alpha, rb.beta,
                                               rb.grad_norm)


def _trace(problem, method, seed, stops, threshold=0.5, status="converged"):
    records = [IterRecord(i, float(i), s, s, s, 0.1, 0.0, 1.0)
               for i, s in enumerate(stops)]
    return RunTrace(f"{problem}__{method}__seed{seed}", problem, method, seed,
                    threshold, records, status)


def test_summarize_single_seed_median_equals_trace():
    tr = _trace("p", "ngd", 0, [1.0, 0.7, 0.4])
    summary = harness.summarize([tr])
    assert np.allclose(summary.curves[("p", "ngd")], [1.0, 0.7, 0.4])


def test_summarize_median_iters_example():
    traces = [_trace("p", "ngd", s, [1.0] * n + [0.4])
              for s, n in ((0, 10), (1, 20), (2, 30))]
    summary = harness.summarize(traces)
    assert summary.median_iters("p", "ngd") == 20.0
    assert summary.success_count("p", "ngd") == 3


def test_summarize_pads_with_terminal_value():
    short = _trace("p", "ngd", 0, [1.0, 0.3])           # converged at iter 1
    long = _trace("p", "ngd", 1, [1.0, 0.8, 0.8, 0.6], status="max_iters")
    summary = harness.summarize([short, long])
    med = summary.curves[("p", "ngd")]
    # beyond its end, the short trace contributes its terminal 0.3
    assert np.allclose(med, [1.0, 0.55, 0.55, 0.45])


def test_write_summary_files(tmp_path):
    traces = [_trace("p", "ngd", 0, [1.0, 0.4]), _trace("p", "nhb", 0, [1.0, 0.9, 0.4])]
    paths = harness.write_summary(harness.summarize(traces), tmp_path)
    for path in paths:
        assert os.path.exists(path)
    runs = (tmp_path / "summary_runs.csv").read_text().splitlines()
    assert runs[0].startswith("problem,method,seed,status")
    assert len(runs) == 3


def test_cli_list_methods(capsys):
    assert cli.main(["list-methods"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 20
    assert "ngd" in out and "gn-nn2-fd" in out


def test_cli_run_and_summarize(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("NATMO_WORKERS", "1")
    cfg_path = write_config(tmp_path, methods=["ngd"], seeds=[0])
    out_dir = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg_path), "--out", str(out_dir)]) == 0
    assert cli.main(["summarize", "--in", str(out_dir)]) == 0
    assert (out_dir / "summary_curves.csv").exists()
    assert (out_dir / "summary_methods.csv").exists()


def test_cli_run_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "missing.json"),
                     "--out", str(tmp_path / "o")]) == 2


def test_cli_summarize_empty_dir(tmp_path):
    os.makedirs(tmp_path / "empty", exist_ok=True)
    assert cli.main(["summarize", "--in", str(tmp_path / "empty")]) == 2


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("NATMO_WORKERS", "3")
    assert harness.worker_count() == 3
    monkeypatch.delenv("NATMO_WORKERS")
    assert harness.worker_count() >= 1
