"""Experiment harness: config parsing, run matrices and summaries.

A matrix is described by a JSON config::

    {
      "problem": "mackey_glass",
      "problem_seed": 0,                  # optional dataset seed
      "methods": ["ngd", "nhb"],
      "seeds": [0, 1, 2],
      "overrides": {
        "reg": "flooring", "eps_rel": 1e-10,
        "hb_beta": 0.5, "nesterov_scale": 1.0, "clip_cap": 0.1,
        "max_iters": 2000, "stop_threshold": 2e-5,
        "metric_W": "l2", "metric_X": "l2"
      }
    }

Runs fan out over (method x seed) on a bounded process pool
(``NATMO_WORKERS`` overrides the size; 1 runs inline).  Each run streams its
own trace file, so completed runs survive an interruption; a plain-text
manifest records the generator parameters and per-run outcomes.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import benchmarks, optimizers
from .natgrad import RegPolicy
from .traces import RunTrace, TraceWriter, read_trace

__all__ = [
    "MatrixConfig",
    "load_config",
    "run_matrix",
    "Summary",
    "summarize",
    "write_summary",
    "load_traces",
    "worker_count",
]

_OVERRIDE_KEYS = {
    "reg", "eps_rel", "hb_beta", "nesterov_scale", "clip_cap",
    "max_iters", "stop_threshold", "metric_W", "metric_X",
}


@dataclass(frozen=True)
class MatrixConfig:
    problem: str
    methods: Tuple[str, ...]
    seeds: Tuple[int, ...]
    overrides: dict
    problem_seed: int = 0

    def opt_config(self, method: str) -> optimizers.OptConfig:
        ov = self.overrides
        kwargs = {}
        if "reg" in ov or "eps_rel" in ov:
            kind = ov.get("reg", "flooring")
            eps = float(ov.get("eps_rel", 1e-10))
            kwargs["reg"] = RegPolicy(kind, eps)
        for src, dst in (("hb_beta", "hb_beta"), ("nesterov_scale", "nesterov_scale"),
                         ("clip_cap", "clip_cap"), ("stop_threshold", "stop_threshold")):
            if src in ov:
                kwargs[dst] = float(ov[src])
        if "max_iters" in ov:
            kwargs["max_iters"] = int(ov["max_iters"])
        if "metric_W" in ov:
            kwargs["metric_w"] = str(ov["metric_W"]).lower()
        if "metric_X" in ov:
            kwargs["metric_x"] = str(ov["metric_X"]).lower()
        return optimizers.config_for_method(method, **kwargs)


def _parse_config(data: dict) -> MatrixConfig:
    try:
        problem = data["problem"]
        methods = tuple(data["methods"])
        seeds = tuple(int(s) for s in data["seeds"])
    except KeyError as exc:
        raise ValueError(f"config is missing required key {exc.args[0]!r}") from None
    if problem not in benchmarks.PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}")
    known = set(optimizers.all_methods())
    for m in methods:
        if m not in known:
            raise ValueError(f"unknown method {m!r}")
    if not methods or not seeds:
        raise ValueError("config needs at least one method and one seed")
    overrides = dict(data.get("overrides", {}))
    unknown = set(overrides) - _OVERRIDE_KEYS
    if unknown:
        raise ValueError(f"unknown override keys {sorted(unknown)}")
    return MatrixConfig(problem, methods, seeds, overrides, int(data.get("problem_seed", 0)))


def load_config(path) -> MatrixConfig:
    with open(path) as fh:
        return _parse_config(json.load(fh))


def worker_count() -> int:
    env = os.environ.get("NATMO_WORKERS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _trace_path(out_dir, problem, method, seed) -> str:
    return os.path.join(out_dir, f"{problem}__{method}__seed{seed}.csv")


def _execute_run(cfg: MatrixConfig, method: str, seed: int, out_dir: str):
    problem = benchmarks.build_problem(cfg.problem, cfg.problem_seed)
    opt_cfg = cfg.opt_config(method)
    threshold = (opt_cfg.stop_threshold if opt_cfg.stop_threshold is not None
                 else problem.stop_threshold)
    path = _trace_path(out_dir, cfg.problem, method, seed)
    writer = TraceWriter(path, f"{cfg.problem}__{method}__seed{seed}",
                         cfg.problem, method, seed, threshold)
    try:
        trace = optimizers.run(problem, opt_cfg, seed, writer=writer)
        writer.finalize(trace.status)
    except BaseException:
        writer.abort()
        raise
    return method, seed, trace.status, path


def run_matrix(cfg: MatrixConfig, out_dir) -> List[RunTrace]:
    """Execute the (method x seed) matrix; returns the completed traces.

    Deterministic schedule; a diverged run is recorded like any other.
    Trace files are written incrementally per run and the manifest line for
    each run is appended (and flushed) as it completes.
    """
    os.makedirs(out_dir, exist_ok=True)
    problem = benchmarks.build_problem(cfg.problem, cfg.problem_seed)
    manifest_path = os.path.join(out_dir, "manifest.txt")
    with open(manifest_path, "w") as fh:
        for key, val in problem.manifest.items():
            fh.write(f"{key}={val}\n")
        fh.write(f"methods={','.join(cfg.methods)}\n")
        fh.write(f"seeds={','.join(str(s) for s in cfg.seeds)}\n")
        for key, val in sorted(cfg.overrides.items()):
            fh.write(f"override.{key}={val}\n")
        fh.flush()

    jobs = [(method, seed) for method in cfg.methods for seed in cfg.seeds]
    results = []
    workers = min(worker_count(), len(jobs))
    if workers <= 1:
        for method, seed in jobs:
            results.append(_execute_run(cfg, method, seed, str(out_dir)))
            _append_manifest(manifest_path, results[-1])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_execute_run, cfg, method, seed, str(out_dir)): (method, seed)
                       for method, seed in jobs}
            for fut in as_completed(futures):
                results.append(fut.result())
                _append_manifest(manifest_path, results[-1])
    return [read_trace(path) for _, _, _, path in sorted(results, key=lambda r: (r[0], r[1]))]


def _append_manifest(manifest_path, result):
    method, seed, status, _ = result
    with open(manifest_path, "a") as fh:
        fh.write(f"run.{method}.seed{seed}={status}\n")
        fh.flush()


def load_traces(in_dir) -> List[RunTrace]:
    traces = []
    for name in sorted(os.listdir(in_dir)):
        if name.endswith(".csv") and not name.startswith("summary_"):
            traces.append(read_trace(os.path.join(in_dir, name)))
    return traces


@dataclass
class Summary:
    """Per (problem, method): padded per-iteration medians of the stop
    metric, iterations-to-threshold per seed, and success counts."""

    curves: Dict[Tuple[str, str], np.ndarray]
    runs: Dict[Tuple[str, str, int], dict]

    def iters_to_threshold(self, problem, method) -> List[Optional[int]]:
        return [info["iters_to_threshold"]
                for (p, m, _), info in sorted(self.runs.items())
                if p == problem and m == method]

    def median_iters(self, problem, method) -> Optional[float]:
        """Median iterations-to-threshold over the converging seeds."""
        vals = [v for v in self.iters_to_threshold(problem, method) if v is not None]
        return float(np.median(vals)) if vals else None

    def success_count(self, problem, method) -> int:
        return sum(v is not None for v in self.iters_to_threshold(problem, method))


def summarize(traces: List[RunTrace]) -> Summary:
    groups: Dict[Tuple[str, str], List[RunTrace]] = {}
    runs = {}
    for tr in traces:
        groups.setdefault((tr.problem, tr.method), []).append(tr)
        final = tr.final
        runs[(tr.problem, tr.method, tr.seed)] = {
            "status": tr.status,
            "iters_to_threshold": tr.iters_to_threshold(),
            "final_iter": final.iter,
            "final_stop_metric": final.stop_metric,
            "final_test_metric": final.test_metric,
            "final_time_ms": final.time_ms,
        }
    curves = {}
    for key, trs in groups.items():
        n_iters = max(tr.final.iter for tr in trs) + 1
        padded = np.empty((len(trs), n_iters))
        for i, tr in enumerate(trs):
            vals = np.array([rec.stop_metric for rec in tr.records])
            padded[i, : len(vals)] = vals
            padded[i, len(vals):] = vals[-1]  # terminal value carried forward
        curves[key] = np.median(padded, axis=0)
    return Summary(curves, runs)


def write_summary(summary: Summary, out_dir):
    """Emit plot-ready CSVs: median curves, per-run outcomes, per-method stats."""
    curves_path = os.path.join(out_dir, "summary_curves.csv")
    with open(curves_path, "w") as fh:
        fh.write("problem,method,iter,median_stop_metric\n")
        for (problem, method), med in sorted(summary.curves.items()):
            for it, val in enumerate(med):
                fh.write(f"{problem},{method},{it},{val:.17g}\n")

    runs_path = os.path.join(out_dir, "summary_runs.csv")
    with open(runs_path, "w") as fh:
        fh.write("problem,method,seed,status,iters_to_threshold,"
                 "final_iter,final_stop_metric,final_test_metric,final_time_ms\n")
        for (problem, method, seed), info in sorted(summary.runs.items()):
            itt = "" if info["iters_to_threshold"] is None else info["iters_to_threshold"]
            fh.write(f"{problem},{method},{seed},{info['status']},{itt},"
                     f"{info['final_iter']},{info['final_stop_metric']:.17g},"
                     f"{info['final_test_metric']:.17g},{info['final_time_ms']:.17g}\n")

    methods_path = os.path.join(out_dir, "summary_methods.csv")
    keys = sorted({(p, m) for (p, m, _) in summary.runs})
    with open(methods_path, "w") as fh:
        fh.write("problem,method,n_seeds,n_converged,median_iters,q25_iters,q75_iters\n")
        for problem, method in keys:
            vals = [v for v in summary.iters_to_threshold(problem, method) if v is not None]
            n = len(summary.iters_to_threshold(problem, method))
            med = q25 = q75 = ""
            if vals:
                med = f"{np.median(vals):.17g}"
                q25 = f"{np.percentile(vals, 25):.17g}"
                q75 = f"{np.percentile(vals, 75):.17g}"
            fh.write(f"{problem},{method},{n},{len(vals)},{med},{q25},{q75}\n")
    return curves_path, runs_path, methods_path
