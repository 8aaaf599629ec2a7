"""Monte-Carlo driver: layouts x fading draws, aggregation and result files."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from cfsim.assignment import assign
from cfsim.channel import draw_channel, layout_supports
from cfsim.config import ConfigError, Estimator, Scheme, SimConfig
from cfsim.estimation import estimate
from cfsim.layout import generate_layout
from cfsim.receiver import evaluate_fading, rate_and_se
from cfsim.rng import layout_stream, substream

log = logging.getLogger(__name__)

FULL_LAYOUTS = 40
FULL_FADINGS = 30

CSV_COLUMNS = [
    "scheme", "estimator", "K", "L", "M", "tau_p", "layouts", "fadings", "seed",
    "sum_se_mean", "sum_se_stderr", "mean_cluster_size", "outage_prob", "wall_time_s",
]


@dataclass
class RunResult:
    scheme: str
    estimator: str
    K: int
    L: int
    M: int
    tau_p: int
    layout_index: int
    sum_se: float
    per_ue_se: list = field(repr=False)
    mean_cluster_size: float
    outage_prob: float
    wall_time: float = 0.0


@dataclass
class Summary:
    scheme: str
    estimator: str
    K: int
    L: int
    M: int
    tau_p: int
    layouts: int
    fadings: int
    seed: int
    sum_se_mean: float
    sum_se_stderr: float
    mean_cluster_size: float
    outage_prob: float
    wall_time_s: float

    def as_row(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}


def build_layout(config: SimConfig, layout_index: int):
    layout = generate_layout(config, layout_stream(config.seed, layout_index, "layout"))
    supports = layout_supports(layout, config.angular_spread, config.antennas_per_ru)
    return layout, supports


def build_assignment(config: SimConfig, layout, supports, layout_index: int):
    return assign(layout.lsfc, supports, config, layout_stream(config.seed, layout_index, "assignment"))


def run_layout(config: SimConfig, layout_index: int) -> RunResult:
    start = time.perf_counter()
    layout, supports = build_layout(config, layout_index)
    assignment = build_assignment(config, layout, supports, layout_index)
    snr = config.snr
    sinr = np.zeros((config.num_fadings, config.num_ues))
    for f in range(config.num_fadings):
        channel = draw_channel(layout.lsfc, supports, substream(config.seed, layout_index, f, "channel"))
        est = estimate(config.estimator, channel, assignment, snr, config.pilot_dim,
                       substream(config.seed, layout_index, f, "noise"))
        sinr[f] = evaluate_fading(channel, est, assignment, layout.lsfc, snr)
    _, se = rate_and_se(sinr, config.pilot_dim, config.rb_dim, assignment.outage)
    return RunResult(
        scheme=config.scheme.value,
        estimator=config.estimator.value,
        K=config.num_ues,
        L=config.num_rus,
        M=config.antennas_per_ru,
        tau_p=config.pilot_dim,
        layout_index=layout_index,
        sum_se=float(np.sum(se)),
        per_ue_se=se.tolist(),
        mean_cluster_size=assignment.mean_cluster_size(),
        outage_prob=assignment.outage_fraction(),
        wall_time=time.perf_counter() - start,
    )


def worker_count(requested=None) -> int:
    cap = os.environ.get("CFSIM_THREADS")
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ConfigError(f"CFSIM_THREADS: expected an integer, got {cap!r}") from None
    return max(1, int(n))


def _run_cell(args):
    config, index = args
    return run_layout(config, index)


def run_cells(cells, workers=None) -> list:
    """Run ``(config, layout_index)`` cells, returning results in cell order."""
    cells = list(cells)
    n = min(worker_count(workers), len(cells)) if cells else 1
    if n <= 1:
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_run_cell, cells))


def run_scenario(config: SimConfig, workers=None) -> list:
    """One :class:`RunResult` per layout, ordered by layout index."""
    log.info("running %s/%s K=%d L=%d M=%d tau_p=%d (%d layouts x %d fadings)",
             config.scheme.value, config.estimator.value, config.num_ues, config.num_rus,
             config.antennas_per_ru, config.pilot_dim, config.num_layouts, config.num_fadings)
    return run_cells([(config, i) for i in range(config.num_layouts)], workers)


def summarize(results, config: SimConfig | None = None) -> list:
    """Aggregate per-layout results into one :class:`Summary` per configuration."""
    groups: dict = {}
    for r in results:
        key = (r.scheme, r.estimator, r.K, r.L, r.M, r.tau_p)
        groups.setdefault(key, []).append(r)
    out = []
    for key, rs in groups.items():
        rs = sorted(rs, key=lambda r: r.layout_index)
        sums = np.array([r.sum_se for r in rs])
        n = len(rs)
        stderr = float(np.std(sums, ddof=1) / math.sqrt(n)) if n >= 2 else math.nan
        out.append(Summary(
            *key,
            layouts=n,
            fadings=config.num_fadings if config else 0,
            seed=config.seed if config else 0,
            sum_se_mean=float(np.mean(sums)),
            sum_se_stderr=stderr,
            mean_cluster_size=float(np.mean([r.mean_cluster_size for r in rs])),
            outage_prob=float(np.mean([r.outage_prob for r in rs])),
            wall_time_s=float(sum(r.wall_time for r in rs)),
        ))
    return out


def _axis_configs(base: SimConfig, axis: str, value):
    axis = axis.lower()
    if axis in ("k", "num_ues"):
        return base.replace(num_ues=int(value))
    if axis in ("tau_p", "pilot_dim"):
        return base.replace(pilot_dim=int(value))
    if axis in ("lm", "l,m", "rus_antennas"):
        if isinstance(value, str):
            l, m = value.lower().replace(",", "x").split("x")
        else:
            l, m = value
        return base.replace(num_rus=int(l), antennas_per_ru=int(m))
    if axis == "scheme":
        return base.replace(scheme=Scheme.parse(value))
    if axis == "estimator":
        return base.replace(estimator=Estimator.parse(value))
    raise ConfigError(f"unknown sweep axis {axis!r} (choose from K, tau_p, LM, scheme, estimator)")


def sweep(base: SimConfig, axis: str, values, schemes=None, estimators=None, workers=None) -> list:
    """Cross product of axis values x schemes x estimators; one Summary per combination."""
    schemes = [Scheme.parse(s) for s in schemes] if schemes else [base.scheme]
    estimators = [Estimator.parse(e) for e in estimators] if estimators else [base.estimator]
    if axis.lower() == "scheme":
        schemes = [None]
    elif axis.lower() == "estimator":
        estimators = [None]
    configs = []
    for value in values:
        cfg = _axis_configs(base, axis, value)
        for s in schemes:
            for e in estimators:
                changes = {}
                if s is not None:
                    changes["scheme"] = s
                if e is not None:
                    changes["estimator"] = e
                configs.append(cfg.replace(**changes))
    cells = [(c, i) for c in configs for i in range(c.num_layouts)]
    results = run_cells(cells, workers)
    rows, pos = [], 0
    for c in configs:
        chunk = results[pos:pos + c.num_layouts]
        pos += c.num_layouts
        rows.extend(summarize(chunk, c))
    return rows


def _fmt(value):
    if isinstance(value, float):
        return "" if math.isnan(value) else f"{value:.6g}"
    return value


def _json_value(value):
    if isinstance(value, float):
        return None if math.isnan(value) else float(f"{value:.6g}")
    return value


def render(rows, fmt: str, timing: bool = True) -> str:
    """Format summaries as CSV or JSON text. Floats carry 6 significant digits.

    With ``timing=False`` the wall-time column is written as 0 so that the
    output depends only on (config, seed).
    """
    rows = list(rows)
    if not rows:
        raise ValueError("no results to emit")
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r} (csv or json)")
    records = []
    for r in rows:
        rec = r.as_row()
        if not timing:
            rec["wall_time_s"] = 0.0
        records.append(rec)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows({k: _fmt(v) for k, v in rec.items()} for rec in records)
        return buf.getvalue()
    data = [{k: _json_value(v) for k, v in rec.items()} for rec in records]
    return json.dumps(data, indent=2) + "\n"


def emit(rows, fmt: str, path, timing: bool = True) -> Path:
    """Write :func:`render` output to ``path``; nothing is created on error."""
    text = render(rows, fmt, timing)
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    return path


_FLOAT_COLS = {"sum_se_mean", "sum_se_stderr", "mean_cluster_size", "outage_prob", "wall_time_s"}
_INT_COLS = {"K", "L", "M", "tau_p", "layouts", "fadings", "seed"}


def read_results(path) -> list:
    """Parse a file written by :func:`emit` back into dictionaries."""
    path = Path(path)
    if path.suffix == ".json":
        rows = json.loads(path.read_text())
    else:
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        rec = {}
        for k, v in row.items():
            if k in _INT_COLS:
                rec[k] = int(v)
            elif k in _FLOAT_COLS:
                rec[k] = math.nan if v in ("", None) else float(v)
            else:
                rec[k] = v
        out.append(rec)
    return out
