"""Batch diagnostics over one or many series and the files they produce."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from html import escape
from pathlib import Path

import numpy as np

from . import __version__
from .distance import DistanceMatrix, compare_matrices, pairwise_matrix
from .profiles import (
    DEFAULT_L_MIN,
    ROW_INTERPRETATION,
    BpsReport,
    ProfileDistanceWeights,
    bps,
    profile_distance,
    profiles_from_matrix,
)
from .stream import (
    DEFAULT_GAP_FILL_LIMIT,
    DEFAULT_TIME_COLUMN,
    ChannelSelector,
    CsvSchema,
    Stream,
    load_csv,
    load_manifest,
    scale_by_max,
)
from .taskify import PerturbationSpec, fixed_length, shift, steps_per_day

log = logging.getLogger(__name__)

THREADS_ENV = "TASKDIAG_THREADS"
STATS = ("plasticity", "stability", "bps")


@dataclass
class RunConfig:
    input: str
    channel: str | None = None
    all_channels: bool = False
    windows: list[int] = field(default_factory=lambda: [9, 30, 44])
    shift_days: int = 0
    delta_days: int = 1
    delta_steps: int | None = None
    n_perturb: int = 64
    seed: int = 0
    alpha: float = 0.5
    beta: float = 0.5
    l_min: int = DEFAULT_L_MIN
    output_dir: str = "out"
    emit_svg: bool = True
    max_scale: bool = False
    time_column: str = DEFAULT_TIME_COLUMN
    gap_fill_limit: int = DEFAULT_GAP_FILL_LIMIT
    min_task_len: int | None = None

    def __post_init__(self):
        if not self.windows:
            raise ValueError("at least one window length is required")
        self.windows = [int(w) for w in self.windows]
        if len(set(self.windows)) != len(self.windows):
            raise ValueError(f"duplicate window lengths: {self.windows}")
        if self.channel and self.all_channels:
            raise ValueError("choose either a channel or all channels, not both")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def selector(self) -> ChannelSelector | None:
        if self.all_channels:
            return ChannelSelector.all()
        if self.channel:
            return ChannelSelector.single(self.channel)
        return None

    def weights(self) -> ProfileDistanceWeights:
        return ProfileDistanceWeights(self.alpha, self.beta)


@dataclass
class SeriesResult:
    series_id: str
    data: dict
    matrices: dict[str, DistanceMatrix]
    comparison: dict | None


@dataclass
class CorpusReport:
    config: dict
    config_hash: str
    series: list[dict]
    failures: list[dict]
    aggregate: dict
    version: str = __version__

    def to_dict(self) -> dict:
        return {
            "tool": "taskdiag",
            "version": self.version,
            "config_hash": self.config_hash,
            "config": self.config,
            "metadata": {
                "bps_rows": ROW_INTERPRETATION,
                "per_series_std": "population std over sampled perturbations",
                "aggregate": "mean and sample std (n-1) across series of the per-series means",
                "aggregation_order": "per series first, then across series",
            },
            "aggregate": self.aggregate,
            "series": self.series,
            "failures": self.failures,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, ensure_ascii=False, allow_nan=False) + "\n"

    @property
    def ok(self) -> bool:
        return not self.failures


def _mean_std(values) -> dict:
    x = np.asarray(values, dtype=float)
    # centring on the first value keeps identical inputs exact (std 0, mean x[0])
    d = x - x[0]
    return {
        "mean": float(x[0] + np.mean(d)),
        "std": float(np.std(d, ddof=1)) if x.size > 1 else 0.0,
        "n": int(x.size),
    }


def aggregate_series(series: list[dict]) -> dict:
    """Mean and std across series of every per-series statistic."""
    out = {"bps": {}, "d_prof": {}, "matrix_mse": {}}
    if not series:
        return out
    for label in series[0]["bps"]:
        out["bps"][label] = {
            stat: _mean_std([s["bps"][label][stat]["mean"] for s in series]) for stat in STATS
        }
    for key in ("d_prof", "matrix_mse"):
        value = "d_prof" if key == "d_prof" else "mse"
        pairs = [f"{p['a']}|{p['b']}" for p in series[0][key]]
        for i, name in enumerate(pairs):
            out[key][name] = _mean_std([s[key][i][value] for s in series])
    return out


def _compare(stored, fresh, tol, where=""):
    if isinstance(fresh, dict):
        if set(stored) != set(fresh):
            raise ValueError(f"aggregate keys differ at {where or '/'}")
        for k in fresh:
            _compare(stored[k], fresh[k], tol, f"{where}/{k}")
    elif abs(stored - fresh) > tol:
        raise ValueError(f"aggregate {where}: stored {stored}, recomputed {fresh}")


def verify_corpus_report(d: dict, tol: float = 1e-12) -> None:
    """Raise ``ValueError`` if stored aggregates disagree with the per-series values."""
    _compare(d["aggregate"], aggregate_series(d["series"]), tol)
    for s in d["series"]:
        for rep in s["bps"].values():
            BpsReport.from_dict(rep).check_consistency()


def load_corpus_report(path) -> dict:
    d = json.loads(Path(path).read_text())
    verify_corpus_report(d)
    return d


def build_taskifications(stream: Stream, config: RunConfig) -> tuple[dict, dict]:
    """Base windows and, when a shift is configured, their shifted variants."""
    base = {}
    for w in config.windows:
        tk = fixed_length(stream, w, config.min_task_len)
        base[tk.label] = tk
    shifted = {}
    if config.shift_days:
        for tk in base.values():
            s = shift(tk, config.shift_days, stream, config.min_task_len)
            shifted[s.label] = s
    return base, shifted


def _pairwise_dprof(labels, profiles, weights) -> list[dict]:
    out = []
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            d_pl, d_st, d = profile_distance(profiles[a], profiles[b], weights)
            out.append({"a": a, "b": b, "d_pl": d_pl, "d_st": d_st, "d_prof": d})
    return out


def analyze_stream(stream: Stream, config: RunConfig) -> SeriesResult:
    if config.max_scale:
        stream = scale_by_max(stream)
    selector = config.selector()
    weights = config.weights()
    delta = config.delta_steps or config.delta_days * steps_per_day(stream)
    spec = PerturbationSpec(delta, config.n_perturb, config.seed)
    base, shifted = build_taskifications(stream, config)
    all_tks = {**base, **shifted}

    matrices, profiles, reports = {}, {}, {}
    for label, tk in all_tks.items():
        m = pairwise_matrix(stream, tk, selector)
        matrices[label] = m
        profiles[label] = profiles_from_matrix(m.entries, config.l_min)
        reports[label] = bps(
            stream, tk, spec, weights, selector, config.l_min, config.min_task_len
        )

    d_prof = _pairwise_dprof(list(base), profiles, weights)
    d_prof += _pairwise_dprof(list(shifted), profiles, weights)
    comparison = None
    mse = []
    if len(base) > 1:
        comparison = compare_matrices({k: matrices[k] for k in base})
        mse = [{"a": p["a"], "b": p["b"], "mse": p["mse"]} for p in comparison["pairs"]]

    data = {
        "series_id": stream.series_id,
        "t_steps": stream.t_steps,
        "step_duration": stream.step_duration,
        "delta_steps": delta,
        "taskifications": {k: tk.to_dict() for k, tk in all_tks.items()},
        "profiles": {
            k: {"plasticity": p[0].values.tolist(), "stability": p[1].values.tolist()}
            for k, p in profiles.items()
        },
        "bps": {k: r.to_dict() for k, r in reports.items()},
        "d_prof": d_prof,
        "matrix_mse": mse,
        "matrix_target_dim": comparison["target_dim"] if comparison else None,
    }
    return SeriesResult(stream.series_id, data, matrices, comparison)


def _inputs(config: RunConfig) -> list[dict]:
    path = Path(config.input)
    if path.suffix.lower() == ".json":
        return load_manifest(path)
    return [{"series_id": path.stem, "path": path}]


def _process(entry: dict, config: RunConfig):
    schema = CsvSchema(
        time_column=config.time_column,
        gap_fill_limit=config.gap_fill_limit,
        series_id=entry["series_id"],
    )
    try:
        stream = load_csv(entry["path"], schema)
        return analyze_stream(stream, config)
    except Exception as exc:  # noqa: BLE001 - one bad series must not stop the batch
        log.warning("series %s failed: %s", entry["series_id"], exc)
        return {"series_id": entry["series_id"], "error": f"{type(exc).__name__}: {exc}"}


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
    return min(4, os.cpu_count() or 1)


def run_diagnostics(config: RunConfig, write: bool = True, workers: int | None = None) -> CorpusReport:
    """Analyze every input series and (optionally) write the output tree.

    Series run on a bounded thread pool; results are gathered in input order
    and written from the calling thread, so output never depends on the
    number of workers.
    """
    entries = _inputs(config)
    workers = workers or worker_count()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda e: _process(e, config), entries))

    good = [r for r in results if isinstance(r, SeriesResult)]
    failures = [r for r in results if not isinstance(r, SeriesResult)]
    series = [r.data for r in good]
    report = CorpusReport(
        config=config.to_dict(),
        config_hash=config.config_hash(),
        series=series,
        failures=failures,
        aggregate=aggregate_series(series),
    )
    if write:
        write_outputs(report, good, config)
    return report


def _safe_name(text: str) -> str:
    text = text.replace("+Δ", "_shift").replace("Δ", "d")
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text) or "series"


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def write_outputs(report: CorpusReport, results: list[SeriesResult], config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for res in results:
        sdir = out / _safe_name(res.series_id)
        sdir.mkdir(parents=True, exist_ok=True)
        for label, m in res.matrices.items():
            m.to_csv(sdir / f"matrix_{_safe_name(label)}.csv")
        (sdir / "profiles.json").write_text(json.dumps(res.data["profiles"], indent=1) + "\n")
        (sdir / "bps.json").write_text(json.dumps(res.data["bps"], indent=1, ensure_ascii=False) + "\n")
        if config.emit_svg:
            for label, m in res.matrices.items():
                emit_heatmap(m, sdir / f"heatmap_{_safe_name(label)}.svg", title=f"{res.series_id} {label}")
            if res.comparison:
                emit_comparison(res.comparison, sdir / "comparison.svg")

    with (out / "bps_table.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series_id", "taskification", "statistic", "mean", "std"])
        for s in report.series:
            for label, rep in s["bps"].items():
                for stat in STATS:
                    w.writerow([s["series_id"], label, stat, _fmt(rep[stat]["mean"]), _fmt(rep[stat]["std"])])
    with (out / "dprof_table.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series_id", "a", "b", "d_pl", "d_st", "d_prof"])
        for s in report.series:
            for p in s["d_prof"]:
                w.writerow([s["series_id"], p["a"], p["b"], _fmt(p["d_pl"]), _fmt(p["d_st"]), _fmt(p["d_prof"])])
    (out / "summary.txt").write_text(format_aggregate(report.aggregate) + "\n")
    path = out / "corpus_report.json"
    path.write_text(report.to_json())
    return path


def format_aggregate(agg: dict) -> str:
    """Corpus-level tables: Plasticity/Stability/BPS rows and pairwise D_prof."""
    lines = []
    labels = list(agg["bps"])
    if labels:
        cells = {
            stat: [f"{_fmt(agg['bps'][l][stat]['mean'])} ± {_fmt(agg['bps'][l][stat]['std'])}" for l in labels]
            for stat in STATS
        }
        widths = [max(len(l), *(len(cells[s][i]) for s in STATS)) for i, l in enumerate(labels)]
        lines.append(" " * 12 + "  ".join(l.rjust(w) for l, w in zip(labels, widths)))
        for stat, name in zip(STATS, ("Plasticity", "Stability", "BPS")):
            lines.append(name.ljust(12) + "  ".join(c.rjust(w) for c, w in zip(cells[stat], widths)))
    if agg["d_prof"]:
        lines.append("")
        lines.append("D_prof")
        for name, s in agg["d_prof"].items():
            lines.append(f"  {name.replace('|', ' vs '):<28} {_fmt(s['mean'])} ± {_fmt(s['std'])}")
    if agg["matrix_mse"]:
        lines.append("")
        lines.append("Upsampled matrix MSE")
        for name, s in agg["matrix_mse"].items():
            lines.append(f"  {name.replace('|', ' vs '):<28} {_fmt(s['mean'])} ± {_fmt(s['std'])}")
    return "\n".join(lines)


# --- SVG heatmaps -----------------------------------------------------------

LOW_COLOR = (247, 251, 255)
HIGH_COLOR = (8, 48, 107)
CELL = 16


def ramp_color(value: float, vmin: float, vmax: float) -> str:
    """Linear ramp from LOW_COLOR (vmin) to HIGH_COLOR (vmax) as ``#rrggbb``."""
    t = 0.0 if vmax <= vmin else (value - vmin) / (vmax - vmin)
    t = min(max(t, 0.0), 1.0)
    rgb = (round(lo + (hi - lo) * t) for lo, hi in zip(LOW_COLOR, HIGH_COLOR))
    return "#" + "".join(f"{c:02x}" for c in rgb)


def _heatmap_group(entries: np.ndarray, x0: int, y0: int, title: str, cell: int = CELL) -> tuple[list[str], int, int]:
    n = entries.shape[0]
    vmin, vmax = float(entries.min()), float(entries.max())
    parts = [f'<g transform="translate({x0},{y0})">']
    parts.append(f'<text x="0" y="12" font-size="12" font-family="sans-serif">{escape(title)}</text>')
    top = 20
    for i in range(n):
        for j in range(n):
            color = ramp_color(float(entries[i, j]), vmin, vmax)
            parts.append(
                f'<rect x="{j * cell}" y="{top + i * cell}" width="{cell}" height="{cell}" '
                f'fill="{color}" data-i="{i}" data-j="{j}"/>'
            )
    y_note = top + n * cell + 14
    parts.append(
        f'<text x="0" y="{y_note}" font-size="11" font-family="sans-serif">'
        f"min {_fmt(vmin)}  max {_fmt(vmax)}</text>"
    )
    parts.append("</g>")
    return parts, max(n * cell, 160), y_note + 6


def _svg(parts: list[str], width: int, height: int) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )
    return "\n".join([head, *parts, "</svg>"]) + "\n"


def heatmap_svg(m, title: str = "") -> str:
    entries = m.entries if isinstance(m, DistanceMatrix) else np.asarray(m, dtype=float)
    parts, w, h = _heatmap_group(entries, 10, 10, title)
    return _svg(parts, w + 20, h + 20)


def emit_heatmap(m, path, title: str = "") -> Path:
    """Write a standalone SVG heatmap; identical inputs give identical bytes."""
    path = Path(path)
    path.write_text(heatmap_svg(m, title))
    return path


def emit_comparison(comparison: dict, path) -> Path:
    """Absolute-difference heatmaps of every upsampled matrix pair, titled with their MSE."""
    parts, x, height = [], 10, 0
    for p in comparison["pairs"]:
        g, w, h = _heatmap_group(p["abs_diff"], x, 10, f"|{p['a']} - {p['b']}|  MSE {_fmt(p['mse'])}")
        parts += g
        x += w + 30
        height = max(height, h)
    path = Path(path)
    path.write_text(_svg(parts, x, height + 20))
    return path
