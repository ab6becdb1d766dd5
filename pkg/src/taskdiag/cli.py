"""Command-line interface: ``taskdiag <subcommand> ...``.

Exit codes: 0 success, 1 configuration or I/O error, 2 partial failure (some
series of a batch report failed).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .cl_metrics import AVERAGE_FINAL, AVERAGE_LOWER_TRIANGLE, load_results_csv, std_table
from .distance import pairwise_matrix
from .errors import TaskDiagError
from .profiles import (
    ProfileDistanceWeights,
    bps,
    compute_profiles,
    format_bps_table,
    profile_distance,
)
from .report import RunConfig, emit_heatmap, format_aggregate, run_diagnostics
from .stream import ChannelSelector, CsvSchema, load_csv, scale_by_max, summarize, write_csv
from .synthetic import (
    KINDS,
    SynthSpec,
    fixture_config,
    fragile_fixture,
    generate,
    window_fixture,
)
from .taskify import PerturbationSpec, Taskification, fixed_length, shift, steps_per_day, validate

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2


def _g(x: float) -> str:
    return f"{x:.6g}"


def _dump(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=1, ensure_ascii=False)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _stream_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("csv", help="stream CSV file")
    p.add_argument("--time-column", default="id_time")
    p.add_argument("--gap-fill-limit", type=int, default=6)
    p.add_argument("--step-duration", type=float, default=None, help="seconds per step (default: inferred)")
    p.add_argument("--channel", default=None, help="target channel (required for multichannel streams)")
    p.add_argument("--all-channels", action="store_true", help="sliced W1 over all channels")
    p.add_argument("--max-scale", action="store_true", help="divide each channel by its max |value|")
    p.add_argument("--min-task-len", type=int, default=None, help="steps (default: one day)")


def _taskification_args(p: argparse.ArgumentParser, prefix: str = "", required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument(f"--{prefix}window-days", type=int, dest=f"{prefix.replace('-', '_')}window_days")
    g.add_argument(f"--{prefix}taskification", dest=f"{prefix.replace('-', '_')}taskification",
                   help="taskification JSON file")
    p.add_argument(f"--{prefix}shift-days", type=int, default=0, dest=f"{prefix.replace('-', '_')}shift_days")


def _weights_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--lmin", type=int, default=2)


def _load_stream(args):
    schema = CsvSchema(
        time_column=args.time_column,
        gap_fill_limit=args.gap_fill_limit,
        step_duration=getattr(args, "step_duration", None),
    )
    stream = load_csv(args.csv, schema)
    if getattr(args, "max_scale", False):
        stream = scale_by_max(stream)
    return stream


def _selector(args):
    if getattr(args, "all_channels", False):
        return ChannelSelector.all()
    if getattr(args, "channel", None):
        return ChannelSelector.single(args.channel)
    return None


def _taskification(args, stream, prefix: str = ""):
    key = prefix.replace("-", "_")
    window = getattr(args, f"{key}window_days")
    path = getattr(args, f"{key}taskification")
    if window is not None:
        tk = fixed_length(stream, window, args.min_task_len)
    else:
        tk = Taskification.from_dict(json.loads(Path(path).read_text()))
        validate(tk, stream, args.min_task_len)
    shift_days = getattr(args, f"{key}shift_days")
    if shift_days:
        tk = shift(tk, shift_days, stream, args.min_task_len)
    return tk


def cmd_inspect(args) -> int:
    summary = summarize(_load_stream(args))
    if args.json:
        _dump(summary.to_dict(), None)
        return EXIT_OK
    print(f"series    {summary.series_id}")
    print(f"t_steps   {summary.t_steps}")
    print(f"step      {_g(summary.step_duration)} s")
    print(f"duration  {_g(summary.duration)} s ({_g(summary.duration / 86400)} days)")
    print(f"{'channel':<20}{'min':>12}{'max':>12}{'mean':>12}{'std':>12}")
    for c in summary.channels:
        print(f"{c.name:<20}{_g(c.min):>12}{_g(c.max):>12}{_g(c.mean):>12}{_g(c.std):>12}")
    return EXIT_OK


def _parse_param(text: str):
    if "=" not in text:
        raise ValueError(f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def cmd_synth(args) -> int:
    out = Path(args.out)
    if args.fixture:
        if args.fixture == "window_sensitivity":
            stream, _ = window_fixture()
            write_csv(stream, out)
            return EXIT_OK
        stream, fragile, robust = fragile_fixture(args.fixture)
        write_csv(stream, out)
        cfg = fixture_config(args.fixture)
        for tk in (fragile, robust):
            tk_path = out.with_name(f"{out.stem}.{tk.label.split('-')[-1]}.json")
            tk_path.write_text(tk.to_json() + "\n")
        print(json.dumps({"perturbation": cfg["perturbation"], "version": cfg["version"]}))
        return EXIT_OK
    if not args.kind or not args.steps:
        raise ValueError("--kind and --steps are required unless --fixture is given")
    params = dict(_parse_param(p) for p in args.params)
    spec = SynthSpec(args.kind, args.steps, args.seed, params, args.step_duration)
    write_csv(generate(spec), out)
    return EXIT_OK


def cmd_taskify(args) -> int:
    stream = _load_stream(args)
    tk = _taskification(args, stream)
    _dump(tk.to_dict(), args.out)
    return EXIT_OK


def cmd_matrix(args) -> int:
    stream = _load_stream(args)
    tk = _taskification(args, stream)
    m = pairwise_matrix(stream, tk, _selector(args))
    if args.out:
        if args.out.endswith(".json"):
            _dump(m.to_dict(), args.out)
        else:
            m.to_csv(args.out)
    else:
        for row in m.entries:
            print(",".join(_g(v) for v in row))
    if args.svg:
        emit_heatmap(m, args.svg, title=tk.label)
    return EXIT_OK


def cmd_profiles(args) -> int:
    stream = _load_stream(args)
    tk = _taskification(args, stream)
    pl, st = compute_profiles(stream, tk, _selector(args), args.lmin)
    _dump({"taskification": tk.to_dict(), "plasticity": pl.to_dict(), "stability": st.to_dict()}, args.out)
    return EXIT_OK


def cmd_dprof(args) -> int:
    stream = _load_stream(args)
    a = _taskification(args, stream, "a-")
    b = _taskification(args, stream, "b-")
    sel = _selector(args)
    w = ProfileDistanceWeights(args.alpha, args.beta)
    d_pl, d_st, d = profile_distance(
        compute_profiles(stream, a, sel, args.lmin), compute_profiles(stream, b, sel, args.lmin), w
    )
    if args.json:
        _dump({"a": a.label, "b": b.label, "d_pl": d_pl, "d_st": d_st, "d_prof": d}, None)
    else:
        print(f"{a.label} vs {b.label}: D_pl {_g(d_pl)}  D_st {_g(d_st)}  D_prof {_g(d)}")
    return EXIT_OK


def _delta_steps(args, stream) -> int:
    if args.delta_steps is not None:
        return args.delta_steps
    return args.delta_days * steps_per_day(stream)


def cmd_bps(args) -> int:
    stream = _load_stream(args)
    tk = _taskification(args, stream)
    spec = PerturbationSpec(_delta_steps(args, stream), args.n_perturb, args.seed)
    rep = bps(stream, tk, spec, ProfileDistanceWeights(args.alpha, args.beta), _selector(args),
              args.lmin, args.min_task_len)
    print(format_bps_table({tk.label: rep}))
    if args.out:
        _dump(rep.to_dict(), args.out)
    return EXIT_OK


def cmd_clmetrics(args) -> int:
    results = {}
    for path in args.matrices:
        rm = load_results_csv(path)
        results[rm.name or path] = rm
    table = std_table(results, args.average)
    table["average_mode"] = args.average
    if args.out:
        _dump(table, args.out)
    names = list(table["per_matrix"])
    width = max(12, *(len(n) for n in names))
    print(f"{'matrix':<{width}}{'avg MSE':>12}{'BWT':>12}{'Forgetting':>12}")
    for n in names:
        p = table["per_matrix"][n]
        print(f"{n:<{width}}{_g(p['average_mse']):>12}{_g(p['bwt']):>12}{_g(p['forgetting']):>12}")
    if "std" in table:
        s = table["std"]
        print(f"{'std':<{width}}{_g(s['average_mse']):>12}{_g(s['bwt']):>12}{_g(s['forgetting']):>12}")
    return EXIT_OK


def cmd_report(args) -> int:
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
    else:
        cfg = {}
    overrides = {
        "input": args.input,
        "channel": args.channel,
        "windows": args.window_days,
        "shift_days": args.shift_days,
        "delta_days": args.delta_days,
        "delta_steps": args.delta_steps,
        "n_perturb": args.n_perturb,
        "seed": args.seed,
        "alpha": args.alpha,
        "beta": args.beta,
        "l_min": args.lmin,
        "output_dir": args.out,
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    if args.all_channels:
        cfg["all_channels"] = True
    if args.no_svg:
        cfg["emit_svg"] = False
    if "input" not in cfg:
        raise ValueError("report needs --input or an input in --config")
    config = RunConfig.from_dict(cfg)
    report = run_diagnostics(config)
    print(format_aggregate(report.aggregate))
    for f in report.failures:
        print(f"FAILED {f['series_id']}: {f['error']}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_PARTIAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taskdiag", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"taskdiag {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="summarize a stream CSV")
    _stream_args(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("synth", help="write a synthetic stream CSV")
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step-duration", type=float, default=600.0)
    p.add_argument("--params", nargs="*", default=[], metavar="KEY=VALUE",
                   help="generator parameters; values parse as JSON when possible")
    p.add_argument("--fixture", choices=("changepoint", "transient", "periodic", "window_sensitivity"),
                   help="write a shipped fixture instead (plus its taskifications)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("taskify", help="build a fixed-length taskification")
    _stream_args(p)
    _taskification_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_taskify)

    p = sub.add_parser("matrix", help="pairwise task distance matrix")
    _stream_args(p)
    _taskification_args(p)
    p.add_argument("--out", help=".csv or .json")
    p.add_argument("--svg", help="also write a heatmap")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("profiles", help="plasticity and stability profiles")
    _stream_args(p)
    _taskification_args(p)
    p.add_argument("--lmin", type=int, default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_profiles)

    p = sub.add_parser("dprof", help="profile distance between two taskifications")
    _stream_args(p)
    _taskification_args(p, "a-")
    _taskification_args(p, "b-")
    _weights_args(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_dprof)

    p = sub.add_parser("bps", help="boundary-profile sensitivity of one taskification")
    _stream_args(p)
    _taskification_args(p)
    _weights_args(p)
    p.add_argument("--delta-days", type=int, default=1)
    p.add_argument("--delta-steps", type=int, default=None, help="overrides --delta-days")
    p.add_argument("--n-perturb", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bps)

    p = sub.add_parser("clmetrics", help="average MSE, BWT and forgetting from results matrices")
    p.add_argument("matrices", nargs="+", help="results CSVs (after_task,task_1..task_T)")
    p.add_argument("--average", choices=(AVERAGE_FINAL, AVERAGE_LOWER_TRIANGLE), default=AVERAGE_FINAL)
    p.add_argument("--out")
    p.set_defaults(func=cmd_clmetrics)

    p = sub.add_parser("report", help="batch diagnostics over a CSV or a manifest")
    p.add_argument("--config", help="RunConfig JSON; flags override its values")
    p.add_argument("--input", help="stream CSV or manifest JSON")
    p.add_argument("--channel")
    p.add_argument("--all-channels", action="store_true")
    p.add_argument("--window-days", type=int, nargs="+")
    p.add_argument("--shift-days", type=int)
    p.add_argument("--delta-days", type=int)
    p.add_argument("--delta-steps", type=int)
    p.add_argument("--n-perturb", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--lmin", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--no-svg", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TaskDiagError, ValueError, OSError, KeyError) as exc:
        print(f"taskdiag {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
