"""Command-line entry point: ``lpplfit {fit,cascade,classify,window,simulate}``.

Exit codes: 0 success, 2 input error, 3 optimisation failure, 4 flag error.
Reports are JSON (``"schema": 1``); series are CSV ``decimal_year,value``.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .cascade import run_cascade
from .classify import ClassifyConfig, antibubble_probe, classify
from .fit_engine import DAY, FitConfig, FitError, OptimizationFailure, fit
from .model import LpplParams, ModelDomainError, evaluate
from .synth_oracle import SynthSpec, generate
from .timebase import (
    PriceSeries,
    TimebaseError,
    from_decimal_year,
    ingest_csv,
    read_series_csv,
    to_decimal_year,
)
from .singularity_window import estimate_window

SCHEMA_VERSION = 1
DATA_DIR_ENV = "LPPLFIT_DATA_DIR"
EXIT_OK, EXIT_INPUT, EXIT_OPTIM, EXIT_FLAGS = 0, 2, 3, 4


class FlagError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_FLAGS)


def schema_path() -> Path:
    return Path(__file__).parent / "schema" / "report.schema.json"


def _stamp(t: float) -> dict:
    return {"decimal_year": t, "iso": from_decimal_year(t).isoformat()}


def _clean(obj):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _series_text(t, values) -> str:
    lines = ["decimal_year,value"]
    lines += [f"{a:.9g},{b:.9g}" for a, b in zip(np.asarray(t, float), np.asarray(values, float))]
    return "\n".join(lines) + "\n"


def _resolve_input(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    if not path.is_absolute():
        for base in (os.environ.get(DATA_DIR_ENV), Path(__file__).parent / "data"):
            if base and (Path(base) / name).exists():
                return Path(base) / name
    raise FileNotFoundError(f"input file not found: {name}")


def _parse_day(text: str | None):
    if text is None:
        return None
    for fmt in ("%Y-%m-%d", "%d.%m.%Y"):
        try:
            return datetime.strptime(text, fmt).replace(tzinfo=timezone.utc)
        except ValueError:
            pass
    raise FlagError(f"unrecognised date {text!r}")


def _load(args) -> tuple[PriceSeries, dict]:
    start, end = _parse_day(args.date_from), _parse_day(args.date_to)
    if start and end and end < start:
        raise FlagError("--to is before --from")
    path = _resolve_input(args.input)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    with path.open(encoding="utf-8-sig") as fh:
        header = fh.readline().strip().split(",")
    if header[:1] == ["decimal_year"]:
        t, v = read_series_csv(path)
        lo = to_decimal_year(start) if start else -math.inf
        hi = to_decimal_year(end) if end else math.inf
        mask = (t >= lo) & (t <= hi)
        t, v = t[mask], v[mask]
        if args.scale == "log":
            v = np.log(v)
        series = PriceSeries(t, v, args.scale, str(path))
    else:
        series = ingest_csv(path, args.date_col, args.value_col, start, end, args.scale)
    info = {"path": args.input, "sha256": digest, "n_points": len(series),
            "skipped_count": series.skipped_count, "scale": series.scale,
            "window": list(series.span) if len(series) else None}
    return series, info


def _config(args, orientation="bubble") -> FitConfig:
    tc_bounds = None
    if args.tc_min is not None or args.tc_max is not None:
        if args.tc_min is None or args.tc_max is None:
            raise FlagError("--tc-min and --tc-max must be given together")
        tc_bounds = (args.tc_min, args.tc_max)
    try:
        return FitConfig(tc_bounds=tc_bounds, n_starts=args.n_starts, seed=args.seed,
                         orientation=orientation,
                         alpha_bounds=(args.alpha_min, args.alpha_max),
                         omega_bounds=(args.omega_min, args.omega_max))
    except FitError as exc:
        raise FlagError(str(exc)) from exc


def _fit_block(fr) -> dict:
    out = fr.summary()
    out["t_c"] = _stamp(fr.params.t_c)
    return out


def cmd_fit(args, series, config):
    fr = fit(series, config)
    results = {"fit": _fit_block(fr)}
    outputs = {}
    if args.emit_fit_curve:
        t = fr.t
        if args.extend_to_tc:
            p = fr.params
            future = np.arange(t[-1] + DAY, p.t_c - DAY + 1e-12, DAY)
            t = np.concatenate([t, future])
            results["extension"] = {"to": _stamp(float(t[-1])), "n_points": int(future.size),
                                    "predictive": False,
                                    "note": "curve continued toward t_c for display only"}
        outputs[args.emit_fit_curve] = _series_text(t, evaluate(fr.params, t))
    elif args.extend_to_tc:
        raise FlagError("--extend-to-tc requires --emit-fit-curve")
    return results, outputs


def cmd_cascade(args, series, config):
    res = run_cascade(series, config, max_depth=args.max_depth, reduction_floor=args.reduction_floor)
    results = {"cascade": res.summary()}
    results["cascade"]["base_fit"]["t_c"] = _stamp(res.base_fit.params.t_c)
    for layer, block in zip(res.layers, results["cascade"]["layers"]):
        block["t_c"] = _stamp(layer.layer_params.t_c)
        block["tc_offset_days"] = (layer.layer_params.t_c - res.base_fit.params.t_c) * 365.25
    outputs = {}
    if args.emit_residuals:
        base = Path(args.emit_residuals)
        t = res.base_fit.t
        outputs[str(base.with_name(base.name + ".depth0.csv"))] = _series_text(t, res.base_fit.residuals)
        for layer in res.layers:
            outputs[str(base.with_name(f"{base.name}.depth{layer.depth}.csv"))] = _series_text(
                t, layer.output_residual)
    return results, outputs


def cmd_classify(args, series, config):
    verdict = classify(series, config)
    results = {"classify": verdict.summary()}
    if args.probe_tc is not None:
        results["probe"] = antibubble_probe(series, args.probe_tc, config).summary()
    return results, {}


def cmd_window(args, series, config):
    win = estimate_window(series, config, scan_step_days=args.scan_step_days, threshold=args.threshold,
                          tail_periods=args.tail_periods, max_days=args.max_days)
    results = {"window": win.summary()}
    outputs = {}
    if args.emit_scan:
        lines = ["t_c,rss,phase_score"]
        lines += [f"{p.t_c:.9g},{p.rss:.9g},{p.phase_score:.9g}" for p in win.scan]
        outputs[args.emit_scan] = "\n".join(lines) + "\n"
    return results, outputs


def cmd_simulate(args):
    params = LpplParams(A=args.A, m=args.m, alpha=args.alpha, C=args.C, omega=args.omega,
                        phi=args.phi, t_c=args.tc,
                        orientation="antibubble" if args.antibubble else "bubble")
    try:
        spec = SynthSpec(params, args.start, args.end, cadence_days=args.cadence_days,
                         business_days=args.business_days, noise_sigma=args.noise, seed=args.seed)
    except ValueError as exc:
        raise FlagError(str(exc)) from exc
    series = generate(spec)
    results = {"simulate": {"params": params.as_dict(), "n_points": len(series),
                            "noise_sigma": args.noise, "seed": args.seed,
                            "window": list(series.span)}}
    return results, {args.out: _series_text(series.t, series.values)}


def _add_common(p):
    p.add_argument("--input", required=True)
    p.add_argument("--date-col", default="date")
    p.add_argument("--value-col", default="value")
    p.add_argument("--from", dest="date_from")
    p.add_argument("--to", dest="date_to")
    p.add_argument("--scale", choices=["raw", "log"], default="raw")
    p.add_argument("--tc-min", type=float)
    p.add_argument("--tc-max", type=float)
    p.add_argument("--alpha-min", type=float, default=1e-6)
    p.add_argument("--alpha-max", type=float, default=3.0)
    p.add_argument("--omega-min", type=float, default=2.0)
    p.add_argument("--omega-max", type=float, default=200.0)
    p.add_argument("--n-starts", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", dest="json_out")
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock timings (makes reports non-reproducible)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lpplfit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit the seven-parameter LPPL")
    _add_common(p)
    p.add_argument("--emit-fit-curve")
    p.add_argument("--extend-to-tc", action="store_true")

    p = sub.add_parser("cascade", help="base fit plus iterated oscillation layers")
    _add_common(p)
    p.add_argument("--max-depth", type=int, default=4)
    p.add_argument("--reduction-floor", type=float, default=0.05)
    p.add_argument("--emit-residuals", help="path prefix for per-depth residual CSVs")

    p = sub.add_parser("classify", help="negative bubble / positive bubble / antibubble / none")
    _add_common(p)
    p.add_argument("--probe-tc", type=float, help="also run the antibubble probe at this fixed t_c")

    p = sub.add_parser("window", help="bracket t_c by the antiphase criterion")
    _add_common(p)
    p.add_argument("--scan-step-days", type=float, default=1.0)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--tail-periods", type=float, default=2.0)
    p.add_argument("--max-days", type=float, default=60.0)
    p.add_argument("--emit-scan")

    p = sub.add_parser("simulate", help="write a synthetic LPPL series")
    for name in ("A", "m", "alpha", "C", "omega", "phi", "tc", "start", "end"):
        p.add_argument(f"--{name}", type=float, required=True)
    p.add_argument("--antibubble", action="store_true")
    p.add_argument("--cadence-days", type=float, default=1.0)
    p.add_argument("--business-days", action="store_true")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--json", dest="json_out")
    p.add_argument("--timings", action="store_true")
    return parser


def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("timings",)}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    clock = time.perf_counter()
    try:
        if args.command == "simulate":
            config_echo, input_info = None, None
            results, outputs = cmd_simulate(args)
        else:
            series, input_info = _load(args)
            config = _config(args)
            config_echo = config.as_dict()
            handler = {"fit": cmd_fit, "cascade": cmd_cascade, "classify": cmd_classify,
                       "window": cmd_window}[args.command]
            results, outputs = handler(args, series, config)
    except FlagError as exc:
        print(f"lpplfit: flag error: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except OptimizationFailure as exc:
        print(f"lpplfit: optimisation failed: {exc} ({len(exc.diagnostics)} starts)", file=sys.stderr)
        return EXIT_OPTIM
    except (FileNotFoundError, TimebaseError, FitError, ModelDomainError, OSError) as exc:
        print(f"lpplfit: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    report = {
        "schema": SCHEMA_VERSION,
        "version": __version__,
        "command": args.command,
        "args": _echo(args),
        "config": config_echo,
        "input": input_info,
        "results": results,
    }
    if args.timings:
        report["timings"] = {"wall_seconds": time.perf_counter() - clock}
    text = json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"
    try:
        for path, body in outputs.items():
            _atomic_write(Path(path), body)
        if args.json_out:
            _atomic_write(Path(args.json_out), text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"lpplfit: cannot write output: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
