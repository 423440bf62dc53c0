"""Command line entry point.

    iadrc run --config paper-knownS
    iadrc compare paper-knownS-badrc paper-knownS
    iadrc suite --jobs 2

Artifacts go under ``--out-dir`` (default: ``$IADRC_OUT_DIR`` or
``./iadrc-out``), one sub-directory per scenario. Exit codes: 0 success,
2 configuration error, 3 numerical blowup.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import json
import logging
import math
import os
from pathlib import Path
import sys

import numpy as np

from .config import apply_overrides, build_scenario, builtin_names, load_config
from .errors import ConfigInvalid, MismatchedPlants, NumericalBlowup
from .sim import compute_metrics, run_scenario

log = logging.getLogger("iadrc")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
OUT_DIR_ENV = "IADRC_OUT_DIR"


def _default_out_dir():
    return os.environ.get(OUT_DIR_ENV, "iadrc-out")


def _clean(value):
    """JSON-friendly copy: numpy scalars to floats, NaN to None."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def _write_json(path, payload):
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


def prepare_config(source, dt=None, horizon=None, overrides=()):
    """Load a scenario and apply command-line adjustments."""
    cfg = load_config(source)
    extra = list(overrides or ())
    if dt is not None:
        extra.append(f"simulation.dt={dt!r}")
    if horizon is not None:
        extra.append(f"simulation.horizon={horizon!r}")
    return apply_overrides(cfg, extra)


def _write_trace(trace, folder, stem, metrics):
    trace.to_csv(folder / f"{stem}.csv")
    _write_json(folder / f"{stem}.json", {"metadata": trace.metadata, "metrics": metrics.as_dict() if metrics else None})


def _figure_tables(cfg, trace, baseline):
    """Columns for each figure declared in the scenario."""
    figures = cfg.get("figures", {})
    tables = {}
    n = cfg["plant"]["order"]
    states = [f"x{i + 1}" for i in range(n)]
    if "states" in figures:
        cols = {"t": trace.t}
        label = "iadrc" if trace.metadata["mode"] != "BADRC" else "badrc"
        if baseline is not None:
            for name in states:
                cols[f"{name}_badrc"] = baseline[name]
        for name in states:
            cols[f"{name}_{label}"] = trace[name]
        tables[figures["states"]] = cols
    if "disturbances" in figures:
        cols = {"t": trace.t, "d1": trace["d1"], "d2": trace["d2"], "d": trace["d"]}
        if "d2_hat" in trace:
            cols["d2_hat"] = trace["d2_hat"]
            cols["d1_hat"] = trace["eso_disturbance"]
        else:
            cols["d_hat"] = trace["eso_disturbance"]
        if baseline is not None:
            cols["d_hat_badrc"] = baseline["eso_disturbance"]
        tables[figures["disturbances"]] = cols
    if "psi1" in figures and "psi1_hat1" in trace:
        cols = {"t": trace.t}
        truth = trace.metadata.get("psi1_true") or []
        for i, value in enumerate(truth):
            cols[f"psi1_hat{i + 1}"] = trace[f"psi1_hat{i + 1}"]
            cols[f"psi1_true{i + 1}"] = np.full(trace.t.size, value)
        tables[figures["psi1"]] = cols
    return tables


def _write_table(path, cols):
    names = list(cols)
    np.savetxt(path, np.column_stack([cols[k] for k in names]), delimiter=",",
               header=",".join(names), comments="", fmt="%.17g")


def run_config(cfg, out_dir):
    """Run one validated scenario (and its baseline) and write all artifacts.

    Returns the metrics of the main run as a dict.
    """
    folder = Path(out_dir) / cfg["name"]
    folder.mkdir(parents=True, exist_ok=True)
    try:
        trace = run_scenario(build_scenario(cfg))
    except NumericalBlowup as exc:
        if exc.trace is not None:
            exc.trace.to_csv(folder / "trace_partial.csv")
            _write_json(folder / "trace_partial.json", {"metadata": exc.trace.metadata, "error": str(exc)})
        raise
    metrics = compute_metrics(trace)
    _write_trace(trace, folder, "trace", metrics)
    _write_json(folder / "metrics.json", metrics.as_dict())
    baseline = None
    if cfg.get("baseline"):
        baseline = run_scenario(build_scenario(cfg, mode=cfg["baseline"]))
        _write_trace(baseline, folder, "baseline_trace", compute_metrics(baseline))
    for stem, cols in _figure_tables(cfg, trace, baseline).items():
        _write_table(folder / f"{stem}.csv", cols)
    log.info("wrote %s", folder)
    return metrics.as_dict()


def _ratios(a, b):
    """Per-metric ratios ``b / a``; two zeros give 1."""
    out = {}
    for key, va in a.items():
        vb = b.get(key)
        if isinstance(va, dict):
            out[key] = _ratios(va, vb or {})
        elif isinstance(va, (int, float)) and isinstance(vb, (int, float)):
            if va == 0 and vb == 0:
                out[key] = 1.0
            elif va == 0:
                out[key] = float("inf")
            else:
                out[key] = vb / va
    return out


def compare_configs(cfg_a, cfg_b, out_dir):
    """Paired run of two scenarios on the same plant and exosystem."""
    for section in ("plant", "exosystem", "initial"):
        if cfg_a.get(section) != cfg_b.get(section):
            raise MismatchedPlants(f"scenarios differ in section {section!r}")
    trace_a = run_scenario(build_scenario(cfg_a))
    trace_b = run_scenario(build_scenario(cfg_b))
    ma, mb = compute_metrics(trace_a).as_dict(), compute_metrics(trace_b).as_dict()
    shared = [name for name in trace_a.names if name in trace_b]
    identical = trace_a.t.shape == trace_b.t.shape and all(
        np.array_equal(trace_a[name], trace_b[name]) for name in shared
    )
    report = {
        "a": cfg_a["name"],
        "b": cfg_b["name"],
        "metrics_a": ma,
        "metrics_b": mb,
        "ratios_b_over_a": _ratios(ma, mb),
        "identical_shared_signals": identical,
    }
    folder = Path(out_dir) / f"compare_{cfg_a['name']}_vs_{cfg_b['name']}"
    folder.mkdir(parents=True, exist_ok=True)
    _write_json(folder / "compare.json", report)
    return report


def _suite_job(args):
    name, out_dir, dt, horizon = args
    cfg = prepare_config(name, dt=dt, horizon=horizon)
    return name, run_config(cfg, out_dir)


def run_suite(out_dir, jobs=1, dt=None, horizon=None, names=None):
    names = names or builtin_names()
    tasks = [(name, out_dir, dt, horizon) for name in names]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(_suite_job, tasks))
    else:
        results = dict(map(_suite_job, tasks))
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    _write_json(Path(out_dir) / "suite.json", results)
    return results


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=None, help=f"output directory (default ${OUT_DIR_ENV} or ./iadrc-out)")
    common.add_argument("--dt", type=float, default=None, help="integration step in seconds")
    common.add_argument("--horizon", type=float, default=None, help="simulated time in seconds")
    common.add_argument("--seedless", action="store_true",
                        help="accepted for compatibility; runs are always deterministic")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set a dotted config key, e.g. simulation.dt=0.002 (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="iadrc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run one scenario")
    run.add_argument("--config", required=True, help="scenario file or built-in name")

    cmp_ = sub.add_parser("compare", parents=[common], help="paired run of two scenarios")
    cmp_.add_argument("config_a")
    cmp_.add_argument("config_b")

    suite = sub.add_parser("suite", parents=[common], help="run every built-in scenario")
    suite.add_argument("--jobs", type=int, default=1)

    sub.add_parser("list", help="list built-in scenarios")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "list":
        print("\n".join(builtin_names()))
        return EXIT_OK
    out_dir = args.out_dir or _default_out_dir()
    try:
        if args.command == "run":
            cfg = prepare_config(args.config, args.dt, args.horizon, args.override)
            if cfg.get("output", {}).get("directory") and args.out_dir is None:
                out_dir = cfg["output"]["directory"]
            metrics = run_config(cfg, out_dir)
            print(json.dumps(_clean(metrics), indent=2, sort_keys=True))
        elif args.command == "compare":
            cfg_a = prepare_config(args.config_a, args.dt, args.horizon, args.override)
            cfg_b = prepare_config(args.config_b, args.dt, args.horizon, args.override)
            report = compare_configs(cfg_a, cfg_b, out_dir)
            print(json.dumps(_clean({k: report[k] for k in ("a", "b", "ratios_b_over_a", "identical_shared_signals")}),
                             indent=2, sort_keys=True))
        elif args.command == "suite":
            if args.override:
                raise ConfigInvalid("--override is not supported for suite runs")
            results = run_suite(out_dir, jobs=args.jobs, dt=args.dt, horizon=args.horizon)
            for name, metrics in results.items():
                print(f"{name}: x1 steady RMS {metrics['steady_rms']['x1']:.3e}")
    except (ConfigInvalid, MismatchedPlants) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalBlowup as exc:
        print(f"numerical blowup: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
