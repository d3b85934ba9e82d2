"""Command-line entry point: ``pilotwave simulate | sweep | measure``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .csvio import config_hash, write_csv, write_manifest
from .errors import ConfigError, InvalidArgumentError, PilotwaveError
from .harness import engine_pairs, run_comparison, scenario_from_dict
from .measurement import born_statistics, model_from_dict
from .records import COLUMNS
from .units import UNITS

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

SWEEP_ALIASES = {"C": "C_eV_per_m2", "F": "F_eV_per_m2", "dt": "dt_fs"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _threads(arg):
    env = os.environ.get("PILOTWAVE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"PILOTWAVE_THREADS must be an integer, got {env!r}") from None
    return max(1, arg or 1)


def _read_json(path, what):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {what}: {exc}") from None
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {what}: {exc.msg}", line=exc.lineno) from None


def _parsed(parse, doc, text):
    try:
        return parse(doc)
    except ConfigError as exc:
        raise exc.at_line_of(text) from None


def _scenario_doc(args):
    doc, text = _read_json(args.scenario, "scenario")
    if not isinstance(doc, dict):
        raise ConfigError("scenario must be a JSON object")
    if args.engines:
        doc["engines"] = [e.strip() for e in args.engines.split(",") if e.strip()]
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.record_every is not None:
        doc["record_every"] = args.record_every
    if args.n_steps is not None:
        doc["n_steps"] = args.n_steps
    return doc, text


def _out_dir(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}", field="--out") from None
    return out


def _write_trajectories(out, comparison, suffix=""):
    files = []
    for engine, result in comparison.results.items():
        name = f"trajectories_{engine}{suffix}.csv"
        write_csv(out / name, COLUMNS, result.series.rows)
        files.append(name)
    return files


def _write_comparison(out, comparison, name="comparison.csv"):
    keys = list(comparison.deviations)
    header = ["t_fs"] + [f"deviation_nm_{k}" for k in keys]
    rows = [[t] + [comparison.deviations[k][i] for k in keys]
            for i, t in enumerate(comparison.times)]
    write_csv(out / name, header, rows)
    return name


def _engine_report(comparison):
    report = {}
    for engine, r in comparison.results.items():
        report[engine] = {
            "records": len(r.series),
            "failure": r.failure,
            "failure_step": r.failure_step,
            "diagnostics": r.diagnostics.as_dict(),
        }
    return report


def _base_manifest(doc, command):
    return {
        "tool": "pilotwave",
        "tool_version": __version__,
        "command": command,
        "config_hash": config_hash(doc),
        "units": UNITS.declaration(),
    }


def cmd_simulate(args):
    t0 = time.perf_counter()
    doc, text = _scenario_doc(args)
    cfg = _parsed(scenario_from_dict, doc, text)
    if len(cfg.engines) < 2:
        raise ConfigError("simulate needs at least two engines to compare", field="engines")
    out = _out_dir(args.out)
    comparison = run_comparison(cfg, threads=_threads(args.threads))
    files = _write_trajectories(out, comparison)
    files.append(_write_comparison(out, comparison))
    manifest = _base_manifest(doc, "simulate")
    manifest.update({
        "seed": cfg.seed,
        "engines": _engine_report(comparison),
        "summary": comparison.summary,
        "outputs": files + ["manifest.json"],
        "wall_clock_s": time.perf_counter() - t0,
    })
    write_manifest(out / "manifest.json", manifest)
    return _report_failures(_failures(comparison))


def _failures(comparison):
    return {e: (r.failure, r.failure_step) for e, r in comparison.results.items() if r.failure}


def _report_failures(failures):
    for engine, (msg, step) in failures.items():
        print(f"numerical failure in {engine} at step {step}: {msg}", file=sys.stderr)
    return EXIT_NUMERIC if failures else EXIT_OK


def _sweep_values(text):
    if text is None or not text.strip():
        raise ConfigError("empty sweep value list", field="--sweep-values")
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"sweep values must be numbers: {text!r}", field="--sweep-values") from None


def cmd_sweep(args):
    t0 = time.perf_counter()
    doc, text = _scenario_doc(args)
    key = SWEEP_ALIASES.get(args.sweep_param, args.sweep_param)
    if key not in doc or isinstance(doc[key], (dict, list)):
        raise ConfigError(f"cannot sweep over {args.sweep_param!r}", field="--sweep-param")
    values = _sweep_values(args.sweep_values)
    if not values:
        raise ConfigError("empty sweep value list", field="--sweep-values")
    cfgs = []
    for v in values:
        d = dict(doc)
        d[key] = v
        cfgs.append(_parsed(scenario_from_dict, d, text))
    out = _out_dir(args.out)
    threads = _threads(args.threads)
    files, engines, summary, failures = [], {}, {}, {}
    columns = []
    for v, cfg in zip(values, cfgs):
        label = f"{args.sweep_param}={v:.6g}"
        comparison = run_comparison(cfg, threads=threads)
        files += _write_trajectories(out, comparison, f"_{label}")
        files.append(_write_comparison(out, comparison, f"comparison_{label}.csv"))
        engines[label] = _engine_report(comparison)
        summary[label] = comparison.summary
        failures.update({f"{e} @ {label}": m for e, m in _failures(comparison).items()})
        pair = "_vs_".join(engine_pairs(cfg.engines)[0])
        columns.append((label, comparison.times, comparison.deviations[pair]))
    n = max(len(t) for _, t, _ in columns)
    times = next(t for _, t, _ in columns if len(t) == n)
    header = ["t_fs"] + [f"deviation_nm@{label}" for label, _, _ in columns]
    rows = []
    for i in range(n):
        rows.append([times[i]] + [d[i] if i < len(d) else math.nan for _, _, d in columns])
    write_csv(out / "deviation_sweep.csv", header, rows)
    files.append("deviation_sweep.csv")
    manifest = _base_manifest(doc, "sweep")
    manifest.update({
        "sweep_parameter": key,
        "sweep_values": values,
        "engines": engines,
        "summary": summary,
        "outputs": files + ["manifest.json"],
        "wall_clock_s": time.perf_counter() - t0,
    })
    write_manifest(out / "manifest.json", manifest)
    return _report_failures(failures)


def cmd_measure(args):
    t0 = time.perf_counter()
    doc, text = _read_json(args.model, "measurement model")
    model = _parsed(model_from_dict, doc, text)
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    n = args.n_samples if args.n_samples is not None else int(doc.get("n_samples", 10000))
    if n < 1:
        raise ConfigError("n_samples must be positive", field="--n-samples")
    out = _out_dir(args.out)
    stats = born_statistics(model, n, seed, threads=_threads(args.threads))
    rows = [[i, int(c), f, w] for i, (c, f, w) in
            enumerate(zip(stats.counts, stats.frequencies, stats.weights))]
    write_csv(out / "outcomes.csv", ["branch", "count", "frequency", "weight_abs_c_sq"], rows)
    rows = [[i, x, int(b), fid, bool(a)] for i, (x, b, fid, a) in
            enumerate(zip(stats.samples, stats.branches, stats.fidelities, stats.ambiguous))]
    write_csv(out / "collapse_fidelity.csv",
              ["sample", "x2_nm", "branch", "fidelity", "ambiguous"], rows)
    files = ["outcomes.csv", "collapse_fidelity.csv", "manifest.json"]
    manifest = _base_manifest(doc, "measure")
    manifest.update({
        "seed": seed,
        "n_samples": n,
        "branch_separation_widths": model.separation,
        "pointer_width_nm": model.pointer_width,
        "ambiguous_samples": int(np.sum(stats.ambiguous)),
        "min_fidelity": float(np.min(stats.fidelities)),
        "outputs": files,
        "wall_clock_s": time.perf_counter() - t0,
    })
    write_manifest(out / "manifest.json", manifest)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="pilotwave", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"pilotwave {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=1)

    def scenario(sp):
        sp.add_argument("--scenario", required=True, help="scenario JSON file")
        sp.add_argument("--engines", help="comma-separated: exact2d,sea0,sea2,oraclefed")
        sp.add_argument("--record-every", type=int, default=None)
        sp.add_argument("--n-steps", type=int, default=None, help="override the step count")

    sim = sub.add_parser("simulate", help="run engines side by side on one scenario")
    scenario(sim)
    common(sim)
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="repeat the comparison over a parameter")
    scenario(sw)
    common(sw)
    sw.add_argument("--sweep-param", default="C", help="C, F, dt or any top-level numeric field")
    sw.add_argument("--sweep-values", required=True, help="comma-separated values (SI units)")
    sw.set_defaults(func=cmd_sweep)

    me = sub.add_parser("measure", help="impulsive measurement Born-rule statistics")
    me.add_argument("--model", required=True, help="measurement model JSON file")
    me.add_argument("--n-samples", type=int, default=None)
    common(me)
    me.set_defaults(func=cmd_measure)
    return p


def _attach_values(argv):
    """Glue ``--sweep-values -1e12,...`` into one token so argparse keeps the negatives."""
    out = []
    it = iter(argv)
    for a in it:
        if a == "--sweep-values":
            out.append(f"{a}={next(it, '')}")
        else:
            out.append(a)
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_attach_values(argv))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidArgumentError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PilotwaveError as exc:
        step = getattr(exc, "step", None)
        where = f" at step {step}" if step is not None else ""
        print(f"numerical failure{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
