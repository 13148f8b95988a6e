"""
Command-line entry point.

    tempus-fri encode      --config run.json --out triggers.csv
    tempus-fri reconstruct --config run.json [--triggers triggers.csv] --out rec.json
    tempus-fri noise-free  --config run.json --out nf.csv
    tempus-fri sweep       --config run.json --out sweep.csv --jobs 4
    tempus-fri check       --config run.json --out check.json

The master seed is taken from ``--seed``, else ``TEMPUS_FRI_SEED``, else
the config file.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import TempusError
from .experiments import (
    build_kernel,
    build_signal,
    encode_machine,
    parse_config,
    resolve_channels,
    run_jitter_sweep,
    run_noise_free,
    sufficiency_report,
    summarize,
    with_seed,
)
from .genfri import genfri_tem
from .reconstruction import forward_system, nmse_shifts, stack_channels
from .serialization import (
    emit_results,
    emit_summary,
    triggers_from_csv,
    triggers_to_csv,
    write_json,
    write_metadata,
)
from .signal_model import filtered_signal
from .tem import CtemConfig, measurements_from_times

log = logging.getLogger("tempus_fri")

SWEEP_NOTE = "sweep reuses each machine entry of the config for every sigma"


def _load_config(args):
    try:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except OSError as exc:
        raise SystemExit(f"error: cannot read config {args.config}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise SystemExit(f"error: {args.config} is not valid JSON: {exc}")
    cfg = parse_config(raw)
    seed = args.seed
    if seed is None and os.environ.get("TEMPUS_FRI_SEED"):
        seed = int(os.environ["TEMPUS_FRI_SEED"])
    if seed is not None:
        cfg = with_seed(cfg, seed)
    return raw, cfg


def _out_path(args, cfg, default):
    return Path(args.out or cfg.output_path or default)


def _resolved(cfg, signal):
    return {
        "signal": {
            "period": signal.period_T,
            "amplitudes": [float(v) for v in signal.amplitudes],
            "shifts": [float(v) for v in signal.shifts],
            "pulse": type(signal.pulse).__name__,
        },
        "M": cfg.kernel_M,
        "machines": [
            {"name": m.name, "channels": [_channel_dict(ch) for ch in resolve_channels(cfg, i)]}
            for i, m in enumerate(cfg.machines)
        ],
        "sigmas": list(cfg.noise.sigmas),
        "trials": cfg.noise.trials,
        "solver": {
            "eta": cfg.solver.eta,
            "max_iters": cfg.solver.max_iters,
            "max_restarts": cfg.solver.max_restarts,
        },
    }


def _channel_dict(ch):
    if isinstance(ch, CtemConfig):
        return {"type": "ctem", "amplitude": ch.amplitude, "frequency": ch.frequency, "phase": ch.phase}
    return {
        "type": "iftem",
        "bias": ch.bias,
        "kappa": ch.kappa,
        "threshold": ch.threshold,
        "integrator_init": ch.integrator_init,
    }


def cmd_encode(args):
    raw, cfg = _load_config(args)
    signal = build_signal(cfg)
    y = filtered_signal(signal, build_kernel(cfg))
    entries = []
    for i, m in enumerate(cfg.machines):
        channels = resolve_channels(cfg, i)
        for j, (ch, tr) in enumerate(zip(channels, encode_machine(y, channels))):
            entries.append((m.name, j, tr, measurements_from_times(tr, ch).values))
    out = _out_path(args, cfg, "triggers.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(triggers_to_csv(entries), encoding="utf-8")
    write_metadata(out, raw, cfg.seed, _resolved(cfg, signal))
    return out


def cmd_reconstruct(args):
    raw, cfg = _load_config(args)
    signal = build_signal(cfg)
    y = filtered_signal(signal, build_kernel(cfg))
    replay = None
    if args.triggers:
        replay = triggers_from_csv(Path(args.triggers).read_text(encoding="utf-8"), signal.period_T)
    results = []
    for i, m in enumerate(cfg.machines):
        channels = resolve_channels(cfg, i)
        if replay is None:
            times = encode_machine(y, channels)
        else:
            try:
                times = [replay[(m.name, j)] for j in range(len(channels))]
            except KeyError as exc:
                raise SystemExit(f"error: trigger file has no entry for machine/channel {exc.args[0]}")
        system = stack_channels(
            [forward_system(tr, measurements_from_times(tr, ch), cfg.kernel_M) for ch, tr in zip(channels, times)]
        )
        res = genfri_tem(system, signal.K, cfg.solver, signal.pulse)
        d = {"machine": m.name, **res.to_dict()}
        d["nmse"] = float(nmse_shifts(signal.shifts, res.shifts, signal.period_T))
        d["amplitude_max_error"] = float(np.max(np.abs(res.amplitudes - signal.amplitudes)))
        results.append(d)
    out = _out_path(args, cfg, "reconstruction.json")
    write_json(results, out)
    write_metadata(out, raw, cfg.seed, _resolved(cfg, signal))
    return out


def cmd_noise_free(args):
    raw, cfg = _load_config(args)
    records = run_noise_free(cfg, timing=args.timing)
    fmt = args.format or cfg.output_format
    out = _out_path(args, cfg, f"noise_free.{fmt}")
    emit_results(records, out, fmt)
    write_metadata(out, raw, cfg.seed, _resolved(cfg, build_signal(cfg)))
    return out


def cmd_sweep(args):
    raw, cfg = _load_config(args)
    records = run_jitter_sweep(cfg, jobs=args.jobs, timing=args.timing)
    fmt = args.format or cfg.output_format
    out = _out_path(args, cfg, f"sweep.{fmt}")
    emit_results(records, out, fmt)
    emit_summary(summarize(records), out.with_name(out.stem + ".summary.csv"))
    write_metadata(out, raw, cfg.seed, _resolved(cfg, build_signal(cfg)), notes=[SWEEP_NOTE])
    return out


def cmd_check(args):
    raw, cfg = _load_config(args)
    report = sufficiency_report(cfg)
    out = _out_path(args, cfg, "check.json")
    write_json(report, out)
    for entry in report:
        print(f"{entry['machine']}[{entry['channel']}]: {'PASS' if entry.get('passed') else 'FAIL'}")
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="tempus-fri", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration (JSON)")
    common.add_argument("--seed", type=int, default=None, help="master seed; overrides config and TEMPUS_FRI_SEED")
    common.add_argument("--out", default=None, help="output file")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--jobs", type=int, default=1, help="worker processes for Monte Carlo trials")
    common.add_argument("--timing", action="store_true", help="fill runtime_ms (breaks byte-identical output)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("encode", parents=[common], help="write trigger times").set_defaults(func=cmd_encode)
    r = sub.add_parser("reconstruct", parents=[common], help="decode with GenFRI-TEM")
    r.add_argument("--triggers", default=None, help="replay trigger times from an encode CSV")
    r.set_defaults(func=cmd_reconstruct)
    sub.add_parser("noise-free", parents=[common], help="noise-free recovery per machine").set_defaults(func=cmd_noise_free)
    sub.add_parser("sweep", parents=[common], help="Monte Carlo jitter sweep").set_defaults(func=cmd_sweep)
    sub.add_parser("check", parents=[common], help="sufficient-condition report").set_defaults(func=cmd_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        out = args.func(args)
    except (TempusError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
