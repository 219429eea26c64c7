"""Command-line front end: gen-code, profile, simulate, ber-sweep, inspect."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import replace

import numpy as np

from . import budget, harness, mmse, prn
from .signal import InterferenceSpec, NoiseSpec, ScenarioConfig

log = logging.getLogger("gwmmse")


def _base_config(args) -> harness.RunConfig:
    cfg = harness.load_config(args.config) if args.config else harness.RunConfig()
    scen = cfg.scenario
    if args.prn is not None:
        scen.prn_id = args.prn
    if args.seed is not None:
        cfg.seed = args.seed
        scen.seed = args.seed
    if args.interferers is not None:
        cfg.n_interferers = args.interferers
    if args.delays:
        spec = scen.interference or InterferenceSpec(delays=[])
        spec.delays = args.delays
        scen.interference = spec
        cfg.n_interferers = len(args.delays)
    if args.shared_bits:
        scen.interference = scen.interference or InterferenceSpec(delays=[])
        scen.interference.shared_bits = True
    if args.isr_mode:
        scen.interference = scen.interference or InterferenceSpec(delays=[])
        scen.interference.isr_mode = args.isr_mode
    if args.noise_sigma is not None:
        scen.noise = NoiseSpec(enabled=args.noise_sigma > 0, sigma=args.noise_sigma)
    overrides = {k: v for k, v in (("g", args.g), ("L", args.L), ("eps", args.eps), ("nu", args.nu)) if v is not None}
    if "g" in overrides and "L" not in overrides:
        overrides["L"] = None
    if overrides:
        cfg.mmse = replace(cfg.mmse, **overrides)
    return cfg


def _add_scenario_flags(p):
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--prn", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--interferers", type=int, help="number of spoofer replicas at the worst-case delays")
    p.add_argument("--delays", type=int, nargs="+", help="explicit interferer delays in chips")
    p.add_argument("--shared-bits", action="store_true", help="all interferers carry one bit stream")
    p.add_argument("--isr-mode", choices=["per-interferer", "total"])
    p.add_argument("--noise-sigma", type=float)
    p.add_argument("-g", type=int, help="group size")
    p.add_argument("-L", type=int, help="window length in epochs")
    p.add_argument("--eps", type=float, help="relative regularization")
    p.add_argument("--nu", type=float, help="absolute regularization")


def cmd_gen_code(args):
    code = prn.generate_ca_code(args.prn)
    if args.upsample:
        code = prn.upsample_code(code)
    if args.output:
        if args.format == "packed":
            with open(args.output, "wb") as fh:
                fh.write(prn.pack_code(code))
        else:
            prn.write_code_text(code, args.output)
    head = "".join("1" if c < 0 else "0" for c in code.chips[:10])
    print(f"PRN {args.prn}: {code.length} chips, sum {int(code.chips.sum())}, first 10 chips octal {int(head, 2):o}")
    if args.worst:
        for lag, value in prn.worst_case_delays(prn.generate_ca_code(args.prn), args.worst):
            print(f"  delay {lag:4d}  autocorrelation {value:+d}")
    return 0


def cmd_profile(args):
    gs = args.groups or [1, 2, 4, 8, 16, 32, 64]
    reports = [budget.flop_count(args.N, g, args.interferers or 1) for g in gs]
    if args.format == "csv":
        sys.stdout.write(budget.flop_report_csv(reports))
    else:
        for rep in reports:
            print(budget.flop_report_text(rep))
    if args.flops_only:
        return 0
    scen = ScenarioConfig(epochs=400, seed=args.seed or 0,
                          interference=InterferenceSpec(delays=[lag for lag, _ in prn.worst_case_delays(prn.generate_ca_code(1), 1)]))
    mcfg = mmse.MmseConfig(g=args.g or 64, L=args.L or 300)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore" if args.quiet else "default")
        rep = budget.benchmark_pipeline(scen, mcfg, reps=args.reps)
    print()
    sys.stdout.write(rep.to_csv() if args.format == "csv" else rep.to_text() + "\n")
    ok = rep.pipeline_ns < budget.EPOCH_NS
    print(f"real-time: {'yes' if ok else 'NO'} ({rep.pipeline_ns / 1e3:.1f} us per epoch for the mitigation pipeline)")
    return 0 if ok else 1


def cmd_simulate(args):
    cfg = _base_config(args)
    if args.epochs is not None:
        cfg.scenario.epochs = args.epochs
    isr = args.isr if args.isr is not None else None
    text = harness.run_scenario(cfg, args.output, isr_db=isr, snapshot_path=args.snapshot)
    if args.output is None:
        sys.stdout.write(text)
    return 0


def cmd_ber_sweep(args):
    cfg = _base_config(args)
    if args.isr:
        cfg.isr_grid = sorted(args.isr)
    if args.detectors:
        cfg.detectors = args.detectors
    if args.bits is not None:
        cfg.bits_target = args.bits
    if args.majority_vote:
        cfg.majority_vote = True
    if args.paper_scale:
        cfg = harness.paper_scale(cfg)
    csv_path = args.csv or cfg.csv_path
    plot_path = args.plot or cfg.plot_path
    curve = harness.run_ber_sweep(cfg, shards=args.shards)
    if csv_path or plot_path:
        harness.emit_outputs(curve, csv_path, plot_path)
    width = max(len(d) for d in curve.detectors())
    for r in curve.rows:
        print(f"ISR {r.isr_db:6.2f} dB  {r.detector:<{width}}  {r.errors:>8d}/{r.trials:<9d} BER {r.ber:.3e}  [{r.ci_low:.2e}, {r.ci_high:.2e}]")
    return 0


def cmd_inspect(args):
    snap = mmse.load_snapshot(args.snapshot)
    cfg = snap.cfg
    R = snap.accumulator / max(snap.count, 1)
    info = {
        "g": cfg.g, "L": cfg.L, "N": cfg.N, "M": cfg.M, "p": cfg.p,
        "count": snap.count, "epoch": snap.epoch, "pushes": snap.pushes,
        "trace_R": float(np.trace(R)),
        "eigenvalues_R": [float(x) for x in np.linalg.eigvalsh(R)[::-1]],
    }
    if snap.weights is not None:
        info["weights"] = [float(x) for x in snap.weights]
        info["mse"] = mmse.mse_estimate(snap.weights, R, cfg)
    print(json.dumps(info, indent=2))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="gwmmse", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-code", help="generate a C/A code")
    p.add_argument("--prn", type=int, required=True)
    p.add_argument("--upsample", action="store_true", help="pad to 1024 chips")
    p.add_argument("--format", choices=["text", "packed"], default="text")
    p.add_argument("--worst", type=int, default=0, help="also list this many worst-case delays")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen_code)

    p = sub.add_parser("profile", help="FLOP counts and per-stage timing")
    p.add_argument("--N", type=int, default=1024)
    p.add_argument("--groups", type=int, nargs="+")
    p.add_argument("--interferers", type=int)
    p.add_argument("-g", type=int)
    p.add_argument("-L", type=int)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.add_argument("--flops-only", action="store_true")
    p.add_argument("--quiet", action="store_true", help="suppress timer-resolution warnings")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("simulate", help="per-epoch trace of MF and MMSE outputs")
    _add_scenario_flags(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--isr", type=float)
    p.add_argument("--snapshot", help="save final MMSE state here")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ber-sweep", help="Monte Carlo BER vs ISR")
    _add_scenario_flags(p)
    p.add_argument("--isr", type=float, nargs="+")
    p.add_argument("--detectors", nargs="+", help="e.g. mf mmse mmse:L=1200 oracle")
    p.add_argument("--bits", type=int, help="scored epochs per ISR point")
    p.add_argument("--shards", type=int, default=1, help="worker processes")
    p.add_argument("--majority-vote", action="store_true", help="score 20-epoch navigation bits")
    p.add_argument("--paper-scale", action="store_true", help="60 million epochs per point")
    p.add_argument("--csv")
    p.add_argument("--plot", help="SVG output path")
    p.set_defaults(func=cmd_ber_sweep)

    p = sub.add_parser("inspect", help="summarize an MMSE state snapshot")
    p.add_argument("snapshot")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
