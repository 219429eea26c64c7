"""BER at one ISR for each calibrated (g, L) pair, with FLOPs per epoch.

Shows the trade between group size, window length and cost.
"""

import argparse

from gwmmse.budget import flop_count
from gwmmse.harness import DetectorSpec, RunConfig, run_ber_sweep
from gwmmse.mmse import CALIBRATED_PAIRS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--isr", type=float, default=30.0)
    ap.add_argument("--bits", type=int, default=20_000)
    ap.add_argument("--interferers", type=int, default=1)
    ap.add_argument("--groups", type=int, nargs="+", default=[8, 16, 32, 64],
                    help="g=1 means a 1024x1024 solve per epoch and is very slow")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    detectors = ["mf"] + [f"mmse:g={g},L={CALIBRATED_PAIRS[g]}" for g in args.groups]
    cfg = RunConfig(detectors=detectors, isr_grid=[args.isr], bits_target=args.bits,
                    seed=args.seed, n_interferers=args.interferers)
    curve = run_ber_sweep(cfg)
    print(f"{'detector':<20}{'BER':>12}{'FLOPs/epoch':>14}")
    for det in detectors:
        row = curve.get(args.isr, det)
        spec = DetectorSpec.parse(det)
        flops = "" if spec.kind == "mf" else f"{flop_count(1024, spec.mmse_config(cfg.mmse).g).total:,}"
        print(f"{det:<20}{row.ber:>12.3e}{flops:>14}")


if __name__ == "__main__":
    main()
