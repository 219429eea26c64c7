"""FLOP table for every group size and a per-stage timing table for one configuration."""

import argparse

from gwmmse.budget import benchmark_pipeline, flop_count, flop_report_csv
from gwmmse.mmse import MmseConfig
from gwmmse.prn import generate_ca_code, worst_case_delays
from gwmmse.signal import InterferenceSpec, ScenarioConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-g", type=int, default=64)
    ap.add_argument("-L", type=int, default=300)
    ap.add_argument("--reps", type=int, default=2000)
    ap.add_argument("--csv", action="store_true")
    args = ap.parse_args()

    print(flop_report_csv([flop_count(1024, g) for g in (1, 2, 4, 8, 16, 32, 64)]))
    delay = worst_case_delays(generate_ca_code(1), 1)[0][0]
    scen = ScenarioConfig(epochs=max(args.L, 400), interference=InterferenceSpec(delays=[delay]))
    rep = benchmark_pipeline(scen, MmseConfig(g=args.g, L=args.L), reps=args.reps)
    print(rep.to_csv() if args.csv else rep.to_text())


if __name__ == "__main__":
    main()
