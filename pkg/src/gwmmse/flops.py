"""Closed-form FLOP costs of the MMSE correlator stages and a per-stage tally."""

from collections import Counter

STAGES = (
    "interference_injection",
    "partial_id",
    "old_outer",
    "new_outer",
    "accumulate",
    "solve",
    "integrate_bit",
)


def stage_costs(N, g, n_interferers=1):
    """FLOPs per epoch for every stage, with M = N // g."""
    if g < 1 or N % g:
        raise ValueError(f"group size {g} does not divide N={N}")
    M = N // g
    return {
        "interference_injection": N * n_interferers,
        "partial_id": M * (g - 1),
        "old_outer": M * M,
        "new_outer": M * M,
        "accumulate": 3 * M * M,
        "solve": 2 * M + M * M + M ** 3,
        "integrate_bit": 2 * M,
    }


class FlopCounter:
    """Accumulates charged FLOPs by stage name.

    Operations accept an optional counter and charge their closed-form cost,
    so a run can be audited without instrumenting the arithmetic itself.
    """

    def __init__(self):
        self.counts = Counter()

    def charge(self, stage, flops):
        if stage not in STAGES:
            raise KeyError(f"unknown stage {stage!r}")
        self.counts[stage] += int(flops)

    def __getitem__(self, stage):
        return self.counts[stage]

    @property
    def total(self):
        return sum(self.counts.values())

    def reset(self):
        self.counts.clear()
