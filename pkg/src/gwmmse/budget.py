"""FLOP accounting and per-stage timing of one MMSE correlator epoch.

Timings are expressed as a share of the 1 ms epoch: a stage that takes
1,000,000 ns uses 100 % of the real-time budget.
"""

from __future__ import annotations

import csv
import gc
import io
import math
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .correlator import complete_integrate, group_sums
from .flops import STAGES, FlopCounter, stage_costs  # noqa: F401  (re-exported)
from .mmse import AutocorrWindow, MmseConfig, solve_weights
from .prn import upsample_vector
from .signal import (
    CA_CHIP_RATE,
    Scenario,
    ScenarioConfig,
    carrier_wipeoff,
    chip_index,
    chip_preintegrate,
    samples_per_epoch,
)

EPOCH_NS = 1_000_000


@dataclass(frozen=True)
class FlopReport:
    N: int
    M: int
    g: int
    interference_injection: int
    partial_id: int
    old_outer: int
    new_outer: int
    accumulate: int
    solve: int
    integrate_bit: int

    @property
    def total(self) -> int:
        return sum(getattr(self, s) for s in STAGES)

    def rows(self):
        return [(s, getattr(self, s)) for s in STAGES]


def flop_count(N: int, g: int, n_interferers: int = 1) -> FlopReport:
    costs = stage_costs(N, g, n_interferers)
    return FlopReport(N=N, M=N // g, g=g, **costs)


# Stage labels and scope, in table order.
TIMING_STAGES = (
    ("SIMD carrier generation and wipe-off", "chan"),
    ("SIMD code generation, wipe-off, and integration", "corr"),
    ("Tracking discriminators", "chan"),
    ("SIMD jamming injection", "corr"),
    ("MMSE pre-integrator block c_k", "corr"),
    ("Accumulate R_ck", "corr"),
    ("MMSE solution", "corr"),
    ("Integrate bit c_k^T w_k", "corr"),
)
MITIGATION_STAGES = ("MMSE pre-integrator block c_k", "Accumulate R_ck", "MMSE solution", "Integrate bit c_k^T w_k")


@dataclass
class StageTiming:
    stage: str
    scope: str
    mean_ns: float
    share_pct: float
    coarse: bool = False


@dataclass
class TimingReport:
    rows: list[StageTiming]
    total_ns: float
    pipeline_ns: float
    reps: int
    params: dict = field(default_factory=dict)

    @property
    def total_share(self) -> float:
        return share_of_epoch(self.total_ns)

    @property
    def pipeline_share(self) -> float:
        return share_of_epoch(self.pipeline_ns)

    def stage(self, name) -> StageTiming:
        for row in self.rows:
            if row.stage == name:
                return row
        raise KeyError(name)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage", "scope", "mean_ns", "share_pct"])
        for r in self.rows:
            w.writerow([r.stage, r.scope, f"{r.mean_ns:.1f}", f"{r.share_pct:.4f}"])
        w.writerow(["total (all stages)", "", f"{self.total_ns:.1f}", f"{self.total_share:.4f}"])
        w.writerow(["mitigation pipeline", "corr", f"{self.pipeline_ns:.1f}", f"{self.pipeline_share:.4f}"])
        return buf.getvalue()

    def to_text(self) -> str:
        width = max(len(r.stage) for r in self.rows) + 2
        lines = [f"{'Operation':<{width}}{'scope':<7}{'time (ns)':>14}{'share':>10}"]
        for r in self.rows:
            flag = " *" if r.coarse else ""
            lines.append(f"{r.stage:<{width}}{r.scope:<7}{r.mean_ns:>14,.1f}{r.share_pct:>9.2f}%{flag}")
        lines.append(f"{'total (all stages)':<{width}}{'':<7}{self.total_ns:>14,.1f}{self.total_share:>9.2f}%")
        lines.append(f"{'mitigation pipeline':<{width}}{'corr':<7}{self.pipeline_ns:>14,.1f}{self.pipeline_share:>9.2f}%")
        return "\n".join(lines)


def share_of_epoch(ns) -> float:
    return ns / EPOCH_NS * 100.0


def flop_report_text(rep: FlopReport) -> str:
    lines = [f"N={rep.N} g={rep.g} M={rep.M}"]
    lines += [f"  {name:<24}{count:>10,}" for name, count in rep.rows()]
    lines.append(f"  {'total':<24}{rep.total:>10,}")
    return "\n".join(lines)


def flop_report_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "g", "M", *STAGES, "total"])
    for r in reports:
        w.writerow([r.N, r.g, r.M, *(getattr(r, s) for s in STAGES), r.total])
    return buf.getvalue()


def _discriminators(E, P, L, Q, state):
    # normalized early-minus-late DLL, Costas PLL, cross/dot FLL, plus first/second-order filters
    dll = (abs(E) - abs(L)) / (abs(E) + abs(L) + 1e-12)
    pll = math.atan(Q / P) if P else 0.0
    fll = math.atan2(state[0] * Q - state[1] * P, state[0] * P + state[1] * Q)
    state[2] += 0.1 * pll + 0.01 * fll
    state[3] += 0.05 * dll
    state[0], state[1] = P, Q
    return state


def _time_batch(fn, n):
    clock = time.perf_counter_ns
    t0 = clock()
    for _ in range(n):
        fn()
    return (clock() - t0) / n


def _time_interleaved(fns, reps, warmup, batches=20):
    """Mean ns per call for each function.

    Calls are split into `batches` rounds that visit every function in turn,
    so slow drifts of the host hit all stages alike. Rounds slower than twice
    the median for a stage (preemption) are dropped before averaging.
    """
    for fn in fns:
        for _ in range(warmup):
            fn()
    per_batch = max(1, -(-reps // batches))
    samples = [[] for _ in fns]
    for _ in range(batches):
        for i, fn in enumerate(fns):
            samples[i].append(_time_batch(fn, per_batch))
    means = []
    for s in samples:
        s = np.asarray(s)
        keep = s[s <= 2 * np.median(s)]
        means.append(float(keep.mean()))
    return means


def benchmark_pipeline(cfg: ScenarioConfig, mmse_cfg: MmseConfig, reps: int = 1000,
                       fs: float = 5e6, f_if: float = 1.25e6, warmup: int = 50) -> TimingReport:
    """Time each epoch stage in isolation, then the whole sequence.

    Each stage is called at least `reps` times after `warmup` untimed calls,
    interleaved with the other stages; the reported figure is the mean time per
    call. Garbage collection is paused while timing.
    """
    if reps < 100:
        raise ValueError("reps must be >= 100")
    scen = Scenario(cfg)
    code = scen.code
    replica = scen.replica.as_float()
    M, g = mmse_cfg.M, mmse_cfg.g
    if len(replica) != mmse_cfg.N:
        raise ValueError("scenario N and MMSE N differ")

    n_samp = samples_per_epoch(fs)
    idx = chip_index(fs, CA_CHIP_RATE)
    native = code.as_float()
    rng = np.random.default_rng(cfg.seed)
    t = np.arange(n_samp) / fs
    raw = native[idx] * np.exp(2j * np.pi * f_if * t) + 0.1 * rng.standard_normal(n_samp)

    spec = cfg.interference
    if spec is not None:
        shifted = scen.interferer_codes.sum(axis=0)
        amp = scen.interferer_amp
    else:
        shifted = np.roll(native, -1)
        amp = 1.0

    win = AutocorrWindow(M, mmse_cfg.L, mmse_cfg.recompute_period)
    prefill = group_sums(scen.block(0, min(cfg.epochs, mmse_cfg.L)), replica, g)
    while not win.full:
        for c in prefill:
            win.push(c)
            if win.full:
                break
    R = win.mean()
    c_vec = prefill[-1].copy()
    weights = solve_weights(R, mmse_cfg)
    disc_state = [1.0, 0.0, 0.0, 0.0]
    sink = {}

    def carrier():
        sink["bb"] = carrier_wipeoff(raw, f_if, 0.3, fs)

    def code_corr():
        sink["ip"] = float(np.dot(native[idx], raw.real))

    def discriminators():
        _discriminators(1.2, 2.0, 0.8, 0.1, disc_state)

    def injection():
        sink["r"] = native + amp * shifted

    def preintegrate():
        x = chip_preintegrate(raw.real, fs)
        sink["c"] = group_sums(upsample_vector(x), replica, g)

    def accumulate():
        win.push(c_vec)

    def solve():
        sink["w"] = solve_weights(R, mmse_cfg).w

    def integrate():
        sink["d"] = complete_integrate(c_vec, weights.w)

    fns = [carrier, code_corr, discriminators, injection, preintegrate, accumulate, solve, integrate]
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        def everything():
            for fn in fns:
                fn()

        def mitigation():
            preintegrate()
            accumulate()
            solve()
            integrate()

        *means, total, pipeline = _time_interleaved(fns + [everything, mitigation], reps, warmup)
    finally:
        if gc_was_enabled:
            gc.enable()

    tick_ns = time.get_clock_info("perf_counter").resolution * 1e9
    rows = []
    for (name, scope), mean in zip(TIMING_STAGES, means):
        coarse = mean < 10 * tick_ns
        if coarse:
            warnings.warn(f"stage {name!r} is below 10 timer ticks; measurement is unreliable", stacklevel=2)
        rows.append(StageTiming(name, scope, mean, share_of_epoch(mean), coarse))
    params = {"N": mmse_cfg.N, "g": g, "M": M, "L": mmse_cfg.L, "fs": fs, "reps": reps}
    return TimingReport(rows, total, pipeline, reps, params)


def report_to_dict(rep: TimingReport) -> dict:
    return {"rows": [asdict(r) for r in rep.rows], "total_ns": rep.total_ns,
            "pipeline_ns": rep.pipeline_ns, "reps": rep.reps, "params": rep.params}
