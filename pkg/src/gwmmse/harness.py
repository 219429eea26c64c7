"""Monte Carlo BER-vs-ISR sweeps, per-epoch traces, and result files.

Work is cut into fixed-size chunks of scored epochs. Each chunk owns a seed
derived from (run seed, ISR, chunk index) and its own detector state, with a
lead-in long enough to fill every MMSE window. Chunks are independent, so the
result does not depend on how many worker processes share them.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .correlator import full_autocorrelation, group_sums, sign_bit, spd_solve
from .mmse import MmseChannel, MmseConfig, mse_estimate, save_snapshot
from .prn import worst_case_delays
from .signal import InterferenceSpec, MaiSource, NoiseSpec, Scenario, ScenarioConfig, native_code

WILSON_Z = 1.959963984540054
BER_CSV_HEADER = ("isr_db", "detector", "errors", "trials", "ber", "ci_low", "ci_high")
TRACE_HEADER = ("epoch", "truth_bit", "mf_d", "mmse_d", "warmup", "mse")
PAPER_SCALE_EPOCHS = 60_000_000  # 3e6 navigation bits of 20 epochs


def wilson_interval(errors: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    p = errors / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # clamp so cancellation never leaves the estimate outside its own interval
    return min(p, max(0.0, centre - half)), max(p, min(1.0, centre + half))


# ---------------------------------------------------------------- detectors

@dataclass(frozen=True)
class DetectorSpec:
    """Parsed detector name: ``mf``, ``mmse``, ``oracle`` with optional overrides.

    Overrides follow a colon, e.g. ``mmse:L=1200`` or ``mmse:g=32,L=100``.
    """

    label: str
    kind: str
    overrides: tuple = ()

    @classmethod
    def parse(cls, text: str) -> DetectorSpec:
        name, _, rest = text.strip().partition(":")
        kind = {"mf": "mf", "mmse": "mmse", "oracle": "oracle", "mmse-oracle": "oracle"}.get(name.lower())
        if kind is None:
            raise ValueError(f"unknown detector {text!r}")
        overrides = []
        for item in filter(None, rest.split(",")):
            key, eq, value = item.partition("=")
            if not eq or key not in ("g", "L", "eps", "nu", "solve_every"):
                raise ValueError(f"bad detector override {item!r} in {text!r}")
            overrides.append((key, float(value) if key in ("eps", "nu") else int(value)))
        if kind == "mf" and overrides:
            raise ValueError("mf takes no overrides")
        return cls(text.strip(), kind, tuple(overrides))

    def mmse_config(self, base: MmseConfig) -> MmseConfig:
        kw = dict(self.overrides)
        if self.kind == "oracle":
            kw["g"] = 1
        if "g" in kw and "L" not in kw:
            kw["L"] = None
        return replace(base, **kw)


class _OracleChannel:
    """Dense sliding-window MMSE on the full received vector; small N only."""

    def __init__(self, cfg: MmseConfig, code):
        if cfg.N > 128:
            raise ValueError("oracle detector is limited to N <= 128")
        self.cfg = cfg
        self.s = code.as_float()
        self.buf = []

    def step(self, r):
        self.buf.append(r)
        if len(self.buf) > self.cfg.L:
            self.buf.pop(0)
        if len(self.buf) < self.cfg.L:
            d = self.s @ r
            return d, True
        R = full_autocorrelation(self.buf).matrix
        h = self.cfg.p * spd_solve(R + self.cfg.regularization(R) * np.eye(len(R)), self.s)
        return h @ r, False


# ---------------------------------------------------------------- configuration

@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    mmse: MmseConfig = field(default_factory=MmseConfig)
    detectors: list[str] = field(default_factory=lambda: ["mf", "mmse"])
    isr_grid: list[float] = field(default_factory=lambda: [30.0])
    bits_target: int = 100_000
    seed: int = 0
    n_interferers: int = 1
    chunk_epochs: int = 10_000
    majority_vote: bool = False
    csv_path: str | None = None
    plot_path: str | None = None

    def validate(self):
        if self.bits_target < 1000:
            raise ValueError("bits_target must be >= 1000")
        if not self.isr_grid:
            raise ValueError("isr_grid must be nonempty")
        if list(self.isr_grid) != sorted(self.isr_grid):
            raise ValueError("isr_grid must be sorted")
        if not self.detectors:
            raise ValueError("detectors must be nonempty")
        if self.chunk_epochs < 1:
            raise ValueError("chunk_epochs must be >= 1")
        if not 0 <= self.n_interferers <= 3:
            raise ValueError("n_interferers must be in 0..3")
        if self.majority_vote and self.chunk_epochs % self.scenario.bit_period:
            raise ValueError("chunk_epochs must be a multiple of bit_period in majority-vote mode")
        if self.mmse.N != self.scenario.N:
            raise ValueError("scenario and MMSE disagree on N")
        for d in self.detectors:
            DetectorSpec.parse(d).mmse_config(self.mmse)

    def detector_specs(self):
        return [DetectorSpec.parse(d) for d in self.detectors]


def paper_scale(cfg: RunConfig) -> RunConfig:
    """Same run at the 60-million bit-sample length of the reference experiment."""
    return replace(cfg, bits_target=PAPER_SCALE_EPOCHS)


def _build(cls, data):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> RunConfig:
    data = copy.deepcopy(data)
    scen = data.pop("scenario", {}) or {}
    inter = scen.pop("interference", None)
    if inter is not None:
        if inter.get("delays") in (None, "auto"):
            inter["delays"] = []
        scen["interference"] = _build(InterferenceSpec, inter)
    if "noise" in scen:
        scen["noise"] = _build(NoiseSpec, scen["noise"] or {})
    scen["mai"] = [_build(MaiSource, m) for m in scen.get("mai", []) or []]
    outputs = data.pop("outputs", {}) or {}
    mmse = _build(MmseConfig, data.pop("mmse", {}) or {})
    return _build(RunConfig, {
        **data,
        "scenario": _build(ScenarioConfig, scen),
        "mmse": mmse,
        "csv_path": outputs.get("csv"),
        "plot_path": outputs.get("plot"),
    })


def config_to_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    inter = d["scenario"].get("interference")
    if inter is not None:
        inter.pop("bit_streams", None)
    d["outputs"] = {"csv": d.pop("csv_path"), "plot": d.pop("plot_path")}
    return d


def load_config(path) -> RunConfig:
    import yaml

    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    return config_from_dict(data)


def _resolve_interference(cfg: RunConfig, isr_db: float) -> ScenarioConfig:
    scen = copy.deepcopy(cfg.scenario)
    if cfg.n_interferers == 0:
        scen.interference = None
        return scen
    spec = scen.interference or InterferenceSpec(delays=[])
    if not spec.delays:
        code = native_code(scen)
        spec.delays = [lag for lag, _ in worst_case_delays(code, cfg.n_interferers)]
    elif len(spec.delays) != cfg.n_interferers:
        raise ValueError(f"{len(spec.delays)} delays configured for {cfg.n_interferers} interferers")
    spec.isr_db = isr_db
    scen.interference = spec
    return scen


def _chunk_seed(seed, isr_db, chunk) -> int:
    key = [int(seed), int(round(isr_db * 1000)) + 1_000_000, int(chunk)]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


# ---------------------------------------------------------------- sweep

@dataclass(frozen=True)
class BerRow:
    isr_db: float
    detector: str
    errors: int
    trials: int
    ber: float
    ci_low: float
    ci_high: float


@dataclass
class BerCurve:
    rows: list[BerRow]
    metadata: dict = field(default_factory=dict)

    def get(self, isr_db, detector) -> BerRow:
        for row in self.rows:
            if row.isr_db == isr_db and row.detector == detector:
                return row
        raise KeyError((isr_db, detector))

    def detectors(self):
        return list(dict.fromkeys(r.detector for r in self.rows))


def _lead_in(cfg: RunConfig, specs) -> int:
    lead = 0
    for spec in specs:
        if spec.kind != "mf":
            lead = max(lead, spec.mmse_config(cfg.mmse).L - 1)
    if cfg.majority_vote:
        period = cfg.scenario.bit_period
        lead = -(-lead // period) * period
    return lead


def _run_chunk(args):
    cfg, isr_db, chunk, n_score = args
    specs = cfg.detector_specs()
    lead = _lead_in(cfg, specs)
    scen_cfg = _resolve_interference(cfg, isr_db)
    scen_cfg.epochs = lead + n_score
    scen_cfg.seed = _chunk_seed(cfg.seed, isr_db, chunk)
    scen = Scenario(scen_cfg)
    replica = scen.replica
    s = replica.as_float()

    channels = {}
    for spec in specs:
        if spec.kind == "mmse":
            channels[spec.label] = MmseChannel(spec.mmse_config(cfg.mmse), replica)
        elif spec.kind == "oracle":
            channels[spec.label] = _OracleChannel(spec.mmse_config(cfg.mmse), replica)

    decisions = {spec.label: np.empty(n_score, dtype=np.int8) for spec in specs}
    block = 1024
    for a in range(0, scen_cfg.epochs, block):
        b = min(a + block, scen_cfg.epochs)
        r = scen.block(a, b)
        lo = max(a, lead)
        for spec in specs:
            out = decisions[spec.label]
            if spec.kind == "mf":
                if b > lead:
                    d = r[lo - a:] @ s
                    out[lo - lead:b - lead] = np.where(d >= 0, 1, -1)
                continue
            ch = channels[spec.label]
            if spec.kind == "mmse":
                c = group_sums(r, s, ch.cfg.g)
                for i in range(b - a):
                    dec = ch.step_partial(c[i])
                    if a + i >= lead:
                        out[a + i - lead] = dec.bit_decision
            else:
                for i in range(b - a):
                    d, _ = ch.step(r[i])
                    if a + i >= lead:
                        out[a + i - lead] = sign_bit(d)

    truth = scen.truth.bits[lead:]
    result = {}
    for spec in specs:
        dec = decisions[spec.label]
        if cfg.majority_vote:
            period = scen_cfg.bit_period
            # truth bit edges are at epochs == truth_phase_offset (mod period); align groups to them
            first = (scen_cfg.truth_phase_offset - lead) % period
            usable = (n_score - first) // period * period
            votes = dec[first:first + usable].reshape(-1, period).sum(axis=1)
            bit_dec = np.where(votes >= 0, 1, -1)
            bit_truth = truth[first:first + usable:period]
            result[spec.label] = (int(np.sum(bit_dec != bit_truth)), len(bit_truth))
        else:
            result[spec.label] = (int(np.sum(dec != truth)), n_score)
    return isr_db, chunk, result


def _tasks(cfg: RunConfig):
    tasks = []
    for isr in cfg.isr_grid:
        remaining, chunk = cfg.bits_target, 0
        while remaining > 0:
            n = min(cfg.chunk_epochs, remaining)
            tasks.append((cfg, float(isr), chunk, n))
            remaining -= n
            chunk += 1
    return tasks


def run_ber_sweep(cfg: RunConfig, shards: int = 1) -> BerCurve:
    """BER of every detector at every ISR point; one trial per scored epoch.

    With ``majority_vote`` a trial is instead one 20-epoch navigation bit
    decided by majority over its epochs.
    """
    cfg.validate()
    tasks = _tasks(cfg)
    if shards > 1:
        with ProcessPoolExecutor(max_workers=shards) as pool:
            results = list(pool.map(_run_chunk, tasks))
    else:
        results = [_run_chunk(t) for t in tasks]

    totals = {}
    for isr, _, res in sorted(results, key=lambda x: (x[0], x[1])):
        for label, (err, n) in res.items():
            e0, n0 = totals.get((isr, label), (0, 0))
            totals[(isr, label)] = (e0 + err, n0 + n)

    rows = []
    for isr in cfg.isr_grid:
        for label in cfg.detectors:
            err, n = totals[(float(isr), label)]
            lo, hi = wilson_interval(err, n)
            rows.append(BerRow(float(isr), label, err, n, err / n, lo, hi))
    return BerCurve(rows, metadata=config_to_dict(cfg))


# ---------------------------------------------------------------- trace

def run_scenario(cfg: RunConfig, path=None, isr_db: float | None = None, snapshot_path=None) -> str:
    """Per-epoch CSV trace of the matched filter and the configured MMSE channel.

    Runs ``cfg.scenario.epochs`` epochs. If `snapshot_path` is given the final
    channel state is saved there.
    """
    cfg.validate()
    if isr_db is None:
        inter = cfg.scenario.interference
        isr_db = inter.isr_db if inter is not None else cfg.isr_grid[-1]
    scen_cfg = _resolve_interference(cfg, isr_db)
    scen_cfg.seed = _chunk_seed(cfg.seed, isr_db, 0)
    scen = Scenario(scen_cfg)
    replica = scen.replica
    s = replica.as_float()
    ch = MmseChannel(cfg.mmse, replica)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for a in range(0, scen_cfg.epochs, 1024):
        b = min(a + 1024, scen_cfg.epochs)
        r = scen.block(a, b)
        mf = r @ s
        c = group_sums(r, s, cfg.mmse.g)
        for i in range(b - a):
            dec = ch.step_partial(c[i])
            mse = float("nan") if dec.warmup else mse_estimate(ch.weights.w, ch.window.mean(), ch.cfg)
            w.writerow([a + i, int(scen.truth.bits[a + i]), repr(float(mf[i])), repr(dec.d),
                        int(dec.warmup), repr(mse)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    if snapshot_path is not None:
        save_snapshot(ch, snapshot_path)
    return text


# ---------------------------------------------------------------- outputs

def ber_csv(curve: BerCurve) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(curve.metadata, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BER_CSV_HEADER)
    for r in curve.rows:
        w.writerow([repr(r.isr_db), r.detector, r.errors, r.trials, repr(r.ber), repr(r.ci_low), repr(r.ci_high)])
    return buf.getvalue()


def read_ber_csv(path) -> BerCurve:
    lines = Path(path).read_text().splitlines()
    metadata = {}
    body = []
    for line in lines:
        if line.startswith("# config: "):
            metadata = json.loads(line[len("# config: "):])
        elif not line.startswith("#"):
            body.append(line)
    reader = csv.reader(body)
    header = tuple(next(reader))
    if header != BER_CSV_HEADER:
        raise ValueError(f"unexpected BER CSV header {header}")
    rows = [BerRow(float(a), b, int(c), int(d), float(e), float(f), float(g)) for a, b, c, d, e, f, g in reader]
    return BerCurve(rows, metadata)


def plot_curve(curve: BerCurve, path) -> None:
    """log10(BER) vs ISR, one series per detector; zero-error points drawn hollow at the Wilson upper bound."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "gwmmse"
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for i, det in enumerate(curve.detectors()):
        rows = [r for r in curve.rows if r.detector == det]
        x = np.array([r.isr_db for r in rows])
        y = np.array([r.ber if r.errors else r.ci_high for r in rows])
        zero = np.array([r.errors == 0 for r in rows])
        color = f"C{i}"
        ax.plot(x, np.log10(y), "-", color=color, label=det)
        ax.plot(x[~zero], np.log10(y[~zero]), "o", color=color)
        if zero.any():
            ax.plot(x[zero], np.log10(y[zero]), "v", mfc="none", color=color)
    ax.set_xlabel("ISR (dB)")
    ax.set_ylabel("log10(BER)")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_outputs(curve: BerCurve, csv_path=None, plot_path=None) -> list[Path]:
    if not curve.rows:
        raise ValueError("empty BER curve")
    written = []
    if csv_path is not None:
        Path(csv_path).write_text(ber_csv(curve))
        written.append(Path(csv_path))
    if plot_path is not None:
        plot_curve(curve, plot_path)
        written.append(Path(plot_path))
    return written
