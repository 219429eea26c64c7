"""Group-weighted MMSE despreading: sliding-window autocorrelation, weight solve, channel loop."""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .correlator import (
    DecisionOutput,
    complete_integrate,
    partial_integrate_dump,
    sign_bit,
    spd_solve,
)
from .errors import IqFormatError, NumericError
from .flops import FlopCounter
from .prn import PrnCode

# (g, L) pairs known to work at N = 1024; (64, 300) is the default trade-off
CALIBRATED_PAIRS = {1: 1500, 2: 1000, 4: 1000, 8: 1000, 16: 500, 32: 100, 64: 300}
HEAVY_PAIR = (64, 1200)


@dataclass
class MmseConfig:
    """Group size, window length and regularization of one MMSE correlator.

    ``nu`` is an absolute regularization value; when it is None the solver
    uses ``eps * trace(R) / M`` which tracks the received power.
    """

    g: int = 64
    L: int | None = None
    N: int = 1024
    p: float = 1.0
    nu: float | None = None
    eps: float = 1e-3
    solve_every: int = 1
    recompute_period: int | None = None

    def __post_init__(self):
        if self.g < 1 or self.N % self.g:
            raise ValueError(f"group size {self.g} does not divide N={self.N}")
        if self.L is None:
            self.L = CALIBRATED_PAIRS.get(self.g, 300)
        if self.L < 1:
            raise ValueError("window size L must be >= 1")
        if self.p <= 0:
            raise ValueError("p must be positive")
        if self.solve_every < 1:
            raise ValueError("solve_every must be >= 1")
        if self.nu is not None and self.nu < 0:
            raise ValueError("nu must be >= 0")
        if self.L < self.M:
            warnings.warn(f"L={self.L} < M={self.M}: window autocorrelation is rank deficient", stacklevel=2)

    @property
    def M(self) -> int:
        return self.N // self.g

    def regularization(self, R) -> float:
        if self.nu is not None:
            return float(self.nu)
        return self.eps * float(np.trace(R)) / len(R)


class AutocorrWindow:
    """FIFO of the last L partial-correlation vectors with a running outer-product sum.

    Storage is a fixed (L, M) ring allocated once. Each push adds the new outer
    product and, once full, subtracts the evicted one. Every
    `recompute_period` pushes the sum is rebuilt from the FIFO to cancel
    floating-point drift.
    """

    def __init__(self, M: int, L: int, recompute_period: int | None = None):
        if M < 1 or L < 1:
            raise ValueError("M and L must be positive")
        self.M = M
        self.L = L
        self.recompute_period = recompute_period or max(10 * L, 10_000)
        self.fifo = np.zeros((L, M))
        self.accumulator = np.zeros((M, M))
        self.count = 0
        self.head = 0  # slot of the oldest vector once full
        self.pushes = 0

    def push(self, c, flops: FlopCounter | None = None) -> AutocorrWindow:
        c = np.asarray(getattr(c, "values", c), dtype=np.float64)
        if c.shape != (self.M,):
            raise ValueError(f"expected a length-{self.M} vector, got shape {c.shape}")
        if self.count < self.L:
            self.accumulator += np.outer(c, c)
            self.fifo[self.count] = c
            self.count += 1
        else:
            old = self.fifo[self.head]
            self.accumulator += np.outer(c, c) - np.outer(old, old)
            self.fifo[self.head] = c
            self.head = (self.head + 1) % self.L
            if flops is not None:
                flops.charge("old_outer", self.M * self.M)
        if flops is not None:
            flops.charge("new_outer", self.M * self.M)
            flops.charge("accumulate", 3 * self.M * self.M)
        self.pushes += 1
        if self.pushes % self.recompute_period == 0:
            self.recompute()
        return self

    def contents(self) -> np.ndarray:
        """Held vectors, oldest first."""
        if self.count < self.L:
            return self.fifo[: self.count].copy()
        return np.roll(self.fifo, -self.head, axis=0)

    def recompute(self):
        held = self.fifo[: self.count] if self.count < self.L else self.fifo
        self.accumulator = held.T @ held

    @property
    def full(self) -> bool:
        return self.count == self.L

    def mean(self) -> np.ndarray:
        if self.count == 0:
            raise ValueError("empty window")
        return self.accumulator / self.count


def window_push(win: AutocorrWindow, c_new, flops=None) -> AutocorrWindow:
    return win.push(c_new, flops)


def batch_autocorrelation(history) -> np.ndarray:
    """Mean of c c^T over the given vectors."""
    X = np.asarray([getattr(c, "values", c) for c in history], dtype=np.float64)
    if X.size == 0:
        raise ValueError("empty history")
    return X.T @ X / len(X)


@dataclass(frozen=True)
class MmseWeights:
    w: np.ndarray
    g: int
    solved_at_epoch: int = -1
    h: np.ndarray | None = field(default=None, repr=False)

    def despreading_code(self, code: PrnCode) -> np.ndarray:
        """Length-N code h[j] = w[j // g] * s[j]."""
        return np.repeat(self.w, self.g) * code.as_float()


def solve_weights(R, cfg: MmseConfig, *, code: PrnCode | None = None, epoch: int = -1,
                  flops: FlopCounter | None = None) -> MmseWeights:
    """w = g p (R + nu I)^-1 1 by Cholesky."""
    R = np.asarray(R, dtype=np.float64)
    if not np.all(np.isfinite(R)):
        raise NumericError("non-finite autocorrelation matrix")
    M = len(R)
    nu = cfg.regularization(R)
    w = cfg.g * cfg.p * spd_solve(R + nu * np.eye(M), np.ones(M))
    if flops is not None:
        flops.charge("solve", 2 * M + M * M + M ** 3)
    h = None if code is None else np.repeat(w, cfg.g) * code.as_float()
    return MmseWeights(w, cfg.g, epoch, h)


def mse_estimate(w, R, cfg: MmseConfig) -> float:
    """Normalized MSE as a quadratic in w: 1 - 2g w.1 + w^T R w / p."""
    w = np.asarray(getattr(w, "w", w), dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (len(w), len(w)):
        raise ValueError(f"dimension mismatch: w {w.shape} vs R {R.shape}")
    return float(1.0 - 2.0 * cfg.g * w.sum() + w @ R @ w / cfg.p)


def estimate_signal_power(d_values, N) -> float:
    """Power estimate mean(d^2) / N^2 from clean matched-filter outputs."""
    d = np.asarray(d_values, dtype=np.float64)
    return float(np.mean(d ** 2) / N ** 2)


class MmseChannel:
    """Per-channel MMSE correlator state.

    Until the window holds L vectors the channel falls back to unit weights
    (the matched filter) and flags its decisions as warm-up.
    """

    def __init__(self, cfg: MmseConfig, code: PrnCode, flops: FlopCounter | None = None):
        if code.length != cfg.N:
            raise ValueError(f"code length {code.length} != N={cfg.N}")
        self.cfg = cfg
        self.code = code
        self.window = AutocorrWindow(cfg.M, cfg.L, cfg.recompute_period)
        self.weights: MmseWeights | None = None
        self.epoch = 0
        self.flops = flops
        self._since_solve = 0

    def step_partial(self, c) -> DecisionOutput:
        """Advance one epoch given its partial correlations."""
        values = np.asarray(getattr(c, "values", c), dtype=np.float64)
        self.window.push(values, self.flops)
        epoch = self.epoch
        self.epoch += 1
        if not self.window.full:
            return DecisionOutput(float(values.sum()), sign_bit(values.sum()), warmup=True)
        if self.weights is None or self._since_solve + 1 >= self.cfg.solve_every:
            self.weights = solve_weights(self.window.mean(), self.cfg, epoch=epoch, flops=self.flops)
            self._since_solve = 0
        else:
            self._since_solve += 1
        return complete_integrate(values, self.weights.w, self.flops)

    def step(self, r) -> DecisionOutput:
        c = partial_integrate_dump(r, self.code, self.cfg.g, self.flops)
        return self.step_partial(c.values)

    def current_mse(self) -> float:
        if self.weights is None:
            return float("nan")
        return mse_estimate(self.weights.w, self.window.mean(), self.cfg)


def mmse_channel_step(state: MmseChannel, r, code=None, cfg=None):
    """Functional form of `MmseChannel.step`; returns (decision, state)."""
    if code is not None and code is not state.code and code != state.code:
        raise ValueError("code differs from the channel's code")
    return state.step(r), state


# ---------------------------------------------------------------- snapshots
#
# little-endian layout:
#   magic b"GWMS", u16 version=1, u16 reserved
#   u32 M, u32 L, u32 count, u32 head, u32 g, u32 N, u64 epoch, u64 pushes
#   f64 p, f64 nu (NaN when derived), f64 eps, u8 has_weights, 7 pad bytes
#   f64[L*M] fifo (ring order, row-major), f64[M*M] accumulator, f64[M] w (if present)

SNAPSHOT_MAGIC = b"GWMS"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sHH6IQQdddB7x")


def save_snapshot(channel: MmseChannel, path) -> None:
    cfg, win = channel.cfg, channel.window
    has_w = channel.weights is not None
    header = _HEADER.pack(
        SNAPSHOT_MAGIC, SNAPSHOT_VERSION, 0,
        win.M, win.L, win.count, win.head, cfg.g, cfg.N,
        channel.epoch, win.pushes,
        cfg.p, float("nan") if cfg.nu is None else cfg.nu, cfg.eps, int(has_w),
    )
    parts = [header, win.fifo.astype("<f8").tobytes(), win.accumulator.astype("<f8").tobytes()]
    if has_w:
        parts.append(channel.weights.w.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


@dataclass
class Snapshot:
    cfg: MmseConfig
    fifo: np.ndarray
    accumulator: np.ndarray
    weights: np.ndarray | None
    count: int
    head: int
    epoch: int
    pushes: int


def load_snapshot(path) -> Snapshot:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise IqFormatError(f"{path}: too short for a snapshot header")
    (magic, version, _, M, L, count, head, g, N, epoch, pushes,
     p, nu, eps, has_w) = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise IqFormatError(f"{path}: bad magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise IqFormatError(f"{path}: unsupported snapshot version {version}")
    expected = _HEADER.size + 8 * (L * M + M * M + (M if has_w else 0))
    if len(data) != expected:
        raise IqFormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    off = _HEADER.size
    fifo = np.frombuffer(data, "<f8", L * M, off).reshape(L, M).copy()
    off += 8 * L * M
    acc = np.frombuffer(data, "<f8", M * M, off).reshape(M, M).copy()
    off += 8 * M * M
    w = np.frombuffer(data, "<f8", M, off).copy() if has_w else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = MmseConfig(g=g, L=L, N=N, p=p, nu=None if np.isnan(nu) else nu, eps=eps)
    return Snapshot(cfg, fifo, acc, w, count, head, epoch, pushes)


def restore_channel(snap: Snapshot, code: PrnCode) -> MmseChannel:
    """Resume a channel from a snapshot."""
    ch = MmseChannel(snap.cfg, code)
    ch.window.fifo[:] = snap.fifo
    ch.window.accumulator[:] = snap.accumulator
    ch.window.count = snap.count
    ch.window.head = snap.head
    ch.window.pushes = snap.pushes
    ch.epoch = snap.epoch
    if snap.weights is not None:
        ch.weights = MmseWeights(snap.weights, snap.cfg.g, snap.epoch - 1)
    return ch
