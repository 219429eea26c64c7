"""Received-signal composition at chip rate, sample-rate synthesis, and file I/O.

A received epoch is the authentic code scaled by its bit and amplitude, plus
delayed replicas of that code carrying spoofer bits, plus optional
other-satellite codes and white noise. Everything is injected after carrier
wipe-off, so no Doppler appears on any term.

When ``N == 1024`` the scenario code is the native 1023-chip C/A code: every
term is built at the native length (delays are circular over 1023 chips, like
a real periodic signal) and the composed vector is then up-sampled.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IqFormatError
from .prn import PrnCode, generate_ca_code, synthetic_code, upsample_code, upsample_vector

CA_CHIP_RATE = 1_023_000

# child indices of the scenario SeedSequence
_TRUTH, _INTERFERER, _MAI, _NOISE = range(4)


# ---------------------------------------------------------------- bits

@dataclass(frozen=True)
class NavBitStream:
    """Per-epoch +/-1 bits, constant over each `bit_period` block.

    The first bit edge falls on epoch `phase_offset`; epochs before it belong
    to a partial leading bit.
    """

    bits: np.ndarray
    bit_period: int = 20
    phase_offset: int = 0
    seed: int | tuple = 0

    def __len__(self):
        return len(self.bits)


def _bit_rng(seed):
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    if isinstance(seed, (tuple, list)):
        return np.random.default_rng(list(seed))
    return np.random.default_rng(seed)


def generate_nav_bits(seed, length_epochs, bit_period=20, phase_offset=0) -> NavBitStream:
    if length_epochs < 1:
        raise ValueError("length_epochs must be >= 1")
    if bit_period < 1:
        raise ValueError("bit_period must be >= 1")
    if not 0 <= phase_offset < bit_period:
        raise ValueError(f"phase_offset must be in [0, {bit_period}), got {phase_offset}")
    rng = _bit_rng(seed)
    period_index = (np.arange(length_epochs) + bit_period - phase_offset) // bit_period
    n_periods = int(period_index[-1]) + 1
    values = rng.choice(np.array([-1, 1], dtype=np.int8), size=n_periods)
    bits = values[period_index]
    bits.setflags(write=False)
    return NavBitStream(bits, bit_period, phase_offset, seed)


# ---------------------------------------------------------------- configuration

@dataclass
class InterferenceSpec:
    """Spoofer replicas of the authentic code.

    ``aligned`` puts every interferer on the same bit-edge phase; their bit
    polarities stay independent unless ``shared_bits`` is set. ``isr_mode``
    is ``"per-interferer"`` (each replica carries the full ISR) or
    ``"total"`` (the ISR power is split evenly).
    """

    delays: list[int]
    isr_db: float = 30.0
    aligned: bool = True
    phase_offset: int = 7
    shared_bits: bool = False
    isr_mode: str = "per-interferer"
    bit_streams: list | None = None

    def validate(self, code_length):
        if not 1 <= len(self.delays) <= 3:
            raise ValueError(f"1 to 3 interferers supported, got {len(self.delays)}")
        for d in self.delays:
            if not 1 <= d <= code_length - 1:
                raise ValueError(f"delay {d} outside 1..{code_length - 1}")
        if self.isr_mode not in ("per-interferer", "total"):
            raise ValueError(f"unknown isr_mode {self.isr_mode!r}")
        if self.bit_streams is not None and len(self.bit_streams) != len(self.delays):
            raise ValueError("need one bit stream per interferer")

    def amplitude(self, signal_power):
        power = signal_power * 10.0 ** (self.isr_db / 10.0)
        if self.isr_mode == "total":
            power /= len(self.delays)
        return math.sqrt(power)


@dataclass
class NoiseSpec:
    enabled: bool = False
    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass
class MaiSource:
    """Another satellite's code at a fixed code phase."""

    prn: int
    power: float = 1.0
    code_phase: int = 0


@dataclass
class ScenarioConfig:
    prn_id: int = 1
    N: int = 1024
    signal_power: float = 1.0
    interference: InterferenceSpec | None = None
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    mai: list[MaiSource] = field(default_factory=list)
    epochs: int = 1000
    seed: int = 0
    bit_period: int = 20
    truth_phase_offset: int = 0
    code_seed: int | None = None  # set to use a random length-N code instead of the C/A code

    def validate(self, code: PrnCode | None = None):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.signal_power <= 0:
            raise ValueError("signal_power must be positive")
        if code is not None:
            if code.length not in (self.N, self.N - 1):
                raise ValueError(f"code length {code.length} incompatible with N={self.N}")
            if self.interference is not None:
                self.interference.validate(code.length)


def native_code(cfg: ScenarioConfig) -> PrnCode:
    """The code a scenario is built from: the C/A code of ``cfg.prn_id``, or a synthetic one."""
    if cfg.code_seed is not None:
        return synthetic_code(cfg.code_seed, cfg.N)
    return generate_ca_code(cfg.prn_id)


def receiver_code(code: PrnCode, N: int) -> PrnCode:
    """Replica the receiver correlates against (up-sampled when N = length + 1)."""
    if code.length == N:
        return code
    if code.length + 1 == N:
        return upsample_code(code)
    raise ValueError(f"code length {code.length} incompatible with N={N}")


@dataclass(frozen=True)
class EpochVector:
    samples: np.ndarray
    epoch_index: int
    truth_bit: int
    signal_power: float
    interferer_bits: tuple = ()

    def __len__(self):
        return len(self.samples)


class Scenario:
    """A configuration materialized against a code: bit streams and replicas.

    Random draws are keyed by (seed, purpose[, epoch]) so any epoch range can
    be produced independently and reproducibly.
    """

    def __init__(self, cfg: ScenarioConfig, code: PrnCode | None = None):
        code = native_code(cfg) if code is None else code
        cfg.validate(code)
        self.cfg = cfg
        self.code = code
        self.replica = receiver_code(code, cfg.N)
        self._upsample = code.length != cfg.N
        self._seq = np.random.SeedSequence(cfg.seed)
        children = self._seq.spawn(4)
        n = cfg.epochs

        self.truth = generate_nav_bits(children[_TRUTH], n, cfg.bit_period, cfg.truth_phase_offset)
        self.amp = math.sqrt(cfg.signal_power)
        s = code.as_float()

        spec = cfg.interference
        self.interferer_streams: list[NavBitStream] = []
        self.interferer_codes = np.zeros((0, code.length))
        self.interferer_amp = 0.0
        if spec is not None:
            if spec.bit_streams is not None:
                streams = list(spec.bit_streams)
                for st in streams:
                    if len(st) < n:
                        raise ValueError("interferer bit stream shorter than scenario")
            else:
                seeds = children[_INTERFERER].spawn(len(spec.delays))
                offsets = [spec.phase_offset] * len(spec.delays)
                if not spec.aligned:
                    offsets = [(spec.phase_offset + 5 * j) % cfg.bit_period for j in range(len(spec.delays))]
                streams = [generate_nav_bits(sd, n, cfg.bit_period, off) for sd, off in zip(seeds, offsets)]
                if spec.shared_bits:
                    streams = [streams[0]] * len(spec.delays)
            self.interferer_streams = streams
            self.interferer_codes = np.stack([np.roll(s, -d) for d in spec.delays])
            self.interferer_amp = spec.amplitude(cfg.signal_power)

        self.mai_streams = []
        self.mai_codes = np.zeros((0, code.length))
        self.mai_amps = np.zeros(0)
        if cfg.mai:
            seeds = children[_MAI].spawn(len(cfg.mai))
            for src, sd in zip(cfg.mai, seeds):
                if src.prn == cfg.prn_id:
                    raise ValueError("MAI source must be a different PRN")
                self.mai_streams.append(generate_nav_bits(sd, n, cfg.bit_period, 0))
            mai_native = []
            for src in cfg.mai:
                other = generate_ca_code(src.prn).as_float()
                if len(other) != code.length:
                    raise ValueError("MAI requires C/A-length scenario codes")
                mai_native.append(np.roll(other, -src.code_phase))
            self.mai_codes = np.stack(mai_native)
            self.mai_amps = np.sqrt([src.power for src in cfg.mai])
        self._noise_seq = children[_NOISE]

    @property
    def epochs(self):
        return self.cfg.epochs

    def interferer_bits(self, start, stop) -> np.ndarray:
        if not self.interferer_streams:
            return np.zeros((stop - start, 0))
        return np.stack([st.bits[start:stop] for st in self.interferer_streams], axis=1)

    def block(self, start: int, stop: int) -> np.ndarray:
        """Received vectors for epochs [start, stop) as a (stop-start, N) array."""
        if not 0 <= start <= stop <= self.cfg.epochs:
            raise ValueError(f"epoch range [{start}, {stop}) outside scenario")
        s = self.code.as_float()
        tb = self.truth.bits[start:stop].astype(np.float64)
        r = np.outer(tb * self.amp, s)
        if self.interferer_streams:
            ib = self.interferer_bits(start, stop).astype(np.float64)
            r += (self.interferer_amp * ib) @ self.interferer_codes
        if self.mai_streams:
            mb = np.stack([st.bits[start:stop] for st in self.mai_streams], axis=1)
            r += (mb * self.mai_amps) @ self.mai_codes
        if self._upsample:
            r = upsample_vector(r)
        noise = self.cfg.noise
        if noise.enabled and noise.sigma > 0:
            for i, e in enumerate(range(start, stop)):
                rng = np.random.default_rng([*_entropy_key(self._noise_seq), e])
                r[i] += noise.sigma * rng.standard_normal(self.cfg.N)
        return r

    def epoch(self, epoch_index: int) -> EpochVector:
        samples = self.block(epoch_index, epoch_index + 1)[0]
        ib = tuple(int(b) for b in self.interferer_bits(epoch_index, epoch_index + 1)[0])
        return EpochVector(
            samples=samples,
            epoch_index=epoch_index,
            truth_bit=int(self.truth.bits[epoch_index]),
            signal_power=self.cfg.signal_power,
            interferer_bits=ib,
        )


def _entropy_key(seq: np.random.SeedSequence):
    ent = seq.entropy if isinstance(seq.entropy, (list, tuple)) else [seq.entropy]
    return [*ent, *seq.spawn_key]


def compose_epoch(cfg: ScenarioConfig, code: PrnCode, epoch_index: int) -> EpochVector:
    """Single received epoch; for streams of epochs build a `Scenario` once."""
    if not 0 <= epoch_index < cfg.epochs:
        raise ValueError(f"epoch_index {epoch_index} outside 0..{cfg.epochs - 1}")
    return Scenario(cfg, code).epoch(epoch_index)


# ---------------------------------------------------------------- sample rate

def samples_per_epoch(fs) -> int:
    return int(round(fs * 1e-3))


@functools.lru_cache(maxsize=16)
def _chip_layout(fs, f_chip):
    n = np.arange(samples_per_epoch(fs))
    if float(fs).is_integer() and float(f_chip).is_integer():
        idx = (n * int(f_chip)) // int(fs)
    else:
        idx = np.floor(n * (f_chip / fs)).astype(np.int64)
    starts = np.flatnonzero(np.diff(idx, prepend=-1))
    idx.setflags(write=False)
    starts.setflags(write=False)
    return idx, starts


def chip_index(fs, f_chip=CA_CHIP_RATE) -> np.ndarray:
    """Chip number of every sample in a 1 ms block, by accumulated chip phase."""
    return _chip_layout(float(fs), float(f_chip))[0]


def sample_rate_synthesize(code: PrnCode, bit, power, fs, f_chip=CA_CHIP_RATE) -> np.ndarray:
    """1 ms of zero-Doppler baseband I/Q; each chip held over its sample span, Q = 0."""
    if fs < f_chip:
        raise ValueError(f"fs={fs} below chip rate {f_chip}")
    idx = chip_index(fs, f_chip)
    if idx[-1] >= code.length:
        raise ValueError("code shorter than one millisecond at this chip rate")
    i = bit * math.sqrt(power) * code.as_float()[idx]
    return i.astype(np.complex128)


def chip_preintegrate(samples, fs, f_chip=CA_CHIP_RATE) -> np.ndarray:
    """Sum the samples within each chip of a 1 ms block."""
    samples = np.asarray(samples)
    if samples.shape[-1] != samples_per_epoch(fs):
        raise ValueError(f"expected {samples_per_epoch(fs)} samples, got {samples.shape[-1]}")
    starts = _chip_layout(float(fs), float(f_chip))[1]
    return np.add.reduceat(samples, starts, axis=-1)


def carrier_wipeoff(samples, f_if, phase, fs) -> np.ndarray:
    """Rotate by exp(-j(2 pi f_if t + phase)), t = n / fs."""
    samples = np.asarray(samples)
    t = np.arange(samples.shape[-1]) / fs
    return samples * np.exp(-1j * (2 * np.pi * f_if * t + phase))


# ---------------------------------------------------------------- raw I-Q files

def _sidecar(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def quantize_iq(block, scale=None):
    """Interleaved int8 I/Q with symmetric scaling to +/-127; saturates."""
    block = np.asarray(block, dtype=np.complex128)
    if scale is None:
        peak = max(np.abs(block.real).max(initial=0), np.abs(block.imag).max(initial=0))
        scale = 127.0 / peak if peak > 0 else 1.0
    inter = np.empty(2 * len(block))
    inter[0::2] = block.real
    inter[1::2] = block.imag
    q = np.clip(np.rint(inter * scale), -128, 127).astype(np.int8)
    return q, float(scale)


def write_raw_iq(block, path, scale=None, **metadata) -> dict:
    """Write int8 interleaved I/Q plus a JSON sidecar holding scale and metadata."""
    q, scale = quantize_iq(block, scale)
    Path(path).write_bytes(q.tobytes())
    meta = {"format": "int8-iq-interleaved", "scale": scale, "samples": len(q) // 2, **metadata}
    _sidecar(path).write_text(json.dumps(meta, indent=2, sort_keys=True, default=str))
    return meta


def read_raw_iq(path, raw=False):
    """Read an int8 I/Q file.

    With ``raw=True`` the interleaved int8 array is returned untouched;
    otherwise complex samples divided by the sidecar scale (1 if absent).
    """
    data = Path(path).read_bytes()
    if len(data) % 2:
        raise IqFormatError(f"{path}: odd byte count {len(data)}, truncated I/Q pair")
    q = np.frombuffer(data, dtype=np.int8)
    if raw:
        return q
    scale = read_iq_metadata(path).get("scale", 1.0)
    return (q[0::2].astype(np.float64) + 1j * q[1::2]) / scale


def read_iq_metadata(path) -> dict:
    side = _sidecar(path)
    if not side.exists():
        return {}
    return json.loads(side.read_text())


# ---------------------------------------------------------------- chip-level dumps

def write_epoch_dump(epochs, path) -> None:
    """float32, N values per epoch, epoch-major."""
    np.asarray(epochs, dtype="<f4").tofile(path)


def read_epoch_dump(path, N) -> np.ndarray:
    data = np.fromfile(path, dtype="<f4")
    if data.size % N:
        raise IqFormatError(f"{path}: {data.size} values is not a multiple of N={N}")
    return data.reshape(-1, N)
