"""GPS C/A Gold codes, synthetic short codes, and circular correlation analysis.

Chip convention: the G1 xor G2 output bit 1 maps to chip -1, bit 0 to +1.
Under this mapping PRN 1 starts with binary 1100100000 (octal 1440), i.e.
chips ``-1 -1 +1 +1 -1 +1 +1 +1 +1 +1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CA_LENGTH = 1023
UPSAMPLED_LENGTH = 1024

# G2 output delay (chips) for PRN 1..32, equivalent to the two-tap phase selector.
G2_DELAY = (
    5, 6, 7, 8, 17, 18, 139, 140, 141, 251,
    252, 254, 255, 256, 257, 258, 469, 470, 471, 472,
    473, 474, 509, 512, 513, 514, 515, 516, 859, 860,
    861, 862,
)


@dataclass(frozen=True)
class PrnCode:
    """An immutable +/-1 spreading sequence."""

    chips: np.ndarray
    id: int | str = 0

    def __post_init__(self):
        chips = np.array(self.chips, dtype=np.int8)
        if chips.ndim != 1:
            raise ValueError("chips must be one-dimensional")
        if not np.all((chips == 1) | (chips == -1)):
            raise ValueError("every chip must be +1 or -1")
        chips.setflags(write=False)
        object.__setattr__(self, "chips", chips)

    @property
    def length(self) -> int:
        return len(self.chips)

    def __len__(self):
        return len(self.chips)

    def as_float(self) -> np.ndarray:
        return self.chips.astype(np.float64)

    def shifted(self, delay: int) -> PrnCode:
        """Code delayed circularly by `delay` chips: out[n] = chips[(n + delay) % length]."""
        return PrnCode(np.roll(self.chips, -int(delay)), id=self.id)

    def __eq__(self, other):
        if not isinstance(other, PrnCode):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.chips, other.chips)

    def __hash__(self):
        return hash((self.id, self.chips.tobytes()))


def _msequence(feedback_taps):
    """One period of a 10-stage all-ones-seeded LFSR, output taken from stage 10."""
    reg = [1] * 10
    out = np.empty(CA_LENGTH, dtype=np.int8)
    for n in range(CA_LENGTH):
        out[n] = reg[9]
        fb = 0
        for t in feedback_taps:
            fb ^= reg[t - 1]
        reg = [fb] + reg[:9]
    return out


_G1 = _msequence((3, 10))
_G2 = _msequence((2, 3, 6, 8, 9, 10))


def generate_ca_code(prn_id: int) -> PrnCode:
    """1023-chip C/A code for satellite `prn_id` (1..32)."""
    if not isinstance(prn_id, (int, np.integer)) or not 1 <= prn_id <= 32:
        raise ValueError(f"prn_id must be an integer in 1..32, got {prn_id!r}")
    delay = G2_DELAY[prn_id - 1]
    bits = _G1 ^ np.roll(_G2, delay)
    return PrnCode(1 - 2 * bits.astype(np.int8), id=int(prn_id))


def synthetic_code(seed: int, length: int) -> PrnCode:
    """Deterministic pseudo-random +/-1 code; used for small-N oracle tests."""
    if length < 2:
        raise ValueError(f"length must be >= 2, got {length}")
    rng = np.random.default_rng([int(seed), int(length)])
    chips = rng.choice(np.array([-1, 1], dtype=np.int8), size=length)
    return PrnCode(chips, id=f"syn{seed}")


def upsample_code(code: PrnCode) -> PrnCode:
    """Extend a 1023-chip code to 1024 chips by repeating the final chip."""
    if code.length != CA_LENGTH:
        raise ValueError(f"expected a {CA_LENGTH}-chip code, got {code.length}")
    return PrnCode(np.append(code.chips, code.chips[-1]), id=code.id)


def upsample_vector(x: np.ndarray) -> np.ndarray:
    """Same padding rule as `upsample_code`, applied along the last axis."""
    x = np.asarray(x)
    return np.concatenate([x, x[..., -1:]], axis=-1)


@dataclass(frozen=True)
class CorrelationProfile:
    values: np.ndarray
    peak_lag: int
    sidelobes: list = field(repr=False)


def circular_correlation(a, b) -> np.ndarray:
    """values[tau] = sum_n a[n] * b[(n + tau) % len] for every lag, as exact integers."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = a.shape[-1]
    spec = np.conj(np.fft.rfft(a, axis=-1)) * np.fft.rfft(b, axis=-1)
    return np.rint(np.fft.irfft(spec, n=n, axis=-1)).astype(np.int64)


def _ranked_lags(values, exclude):
    # descending |value|, ties to the smaller lag
    lags = np.arange(len(values))
    order = np.lexsort((lags, -np.abs(values)))
    return [int(k) for k in order if k != exclude]


def correlation_profile(a: PrnCode, b: PrnCode) -> CorrelationProfile:
    if a.length != b.length:
        raise ValueError(f"length mismatch: {a.length} vs {b.length}")
    values = circular_correlation(a.chips, b.chips)
    peak = int(_ranked_lags(values, exclude=None)[0])
    sidelobes = [(k, int(values[k])) for k in _ranked_lags(values, exclude=peak)]
    values.setflags(write=False)
    return CorrelationProfile(values=values, peak_lag=peak, sidelobes=sidelobes)


def worst_case_delays(code: PrnCode, count: int) -> list[tuple[int, int]]:
    """The `count` nonzero lags with the largest |autocorrelation|.

    These are the chip delays at which a replayed copy of the code leaks the
    most power into the prompt correlator.
    """
    if not 1 <= count <= code.length - 1:
        raise ValueError(f"count must be in 1..{code.length - 1}, got {count}")
    values = circular_correlation(code.chips, code.chips)
    lags = _ranked_lags(values, exclude=0)[:count]
    return [(k, int(values[k])) for k in lags]


# ---------------------------------------------------------------- export

def write_code_text(code: PrnCode, path) -> None:
    """One chip per line, written as ``1`` or ``-1``."""
    Path(path).write_text("".join(f"{int(c)}\n" for c in code.chips))


def read_code_text(path, id=0) -> PrnCode:
    tokens = Path(path).read_text().split()
    return PrnCode(np.array([int(t) for t in tokens], dtype=np.int8), id=id)


def pack_code(code: PrnCode) -> bytes:
    """Sign-bit packing, MSB first: chip -1 -> bit 1, +1 -> bit 0, zero padded."""
    return np.packbits(code.chips < 0).tobytes()


def unpack_code(data: bytes, length: int, id=0) -> PrnCode:
    if len(data) * 8 < length:
        raise ValueError(f"{len(data)} bytes cannot hold {length} chips")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:length]
    return PrnCode(1 - 2 * bits.astype(np.int8), id=id)
