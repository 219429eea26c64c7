"""Matched-filter baseline, partial/complete integrate-and-dump, and the dense MMSE oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericError, SingularMatrixError
from .flops import FlopCounter
from .prn import PrnCode


def _samples(r):
    return np.asarray(getattr(r, "samples", r), dtype=np.float64)


def sign_bit(d) -> int:
    """Hard decision with the tie rule sign(0) = +1."""
    return 1 if d >= 0 else -1


@dataclass(frozen=True)
class DecisionOutput:
    d: float
    bit_decision: int
    warmup: bool = False

    @classmethod
    def from_value(cls, d, warmup=False):
        return cls(float(d), sign_bit(d), warmup)


@dataclass(frozen=True)
class PartialCorrelations:
    values: np.ndarray
    g: int

    @property
    def M(self) -> int:
        return len(self.values)

    @property
    def N(self) -> int:
        return self.M * self.g


def matched_filter_decision(r, code: PrnCode) -> DecisionOutput:
    """Correlate against the unnormalized replica; d = sum code[n] * r[n]."""
    x = _samples(r)
    if x.shape[-1] != code.length:
        raise ValueError(f"length mismatch: r has {x.shape[-1]}, code has {code.length}")
    return DecisionOutput.from_value(code.as_float() @ x)


def group_sums(x, code_chips, g) -> np.ndarray:
    """Code-mixed group sums over the last axis; works on a single vector or a block."""
    x = np.asarray(x, dtype=np.float64)
    N = x.shape[-1]
    if g < 1 or N % g:
        raise ValueError(f"group size {g} does not divide N={N}")
    if len(code_chips) != N:
        raise ValueError(f"length mismatch: r has {N}, code has {len(code_chips)}")
    mixed = x * code_chips
    return mixed.reshape(*x.shape[:-1], N // g, g).sum(axis=-1)


def partial_integrate_dump(r, code: PrnCode, g: int, flops: FlopCounter | None = None) -> PartialCorrelations:
    """Mix with the prompt replica and integrate each run of g chips (N -> M)."""
    values = group_sums(_samples(r), code.as_float(), g)
    if flops is not None:
        flops.charge("partial_id", len(values) * (g - 1))
    return PartialCorrelations(values, g)


def complete_integrate(c: PartialCorrelations, w, flops: FlopCounter | None = None, warmup=False) -> DecisionOutput:
    """d = w . c, the final M -> 1 integration."""
    values = c.values if isinstance(c, PartialCorrelations) else np.asarray(c)
    w = getattr(w, "w", w)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != values.shape:
        raise ValueError(f"dimension mismatch: w {w.shape} vs c {values.shape}")
    if flops is not None:
        flops.charge("integrate_bit", 2 * len(w))
    return DecisionOutput.from_value(w @ values, warmup)


@dataclass(frozen=True)
class FullAutocorr:
    matrix: np.ndarray
    sample_count: int


def full_autocorrelation(epochs) -> FullAutocorr:
    X = np.stack([_samples(e) for e in epochs])
    R = X.T @ X / len(X)
    R = 0.5 * (R + R.T)
    return FullAutocorr(R, len(X))


def spd_solve(A, b):
    """Cholesky solve of A x = b; A must be symmetric positive definite."""
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise NumericError("non-finite input to solver")
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def full_mmse_oracle(epochs, code: PrnCode, p: float, nu: float) -> np.ndarray:
    """Unconstrained despreading vector h = p (R + nu I)^-1 s from sample epochs.

    Cost is cubic in N; meant for small synthetic codes as a test reference.
    """
    if len(epochs) < 2:
        raise ValueError("need at least 2 epochs")
    R = full_autocorrelation(epochs).matrix
    if R.shape[0] != code.length:
        raise ValueError(f"length mismatch: epochs have {R.shape[0]}, code has {code.length}")
    return p * spd_solve(R + nu * np.eye(len(R)), code.as_float())
