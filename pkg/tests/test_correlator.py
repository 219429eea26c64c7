import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gwmmse.correlator import (
    complete_integrate,
    full_autocorrelation,
    full_mmse_oracle,
    matched_filter_decision,
    partial_integrate_dump,
)
from gwmmse.errors import NumericError, SingularMatrixError
from gwmmse.flops import FlopCounter
from gwmmse.prn import generate_ca_code, synthetic_code, upsample_code, upsample_vector

CODE = upsample_code(generate_ca_code(1))
S = CODE.as_float()
DIVISORS = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024]


def test_mf_clean():
    out = matched_filter_decision(S, CODE)
    assert out.d == 1024 and out.bit_decision == 1 and not out.warmup
    neg = matched_filter_decision(-S, CODE)
    assert neg.d == -1024 and neg.bit_decision == -1
    with pytest.raises(ValueError):
        matched_filter_decision(S[:-1], CODE)


def test_mf_flip_threshold_closed_form():
    assert 20 * math.log10(1023 / 65) == pytest.approx(23.94, abs=0.01)


@pytest.mark.parametrize("isr_db, flips", [(23.0, False), (25.0, True)])
def test_mf_flip_by_direct_simulation(isr_db, flips):
    native = generate_ca_code(1).as_float()
    shifted = np.roll(native, -18)  # autocorrelation -65 at lag 18
    A = 10 ** (isr_db / 20)
    wrong = []
    for b in (1, -1):
        for b_int in (1, -1):
            r = upsample_vector(b * native + A * b_int * shifted)
            wrong.append(matched_filter_decision(r, CODE).bit_decision != b)
    assert any(wrong) == flips


def test_partial_clean_and_flops():
    fc = FlopCounter()
    c = partial_integrate_dump(S, CODE, 64, fc)
    np.testing.assert_array_equal(c.values, 64 * np.ones(16))
    assert (c.M, c.g, c.N) == (16, 64, 1024)
    assert fc["partial_id"] == 1008
    np.testing.assert_array_equal(partial_integrate_dump(-S, CODE, 64).values, -64 * np.ones(16))
    with pytest.raises(ValueError):
        partial_integrate_dump(S, CODE, 48)


def test_complete_integrate():
    fc = FlopCounter()
    c = partial_integrate_dump(S, CODE, 64)
    out = complete_integrate(c, np.ones(16), fc)
    assert out.d == 1024
    assert fc["integrate_bit"] == 32
    zero = complete_integrate(c, np.zeros(16))
    assert zero.d == 0 and zero.bit_decision == 1
    with pytest.raises(ValueError):
        complete_integrate(c, np.ones(8))


@given(arrays(np.float64, 1024, elements=st.floats(-100, 100)), st.sampled_from(DIVISORS))
def test_mf_equals_unit_weight_grouping(r, g):
    mf = matched_filter_decision(r, CODE).d
    grouped = complete_integrate(partial_integrate_dump(r, CODE, g), np.ones(1024 // g)).d
    assert grouped == pytest.approx(mf, rel=1e-10, abs=1e-8)


@given(st.integers(0, 1000), st.floats(-5, 5), st.floats(-5, 5), st.sampled_from(DIVISORS))
def test_partial_is_linear(seed, a, b, g):
    rng = np.random.default_rng(seed)
    r1, r2 = rng.standard_normal((2, 1024))
    lhs = partial_integrate_dump(a * r1 + b * r2, CODE, g).values
    rhs = a * partial_integrate_dump(r1, CODE, g).values + b * partial_integrate_dump(r2, CODE, g).values
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-9)


@given(st.integers(0, 1000), st.floats(1e-3, 1e3))
def test_sign_invariant_to_positive_weight_scaling(seed, k):
    rng = np.random.default_rng(seed)
    c = partial_integrate_dump(rng.standard_normal(1024), CODE, 64)
    w = rng.standard_normal(16)
    assert complete_integrate(c, w).bit_decision == complete_integrate(c, k * w).bit_decision


def test_oracle_clean_closed_form():
    code = synthetic_code(3, 32)
    s = code.as_float()
    epochs = [s, -s, s, s, -s]
    h = full_mmse_oracle(epochs, code, 1.0, 0.01)
    np.testing.assert_allclose(h, s / (32 + 0.01), rtol=1e-10)
    assert np.all(np.sign(h) == s)


def test_oracle_singular_and_nonfinite():
    code = synthetic_code(3, 32)
    s = code.as_float()
    with pytest.raises(SingularMatrixError):
        full_mmse_oracle([s, -s], code, 1.0, 0.0)
    bad = s.copy()
    bad[0] = np.nan
    with pytest.raises(NumericError):
        full_mmse_oracle([bad, s], code, 1.0, 0.1)
    with pytest.raises(ValueError):
        full_mmse_oracle([s], code, 1.0, 0.1)


def test_full_autocorr_symmetric(rng):
    fa = full_autocorrelation(rng.standard_normal((40, 16)))
    assert fa.sample_count == 40
    assert np.max(np.abs(fa.matrix - fa.matrix.T)) <= 1e-12
    assert np.all(np.diag(fa.matrix) >= 0)
