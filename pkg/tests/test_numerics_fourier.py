import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fld.numerics import naive_dft, rfft, rfft_adjoint, rfft_backward, spectrum_inner


def dft_oracle(x):
    # Independent O(H^2) loop implementation, kept free of library code.
    h = len(x)
    out = np.zeros(h // 2 + 1, dtype=complex)
    for j in range(h // 2 + 1):
        for t in range(h):
            out[j] += x[t] * np.exp(-2j * np.pi * j * t / h)
    return out


def test_constant_signal_concentrates_in_dc():
    v = 0.37
    spec = rfft(np.full(8, v))
    assert abs(spec[0] - 8 * v) < 1e-12
    assert np.all(np.abs(spec[1:]) < 1e-12)


def test_bin_aligned_sine_hits_single_bin():
    t = np.arange(8)
    spec = rfft(np.sin(2 * np.pi * 2 * t / 8))
    mags = np.abs(spec)
    assert abs(mags[2] - 4.0) < 1e-12
    other = np.delete(mags, 2)
    assert np.all(other < 1e-12)


def test_matches_naive_dft_oracle():
    rng = np.random.default_rng(7)
    x = rng.normal(size=51)
    assert np.max(np.abs(rfft(x) - dft_oracle(x))) < 1e-10
    assert np.max(np.abs(naive_dft(x) - dft_oracle(x))) < 1e-10


@pytest.mark.parametrize("h", [2, 3, 8, 17, 50, 51])
def test_fast_path_matches_naive_all_lengths(h):
    rng = np.random.default_rng(h)
    x = rng.normal(size=(3, h))
    assert np.max(np.abs(rfft(x) - naive_dft(x))) < 1e-10


def test_rejects_too_short_signal():
    with pytest.raises(ValueError):
        rfft(np.ones(1))
    with pytest.raises(ValueError):
        naive_dft(np.ones(1))


@settings(max_examples=30, deadline=None)
@given(h=st.integers(min_value=2, max_value=40), seed=st.integers(0, 2**31))
def test_adjoint_identity_and_inner_product(h, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=h)
    y = rng.normal(size=h // 2 + 1) + 1j * rng.normal(size=h // 2 + 1)
    # adjoint o forward == H * identity on real signals
    assert np.max(np.abs(rfft_adjoint(rfft(x), h) - h * x)) < 1e-10 * max(1.0, h)
    # <rfft(x), y>_spec == <x, adjoint(y)>
    lhs = spectrum_inner(rfft(x), y, h)
    rhs = float(np.dot(x, rfft_adjoint(y, h)))
    assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))


def test_backward_is_plain_transpose():
    # <rfft(x), g> with g as independent real coordinates == <x, backward(g)>
    rng = np.random.default_rng(3)
    h = 13
    x = rng.normal(size=h)
    gr = rng.normal(size=h // 2 + 1)
    gi = rng.normal(size=h // 2 + 1)
    spec = rfft(x)
    lhs = float(np.sum(gr * spec.real + gi * spec.imag))
    rhs = float(np.dot(x, rfft_backward(gr, gi, h)))
    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(11)
    h = 12
    x = rng.normal(size=h)
    wr = rng.normal(size=h // 2 + 1)
    wi = rng.normal(size=h // 2 + 1)

    def loss(sig):
        spec = naive_dft(sig)
        return float(np.sum(wr * spec.real + wi * spec.imag))

    analytic = rfft_backward(wr, wi, h)
    eps = 1e-6
    for t in range(h):
        xp = x.copy(); xp[t] += eps
        xm = x.copy(); xm[t] -= eps
        numeric = (loss(xp) - loss(xm)) / (2 * eps)
        assert abs(analytic[t] - numeric) < 1e-6
