import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempus_fri.exceptions import ConfigurationError, SpectrumCoverageError
from tempus_fri.signal_model import (
    BSpline,
    Dirac,
    FourierVector,
    FriSignal,
    SamplingKernel,
    TabulatedSpectrum,
    eval_trig,
    filtered_signal,
    fourier_coefficients,
    integral_trig,
    pulse_spectrum,
    sup_norm,
)

# adaptive-quadrature oracle on the periodised time-domain x2 (see notes)
X2_COEFFS_ORACLE = np.array(
    [
        -0.037762834766485745 - 0.002338578880890258j,
        -0.04236183380637849 + 0.04964234374978499j,
        0.030256293311486715 - 0.01117672103994662j,
        0.044999999999999984 + 0j,
        0.030256293311486715 + 0.01117672103994662j,
        -0.04236183380637849 - 0.04964234374978499j,
        -0.037762834766485745 + 0.002338578880890258j,
    ]
)
BSPLINE_3_10_AT_2PI = 0.09361166409212966
Y2_AT_020 = 0.23319170742232503
Y2_INT_01_03 = 0.034172633573258615


def _fv(*c, T=1.0):
    return FourierVector(np.array(c, dtype=complex), T)


def test_single_dirac_at_origin():
    x = FriSignal(1.0, Dirac(), [1.0], [0.0])
    np.testing.assert_allclose(fourier_coefficients(x, 2).coeffs, np.ones(5), atol=1e-15)


def test_single_dirac_half_period_alternates():
    x = FriSignal(1.0, Dirac(), [1.0], [0.5])
    np.testing.assert_allclose(fourier_coefficients(x, 1).coeffs, [-1, 1, -1], atol=1e-15)


def test_x2_coefficients_match_quadrature(x2):
    np.testing.assert_allclose(fourier_coefficients(x2, 3).coeffs, X2_COEFFS_ORACLE, atol=1e-9)


def test_tabulated_spectrum_coverage():
    tab = TabulatedSpectrum({-1: 0.5, 0: 1.0, 1: 0.5}, 1.0)
    x = FriSignal(1.0, tab, [1.0], [0.0])
    np.testing.assert_allclose(fourier_coefficients(x, 1).coeffs, [0.5, 1, 0.5])
    with pytest.raises(SpectrumCoverageError):
        fourier_coefficients(x, 2)


def test_tabulated_spectrum_rejects_asymmetry():
    with pytest.raises(ConfigurationError):
        TabulatedSpectrum({-1: 1.0j, 1: 1.0j}, 1.0)


@pytest.mark.parametrize("omega", [0.0, 1.0, -7.5, 1e3])
def test_dirac_spectrum_is_flat(omega):
    assert pulse_spectrum(Dirac(), omega) == 1


def test_bspline_spectrum_values():
    assert pulse_spectrum(BSpline(3, 10.0), 0.0) == pytest.approx(0.1, abs=1e-16)
    assert abs(pulse_spectrum(BSpline(3, 10.0), 2 * np.pi) - BSPLINE_3_10_AT_2PI) < 1e-10


def test_bspline_taylor_branch_is_continuous():
    p = BSpline(3, 10.0)
    w = np.array([1.9e-5, 2.1e-5])  # straddles the cutoff |w/(2a)| = 1e-6
    v = pulse_spectrum(p, w).real
    assert np.all(np.abs(v - 0.1) < 1e-12)


@pytest.mark.parametrize("bad", [dict(degree=-1), dict(degree=1.5), dict(time_scale=0.0)])
def test_bspline_validation(bad):
    with pytest.raises(ConfigurationError):
        BSpline(**{"degree": 3, "time_scale": 1.0, **bad})


def test_signal_validation():
    with pytest.raises(ConfigurationError):
        FriSignal(1.0, Dirac(), [1.0, 2.0], [0.1])
    with pytest.raises(ConfigurationError):
        FriSignal(1.0, Dirac(), [1.0, 2.0], [0.1, 0.1])
    with pytest.raises(ConfigurationError):
        FriSignal(1.0, Dirac(), [1.0], [1.0])
    with pytest.raises(ConfigurationError):
        SamplingKernel(1, 1.0, [1, 0, 1])


def test_filtered_signal_gains(x2):
    k1 = SamplingKernel(3, 1.0)
    k2 = SamplingKernel(3, 1.0, 2 * np.ones(7))
    base = fourier_coefficients(x2, 3).coeffs
    np.testing.assert_array_equal(filtered_signal(x2, k1).coeffs, base)
    np.testing.assert_array_equal(filtered_signal(x2, k2).coeffs, 2 * base)
    zero = FriSignal(1.0, Dirac(), [0.0, 0.0], [0.1, 0.2])
    assert not np.any(filtered_signal(zero, k1).coeffs)


def test_filtered_signal_period_mismatch(x2):
    with pytest.raises(ConfigurationError):
        filtered_signal(x2, SamplingKernel(3, 2.0))


def test_eval_trig_examples(y2):
    assert eval_trig(_fv(0, 1, 0), 0.25) == pytest.approx(1.0)
    assert eval_trig(_fv(0.5, 0, 0.5), 0.0) == pytest.approx(1.0)
    assert abs(eval_trig(y2, 0.20) - Y2_AT_020) < 1e-8


def test_integral_trig_examples(y2):
    assert integral_trig(y2, 0.3, 0.3) == 0.0
    assert integral_trig(_fv(0, 0.7, 0), 0.2, 0.6) == pytest.approx(0.7 * 0.4)
    assert abs(integral_trig(y2, 0.1, 0.3) - Y2_INT_01_03) < 1e-10
    with pytest.raises(ValueError):
        integral_trig(y2, 0.4, 0.3)


def test_integral_trig_vectorised(y2):
    a = np.array([0.0, 0.1, 0.5])
    b = np.array([0.2, 0.3, 0.9])
    np.testing.assert_allclose(integral_trig(y2, a, b), [integral_trig(y2, p, q) for p, q in zip(a, b)], rtol=1e-14)


def test_parseval(y1):
    t = np.arange(8192) / 8192
    lhs = np.mean(eval_trig(y1, t) ** 2)
    rhs = np.sum(np.abs(y1.coeffs) ** 2)
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_sup_norm_matches_direct_grid(y1):
    t = np.arange(16384) / 16384
    assert sup_norm(y1) == pytest.approx(np.abs(eval_trig(y1, t)).max(), rel=1e-12)


def test_fourier_vector_indexing():
    v = _fv(1, 2, 3, 4, 5)
    assert v.M == 2 and v.N == 5
    assert v[-2] == 1 and v[0] == 3 and v[2] == 5
    with pytest.raises(IndexError):
        v[3]
    with pytest.raises(ConfigurationError):
        _fv(1, 2)


signals = st.integers(1, 6).flatmap(
    lambda K: st.tuples(
        st.lists(st.floats(-2, 2, allow_nan=False), min_size=K, max_size=K),
        st.lists(st.floats(0, 0.999), min_size=K, max_size=K, unique=True),
    )
)


@settings(max_examples=60, deadline=None)
@given(signals, st.integers(0, 12))
def test_conjugate_symmetry(params, M):
    c, tau = params
    x = FriSignal(1.0, Dirac(), c, tau)
    f = fourier_coefficients(x, M).coeffs
    assert np.all(np.abs(f[::-1] - np.conj(f)) < 1e-12)


@settings(max_examples=60, deadline=None)
@given(signals, st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_integral_additivity(params, p, q, r):
    c, tau = params
    y = filtered_signal(FriSignal(1.0, Dirac(), c, tau), SamplingKernel(4, 1.0))
    a, b, d = sorted([p, q, r])
    lhs = integral_trig(y, a, b) + integral_trig(y, b, d)
    assert lhs == pytest.approx(integral_trig(y, a, d), abs=1e-12)
