import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prdlab.core import ConvergenceError, SeededRng, Spectrum, active, fmt, relu, spectral_extremes, spectral_norm


def test_same_seed_same_stream():
    a, b = SeededRng(7), SeededRng(7)
    assert np.array_equal(a.gaussian(100), b.gaussian(100))
    assert np.array_equal(a.rademacher(50), b.rademacher(50))


def test_streams_are_independent():
    assert not np.array_equal(SeededRng(7, 0).gaussian(20), SeededRng(7, 1).gaussian(20))
    assert not np.array_equal(SeededRng(7).gaussian(20), SeededRng(8).gaussian(20))


def test_gaussian_moments():
    g = SeededRng(0).gaussian(100_000)
    assert abs(g.mean()) < 0.02
    assert abs(g.var() - 1) < 0.05


def test_rademacher_values():
    r = SeededRng(1).rademacher(10_000)
    assert set(np.unique(r)) == {-1.0, 1.0}
    assert abs(r.mean()) < 0.05


def test_spectrum_of_diagonal():
    s = spectral_extremes(np.diag([3.0, -1.0, 0.5]))
    assert s.lambda_min == pytest.approx(-1.0, abs=1e-7)
    assert s.lambda_max == pytest.approx(3.0, abs=1e-7)


def test_spectrum_of_identity_is_immediate():
    s = spectral_extremes(np.eye(5))
    assert s.lambda_min == pytest.approx(1.0) and s.lambda_max == pytest.approx(1.0)


def test_rejects_asymmetric():
    with pytest.raises(ValueError):
        spectral_extremes(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        spectral_extremes(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_iteration_cap_raises():
    rng = SeededRng(3)
    A = rng.gaussian((40, 40))
    with pytest.raises(ConvergenceError):
        spectral_extremes(A + A.T, tol=1e-14, max_iters=3)


def test_spectrum_ordering_enforced():
    with pytest.raises(ValueError):
        Spectrum(2.0, 1.0, 1)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 24), seed=st.integers(0, 10_000))
def test_matches_dense_eigensolver(n, seed):
    A = SeededRng(seed).gaussian((n, n))
    M = (A + A.T) / 2
    ev = np.linalg.eigvalsh(M)
    s = spectral_extremes(M, tol=1e-10, max_iters=200_000)
    scale = max(1.0, np.abs(ev).max())
    assert abs(s.lambda_min - ev[0]) <= 1e-6 * scale
    assert abs(s.lambda_max - ev[-1]) <= 1e-6 * scale


def test_psd_gram_has_nonnegative_min():
    X = SeededRng(4).gaussian((30, 5))
    s = spectral_extremes(X @ X.T, tol=1e-10, max_iters=100_000)
    assert s.lambda_min > -1e-8


def test_spectral_norm():
    assert spectral_norm(np.diag([-4.0, 2.0])) == pytest.approx(4.0, rel=1e-8)


def test_relu_and_closed_indicator():
    z = np.array([-1.0, 0.0, 2.0])
    assert np.array_equal(relu(z), [0.0, 0.0, 2.0])
    assert np.array_equal(active(z), [0.0, 1.0, 1.0])


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 1e-300, -2.5e17):
        assert float(fmt(x)) == x
