import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdsplit.spectral import dft_forward, dft_inverse, make_grid, spectral_derivative


def test_grid_1024():
    g = make_grid(1024, -np.pi, np.pi)
    assert g.dx == pytest.approx(2 * np.pi / 1024, rel=1e-15)
    k = g.wavenumbers
    assert sorted(k.round().astype(int)) == list(range(-512, 512))
    assert k[1] == pytest.approx(1.0) and k[512] == pytest.approx(-512.0)


def test_smallest_grid():
    g = make_grid(2, 0.0, 2 * np.pi)
    assert sorted(np.abs(g.wavenumbers)) == pytest.approx([0.0, 1.0])


def test_fig4_grid_wavenumbers():
    g = make_grid(256, -1.25, 1.25)
    m = np.fft.fftfreq(256, 1 / 256)
    np.testing.assert_allclose(g.wavenumbers, 2 * np.pi * m / 2.5, rtol=1e-15)


@pytest.mark.parametrize("n", [0, 1, 3, 100, 1000])
def test_non_power_of_two_rejected(n):
    with pytest.raises(ValueError):
        make_grid(n, 0.0, 1.0)


def test_degenerate_interval_rejected():
    with pytest.raises(ValueError):
        make_grid(8, 1.0, 1.0)


def test_grid_nodes_read_only():
    g = make_grid(8, 0.0, 1.0)
    with pytest.raises(ValueError):
        g.x[0] = 3.0


def test_constant_field_spectrum():
    c = 2.5
    spec = dft_forward(np.full(64, c))
    assert spec[0] == pytest.approx(64 * c)
    assert np.max(np.abs(spec[1:])) <= 1e-14 * c * 64


def test_single_mode(grid1024):
    spec = dft_forward(np.exp(1j * grid1024.x))
    big = np.flatnonzero(np.abs(spec) > 1e-9)
    assert list(big) == [1]


def test_inverse_trivial_cases():
    assert np.all(dft_inverse(np.zeros(16)) == 0)
    spec = np.zeros(16, dtype=complex)
    spec[0] = 16 * 3.0
    np.testing.assert_allclose(dft_inverse(spec), 3.0, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 11), st.integers(0, 2**32 - 1))
def test_round_trip(log_n, seed):
    r = np.random.default_rng(seed)
    f = r.standard_normal(2**log_n) + 1j * r.standard_normal(2**log_n)
    back = dft_inverse(dft_forward(f))
    assert np.linalg.norm(back - f) <= 1e-13 * np.linalg.norm(f)


def test_round_trip_batched(rng):
    f = rng.standard_normal((2, 64))
    np.testing.assert_allclose(dft_inverse(dft_forward(f)).real, f, atol=1e-14)


def test_second_derivative_analytic(grid1024):
    x = grid1024.x
    d2 = spectral_derivative(np.sin(8 * x), grid1024, 2)
    # rounding in the top bins is amplified by k^2 ~ 2.6e5 (plain numpy.fft gives 3.3e-10)
    assert np.max(np.abs(d2 - (-64 * np.sin(8 * x)))) <= 1e-11 * 64


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_constant_has_zero_derivative(grid128, order):
    assert np.max(np.abs(spectral_derivative(np.full(128, 7.0), grid128, order))) < 1e-12


def test_fourth_derivative_vs_finite_differences():
    # 8th-order central stencil for d4 on a finer grid
    fine = make_grid(4096, -np.pi, np.pi)
    f = np.exp(np.sin(8 * fine.x))
    w = np.array([7 / 240, -2 / 5, 169 / 60, -122 / 15, 91 / 8, -122 / 15, 169 / 60, -2 / 5, 7 / 240])
    fd = sum(c * np.roll(f, 4 - j) for j, c in enumerate(w)) / fine.dx**4
    coarse = make_grid(1024, -np.pi, np.pi)
    spec = spectral_derivative(np.exp(np.sin(8 * coarse.x)), coarse, 4).real
    ref = fd[::4]
    assert np.max(np.abs(spec - ref)) <= 1e-5 * np.max(np.abs(ref))


def test_odd_derivative_zeroes_nyquist():
    g = make_grid(8, 0.0, 2 * np.pi)
    nyq = np.cos(4 * g.x)  # pure Nyquist mode
    assert np.max(np.abs(spectral_derivative(nyq, g, 1))) < 1e-14
    assert np.max(np.abs(spectral_derivative(nyq, g, 2) + 16 * nyq)) < 1e-12


def test_derivative_order_validated(grid128):
    with pytest.raises(ValueError):
        spectral_derivative(np.zeros(128), grid128, 5)


def test_first_derivative_of_gaussian_periodic():
    g = make_grid(256, -10.0, 10.0)
    f = np.exp(-g.x**2)
    d = spectral_derivative(f, g, 1).real
    np.testing.assert_allclose(d, -2 * g.x * f, atol=1e-12)
