"""Periodic 1D grids and Fourier pseudospectral operators.

Fields are plain numpy arrays of nodal samples whose last axis has length
``grid.n``; a Gray-Scott state is a ``(2, n)`` array and every transform
acts along the last axis.

Normalization: the forward transform is unnormalized and the inverse
carries the ``1/n`` factor (numpy's default ``"backward"`` convention), so
a constant field ``c`` has ``c * n`` in bin 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "make_grid",
    "dft_forward",
    "dft_inverse",
    "spectral_derivative",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic mesh on ``[x_min, x_max)``."""

    n: int
    x_min: float
    x_max: float
    dx: float = field(init=False)
    x: np.ndarray = field(init=False, repr=False, compare=False)
    wavenumbers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        length = self.x_max - self.x_min
        object.__setattr__(self, "dx", length / self.n)
        x = self.x_min + self.dx * np.arange(self.n)
        # signed DFT index, Nyquist bin negative (numpy ordering)
        k = 2.0 * np.pi * np.fft.fftfreq(self.n, d=1.0 / self.n) / length
        x.flags.writeable = False
        k.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "wavenumbers", k)

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def k2(self) -> np.ndarray:
        return self.wavenumbers**2


def make_grid(n: int, x_min: float, x_max: float) -> Grid:
    """Build a periodic grid with ``n`` nodes; ``n`` must be a power of two."""
    n = int(n)
    if n < 2 or n & (n - 1):
        raise ValueError(f"grid size must be a power of two >= 2, got {n}")
    if not x_max > x_min:
        raise ValueError(f"degenerate interval [{x_min}, {x_max})")
    return Grid(n, float(x_min), float(x_max))


def dft_forward(values) -> np.ndarray:
    return np.fft.fft(values, axis=-1)


def dft_inverse(spectrum) -> np.ndarray:
    return np.fft.ifft(spectrum, axis=-1)


def spectral_derivative(values, grid: Grid, order: int) -> np.ndarray:
    """Differentiate ``order`` times (1 to 4) by multiplying the spectrum by ``(ik)**order``.

    The Nyquist bin is dropped for odd orders, where its sign is ambiguous.
    The result is complex; take ``.real`` for real input.
    """
    if order not in (1, 2, 3, 4):
        raise ValueError(f"unsupported derivative order {order}")
    symbol = (1j * grid.wavenumbers) ** order
    if order % 2:
        symbol = symbol.copy()
        symbol[grid.n // 2] = 0.0
    return dft_inverse(symbol * dft_forward(values))
