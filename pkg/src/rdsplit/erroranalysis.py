"""Leading local error of Strang splitting for ``u_t = D u_xx + f(x) u``.

With ``A = D d^2/dx^2`` and ``B = f``, the potential-outer Strang step
``S = e^{hB/2} e^{hA} e^{hB/2}`` satisfies

    S - e^{h(A+B)} = (h^3 / 6) [(AAB + BAA)/2 - ABA - (BBA + ABB)/4 + BAB/2] + O(h^4),

i.e. ``h^3 ([A,[A,B]]/12 - [B,[B,A]]/24)``. The D^2 terms grow with the
diffusion constant much faster than the D terms, which is why high-order
compositions lose their nominal rate when ``D dt`` is not small.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Grid, spectral_derivative
from .subflows import heat_flow, potential_flow

__all__ = [
    "ErrorTermReport",
    "TERM_LABELS",
    "strang_error_terms",
    "strang_leading_term",
    "dense_operator",
    "strang_one_step_defect",
    "MAX_DENSE_N",
]

MAX_DENSE_N = 256

TERM_LABELS = (
    "D f [f u]_xx",
    "D^2 f u_xxxx / 2",
    "D f^2 u_xx / 2",
    "D [f^2 u]_xx / 2",
    "D^2 [f u]_xxxx / 2",
    "D^2 [f u_xx]_xx",
)


@dataclass(frozen=True)
class ErrorTermReport:
    term_label: str
    magnitude: float
    D: float

    def __post_init__(self):
        if not self.magnitude >= 0:
            raise ValueError(f"magnitude must be >= 0, got {self.magnitude}")


def _real_field(u, grid: Grid):
    u = np.asarray(u)
    if np.iscomplexobj(u) and np.any(u.imag != 0):
        raise ValueError("error terms are defined for real u")
    u = np.real(u).astype(float)
    if u.shape != (grid.n,):
        raise ValueError(f"grid mismatch: field of shape {u.shape} on a grid of {grid.n} nodes")
    return u


def _dxx(v, grid):
    return spectral_derivative(v, grid, 2).real


def _dxxxx(v, grid):
    return spectral_derivative(v, grid, 4).real


def strang_error_terms(u, D: float, potential, grid: Grid) -> list:
    """Sup norms of the six error-expansion terms, grouped as the table lists them."""
    u = _real_field(u, grid)
    f = np.asarray(potential, dtype=float)
    terms = (
        D * f * _dxx(f * u, grid),
        D**2 * f * _dxxxx(u, grid) / 2,
        D * f**2 * _dxx(u, grid) / 2,
        D * _dxx(f**2 * u, grid) / 2,
        D**2 * _dxxxx(f * u, grid) / 2,
        D**2 * _dxx(f * _dxx(u, grid), grid),
    )
    return [ErrorTermReport(label, float(np.max(np.abs(t))), float(D))
            for label, t in zip(TERM_LABELS, terms)]


def strang_leading_term(u, D: float, potential, grid: Grid) -> np.ndarray:
    """The bracket ``C u`` with ``S u - e^{h(A+B)} u = (h^3/6) C u + O(h^4)``."""
    u = _real_field(u, grid)
    f = np.asarray(potential, dtype=float)
    u_xx = _dxx(u, grid)
    aab = D**2 * _dxxxx(f * u, grid)
    baa = D**2 * f * _dxxxx(u, grid)
    aba = D**2 * _dxx(f * u_xx, grid)
    bba = D * f**2 * u_xx
    abb = D * _dxx(f**2 * u, grid)
    bab = D * f * _dxx(f * u, grid)
    return (aab + baa) / 2 - aba - (bba + abb) / 4 + bab / 2


def dense_operator(grid: Grid, D: float, potential) -> np.ndarray:
    """``D L + diag(f)`` with ``L`` the spectral second-derivative matrix."""
    lap = spectral_derivative(np.eye(grid.n), grid, 2).real.T
    return D * lap + np.diag(np.asarray(potential, dtype=float))


def strang_one_step_defect(u, D: float, potential, grid: Grid, dt: float):
    """One Strang step against the dense matrix exponential.

    Returns ``(defect_norm, predicted_leading)``, both sup norms; the second
    is ``dt^3 / 6 * ||C u||``.
    """
    from scipy.linalg import expm

    if grid.n > MAX_DENSE_N:
        raise ValueError(f"dense oracle refuses n = {grid.n} > {MAX_DENSE_N}")
    u = _real_field(u, grid)
    f = np.asarray(potential, dtype=float)
    half = potential_flow(u, f, dt / 2)
    split = potential_flow(heat_flow(half, grid, D, dt), f, dt / 2).real
    exact = expm(dt * dense_operator(grid, D, f)) @ u
    defect = float(np.max(np.abs(split - exact)))
    predicted = dt**3 / 6 * float(np.max(np.abs(strang_leading_term(u, D, f, grid))))
    return defect, predicted
