"""Exact and implicit-midpoint flow maps of the split operators.

Every flow advances a state over a possibly complex time increment ``tau``.
Scalar fields are 1D complex arrays; a Gray-Scott state is a ``(2, n)``
array with rows ``(u, v)``.

The plain functions are the reference definitions. The ``*Flow`` classes
wrap them for the time-stepping loop and memoize the Fourier / pointwise
multipliers per ``tau``, since a composition scheme only ever uses a handful
of distinct sub-step lengths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .spectral import Grid, dft_forward, dft_inverse
from .special import lambertw0, lambertw0_from_log

__all__ = [
    "FlowError",
    "FlowParams",
    "linear_potential",
    "heat_flow",
    "potential_flow",
    "gs_linear_flow",
    "gs_nonlinear_flow_exact",
    "gs_nonlinear_flow_midpoint",
    "v_floor",
    "HeatFlow",
    "PotentialFlow",
    "GSLinearFlow",
    "GSNonlinearFlow",
]

LOG_OVERFLOW = 700.0
NEWTON_MAX_ITER = 30
NEWTON_DAMPED_ITER = 60


class FlowError(ArithmeticError):
    """A flow could not be evaluated for the given state and step."""


def linear_potential(x):
    return (3.0 + np.sin(10.0 * x)) * np.cos(12.0 * x)


@dataclass(frozen=True)
class FlowParams:
    D: float = 0.0
    D_u: float = 0.0
    D_v: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    potential: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        for name in ("D", "D_u", "D_v"):
            if getattr(self, name) < 0:
                raise ValueError(f"diffusivity {name} must be >= 0")

    def check_gray_scott(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"Gray-Scott needs alpha > 0 and beta > 0, got "
                             f"alpha={self.alpha}, beta={self.beta}")


def _check_semigroup(rate, tau, what):
    if np.real(rate * tau) < 0:
        raise ValueError(f"{what}: Re(rate*tau) < 0 for tau={tau!r}; "
                         "the diffusive flow is unbounded in this direction")


def _heat_multiplier(grid: Grid, D, tau):
    _check_semigroup(D, tau, "heat flow")
    return np.exp(-D * tau * grid.k2)


def heat_flow(u, grid: Grid, D: float, tau: complex) -> np.ndarray:
    """Exact flow of ``u_t = D u_xx``: damp each Fourier mode by ``exp(-D k^2 tau)``."""
    return dft_inverse(dft_forward(u) * _heat_multiplier(grid, D, tau))


def potential_flow(u, potential, tau: complex) -> np.ndarray:
    """Exact flow of ``u_t = f(x) u``; ``potential`` holds the nodal values of f."""
    return u * np.exp(tau * np.asarray(potential))


def _gs_linear_multipliers(grid: Grid, p: FlowParams, tau):
    p.check_gray_scott()
    rate_u = p.alpha + p.D_u * grid.k2
    rate_v = p.beta + p.D_v * grid.k2
    _check_semigroup(p.alpha, tau, "Gray-Scott linear flow (u)")
    _check_semigroup(p.beta, tau, "Gray-Scott linear flow (v)")
    decay = np.stack([np.exp(-rate_u * tau), np.exp(-rate_v * tau)])
    # spectrum of the fixed point alpha/(alpha + D_u k^2) * alpha_hat: u = 1
    fixed = np.zeros((2, grid.n), dtype=complex)
    fixed[0, 0] = grid.n
    return decay, fixed


def gs_linear_flow(state, grid: Grid, params: FlowParams, tau: complex) -> np.ndarray:
    """Exact flow of ``u_t = D_u u_xx + alpha (1 - u)``, ``v_t = D_v v_xx - beta v``."""
    decay, fixed = _gs_linear_multipliers(grid, params, tau)
    spec = dft_forward(state)
    return dft_inverse((spec - fixed) * decay + fixed)


def v_floor(s0) -> float:
    """Smallest |v0| for which the Lambert-W closed form is used."""
    return 1e-8 * max(1.0, float(np.max(np.abs(s0))))


def _conserving_pair(s0, v):
    # u := s0 - v, then v := s0 - u makes fl(u + v) == s0 exactly (Sterbenz)
    # whenever v lies within [-s0, 2 s0], which covers physical states.
    u = s0 - v
    v = s0 - u
    return np.stack([u, v])


def gs_nonlinear_flow_exact(state, tau: complex) -> np.ndarray:
    """Closed-form flow of ``u_t = -u v^2``, ``v_t = u v^2`` via W0.

    With ``s0 = u0 + v0`` conserved, ``v`` solves ``v_t = (s0 - v) v^2``:
    ``v = s0 / (1 + W0[(u0/v0) exp(u0/v0 - s0^2 tau)])``.
    """
    state = np.asarray(state, dtype=complex)
    u0, v0 = state[0], state[1]
    s0 = u0 + v0
    floor = v_floor(s0)
    small = np.abs(v0) < floor
    if small.any():
        j = int(np.flatnonzero(small)[0])
        raise FlowError(f"|v0| = {abs(v0[j]):.3e} < v_floor = {floor:.3e} at node {j}; "
                        "use the midpoint flow")
    r = u0 / v0
    shift = s0 * s0 * tau
    expo = r - shift
    # W(r e^r) = r, so a first-order expansion in log z is an excellent seed
    seed = r - shift * r / (1.0 + r) if np.all(np.abs(shift) < 1.0) else None
    big = expo.real > LOG_OVERFLOW
    if not big.any():
        w = lambertw0(r * np.exp(expo), seed=seed)
    else:
        w = np.empty_like(r)
        w[big] = lambertw0_from_log(np.log(r[big]) + expo[big])
        rest = ~big
        w[rest] = lambertw0(r[rest] * np.exp(expo[rest]),
                            seed=None if seed is None else seed[rest])
    return _conserving_pair(s0, s0 / (1.0 + w))


def gs_nonlinear_flow_midpoint(state, tau: complex) -> np.ndarray:
    """Implicit midpoint step for ``v_t = (s0 - v) v^2``, node by node.

    Solves ``v+ = v0 + tau (s0 - m) m^2``, ``m = (v0 + v+)/2`` by Newton's
    method seeded at ``v0``, with a damped fallback.
    """
    state = np.asarray(state, dtype=complex)
    u0, v0 = state[0], state[1]
    s0 = u0 + v0
    if tau == 0:
        return state.copy()

    def residual(v):
        m = 0.5 * (v0 + v)
        return v - v0 - tau * (s0 - m) * m * m

    def slope(v):
        m = 0.5 * (v0 + v)
        return 1.0 - 0.5 * tau * (2.0 * s0 * m - 3.0 * m * m)

    tol = 1e-14 * (1.0 + np.abs(v0))
    v = v0.copy()
    converged = np.zeros(v.shape, dtype=bool)
    for _ in range(NEWTON_MAX_ITER):
        dv = residual(v) / slope(v)
        v = v - dv
        converged = np.abs(dv) <= tol
        if converged.all():
            return _conserving_pair(s0, v)

    # damped Newton on the stragglers: halve the step until |g| decreases
    idx = np.flatnonzero(~converged)
    v_bad = v0[idx].copy()
    for _ in range(NEWTON_DAMPED_ITER):
        m = 0.5 * (v0[idx] + v_bad)
        g = v_bad - v0[idx] - tau * (s0[idx] - m) * m * m
        dv = g / (1.0 - 0.5 * tau * (2.0 * s0[idx] * m - 3.0 * m * m))
        lam = np.ones(idx.size)
        for _ in range(20):
            trial = v_bad - lam * dv
            mt = 0.5 * (v0[idx] + trial)
            gt = trial - v0[idx] - tau * (s0[idx] - mt) * mt * mt
            worse = np.abs(gt) > np.abs(g)
            if not worse.any():
                break
            lam = np.where(worse, 0.5 * lam, lam)
        v_bad = v_bad - lam * dv
        if np.all(np.abs(lam * dv) <= tol[idx]):
            v[idx] = v_bad
            return _conserving_pair(s0, v)
    j = int(idx[0])
    raise FlowError(f"midpoint Newton failed at node {j}: u0={u0[j]!r}, v0={v0[j]!r}, tau={tau!r}")


class _TauCache:
    """Memoize per-tau multipliers; schemes reuse a few sub-step lengths."""

    def __init__(self, build, maxsize=256):
        self._build = build
        self._cache = {}
        self._maxsize = maxsize

    def __call__(self, tau):
        tau = complex(tau)
        try:
            return self._cache[tau]
        except KeyError:
            pass
        value = self._build(tau)
        if len(self._cache) >= self._maxsize:
            self._cache.clear()
        self._cache[tau] = value
        return value


class HeatFlow:
    def __init__(self, grid: Grid, D: float):
        self.grid, self.D = grid, D
        self._mult = _TauCache(lambda tau: _heat_multiplier(grid, D, tau))

    def __call__(self, u, tau):
        return dft_inverse(dft_forward(u) * self._mult(tau))


class PotentialFlow:
    def __init__(self, potential_values):
        self.values = np.asarray(potential_values, dtype=float)
        self._mult = _TauCache(lambda tau: np.exp(tau * self.values))

    def __call__(self, u, tau):
        return u * self._mult(tau)


class GSLinearFlow:
    def __init__(self, grid: Grid, params: FlowParams):
        params.check_gray_scott()
        self.grid, self.params = grid, params
        self._mult = _TauCache(lambda tau: _gs_linear_multipliers(grid, params, tau))

    def __call__(self, state, tau):
        decay, fixed = self._mult(tau)
        spec = dft_forward(state)
        return dft_inverse((spec - fixed) * decay + fixed)


class GSNonlinearFlow:
    """Gray-Scott reaction flow; ``method`` is ``"exact"`` or ``"midpoint"``.

    With ``fallback=True`` the exact flow hands states with a node below
    the v floor to the midpoint rule instead of raising.
    """

    def __init__(self, method: str = "exact", fallback: bool = False):
        if method not in ("exact", "midpoint"):
            raise ValueError(f"unknown nonlinear flow {method!r}")
        self.method, self.fallback = method, fallback

    def __call__(self, state, tau):
        if self.method == "midpoint":
            return gs_nonlinear_flow_midpoint(state, tau)
        if self.fallback:
            s0 = state[0] + state[1]
            if np.any(np.abs(state[1]) < v_floor(s0)):
                return gs_nonlinear_flow_midpoint(state, tau)
        return gs_nonlinear_flow_exact(state, tau)
