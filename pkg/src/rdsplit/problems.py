"""Named problem presets: flows, parameters, grids and initial data."""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .compositions import OperatorOrdering
from .spectral import Grid, make_grid
from .subflows import (
    FlowParams,
    GSLinearFlow,
    GSNonlinearFlow,
    HeatFlow,
    PotentialFlow,
    linear_potential,
)

__all__ = ["Problem", "preset", "PRESETS", "preset_names", "LINEAR_POTENTIAL", "GRAY_SCOTT"]

LINEAR_POTENTIAL = "linear_potential"
GRAY_SCOTT = "gray_scott"


@dataclass(frozen=True)
class Problem:
    """A split evolution problem.

    ``flow_a`` is always the linear (diffusive) part and ``flow_b`` the
    pointwise part; ``ordering`` says which one takes the ``a``
    coefficients of a scheme.
    """

    name: str
    kind: str
    params: FlowParams
    grid: Grid
    initial: Callable
    ordering: OperatorOrdering
    nonlinear_flow: Optional[str] = None
    t_final: Optional[float] = None
    dt: Optional[float] = None
    reference_dt: Optional[float] = None
    dt_grid: tuple = ()
    reference_method: str = "composition"

    def initial_state(self) -> np.ndarray:
        return np.asarray(self.initial(self.grid.x), dtype=float)

    @cached_property
    def potential_values(self):
        return self.params.potential(self.grid.x)

    @cached_property
    def flow_a(self):
        if self.kind == LINEAR_POTENTIAL:
            return HeatFlow(self.grid, self.params.D)
        return GSLinearFlow(self.grid, self.params)

    @cached_property
    def flow_b(self):
        if self.kind == LINEAR_POTENTIAL:
            return PotentialFlow(self.potential_values)
        return GSNonlinearFlow(self.nonlinear_flow or "exact")

    @property
    def species(self) -> int:
        return 2 if self.kind == GRAY_SCOTT else 1

    def with_options(self, **changes) -> "Problem":
        return replace(self, **changes)

    def cache_key(self) -> str:
        """Text identifying everything that determines a trajectory."""
        p = self.params
        return (f"{self.name}|{self.kind}|n={self.grid.n}|x=[{self.grid.x_min!r},{self.grid.x_max!r})"
                f"|D={p.D!r}|Du={p.D_u!r}|Dv={p.D_v!r}|alpha={p.alpha!r}|beta={p.beta!r}"
                f"|order={self.ordering.value}|nl={self.nonlinear_flow}"
                f"|init={getattr(self.initial, '__name__', repr(self.initial))}")

    def __getstate__(self):
        # cached flows hold closures; rebuild them after unpickling
        state = dict(self.__dict__)
        for key in ("flow_a", "flow_b", "potential_values"):
            state.pop(key, None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)


def _linpot_initial(x):
    return 0.5 - 0.2 * np.exp(np.sin(8.0 * x))


def _gs_initial(x):
    u = 0.0903 * (1.0 + 0.9 * np.exp(np.cos(3.0 * x)))
    v = 0.952 * (1.0 - 0.9 * np.sin(np.cos(x)))
    return np.stack([u, v])


def _selfrep_initial(x):
    return np.stack([np.exp(-2.0 * x**2), 0.1 + np.exp(-4.0 * x**2)])


def _chaos_initial(x):
    u = 1.0 + np.exp(-2.0 * (10.0 * (x - 0.25)) ** 8) + np.exp(-2.0 * (10.0 * (x + 0.23)) ** 8)
    v = np.exp(-4.0 * (10.0 * x) ** 6) + np.exp(-4.0 * (10.0 * (x - 0.75)) ** 6)
    return np.stack([u, v])


LINPOT_DT_GRID = tuple(2.0**-j for j in range(0, 13))
# every entry tiles T = 10; the coarse end is where order 8 still sits above
# the accumulated round-off of the reference
GS_DT_GRID = (2.5, 2.0, 1.25, 1.0, 0.625, 0.5, 0.25, 0.2, 0.1, 0.05)


def _linpot(name, D):
    return Problem(
        name=name,
        kind=LINEAR_POTENTIAL,
        params=FlowParams(D=D, potential=linear_potential),
        grid=make_grid(1024, -np.pi, np.pi),
        initial=_linpot_initial,
        ordering=OperatorOrdering.B_FIRST,
        # final time not given for this study; 1 tiles every dyadic step
        t_final=1.0,
        reference_dt=2.0**-20,
        dt_grid=LINPOT_DT_GRID,
        # the operator is linear: a dense matrix exponential is exact to round-off
        reference_method="expm",
    )


def _gs_study(name, D_u, D_v):
    return Problem(
        name=name,
        kind=GRAY_SCOTT,
        params=FlowParams(D_u=D_u, D_v=D_v, alpha=0.09, beta=0.086),
        grid=make_grid(512, -np.pi, np.pi),
        initial=_gs_initial,
        ordering=OperatorOrdering.A_FIRST,
        nonlinear_flow="exact",
        t_final=10.0,
        # fine steps accumulate correlated round-off (~1e-13 per step); an
        # order-8 run at 0.025 agrees with 0.05 to ~1e-11
        reference_dt=0.025,
        dt_grid=GS_DT_GRID,
    )


PRESETS = {
    "linpot-high": lambda: _linpot("linpot-high", 10.0),
    "linpot-low": lambda: _linpot("linpot-low", 0.005),
    "gs-high": lambda: _gs_study("gs-high", 1.0, 0.01),
    "gs-low": lambda: _gs_study("gs-low", 0.001, 0.001),
    "gs-selfrep": lambda: Problem(
        name="gs-selfrep",
        kind=GRAY_SCOTT,
        params=FlowParams(D_u=0.001, D_v=0.0001, alpha=0.04, beta=0.1),
        grid=make_grid(512, -1.5 * np.pi, 1.5 * np.pi),
        initial=_selfrep_initial,
        ordering=OperatorOrdering.A_FIRST,
        nonlinear_flow="midpoint",
        dt=1.0,
    ),
    "gs-chaos": lambda: Problem(
        name="gs-chaos",
        kind=GRAY_SCOTT,
        params=FlowParams(D_u=2e-5, D_v=1e-5, alpha=0.028, beta=0.081),
        grid=make_grid(256, -1.25, 1.25),
        initial=_chaos_initial,
        ordering=OperatorOrdering.A_FIRST,
        nonlinear_flow="midpoint",
        dt=0.25,
    ),
}


def preset_names():
    return sorted(PRESETS)


def preset(name: str) -> Problem:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(preset_names())}") from None
