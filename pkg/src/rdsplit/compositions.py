"""Splitting schemes with complex coefficients and the time-stepping loop.

A scheme is a list of ``(a, b)`` stage pairs: stage ``j`` runs the first
operator for ``a_j * dt`` and then the second for ``b_j * dt``. Which of the
problem's two flows counts as "first" is set by :class:`OperatorOrdering`.

Strang splitting is stored flattened as ``[(1/2, 1), (1/2, 0)]``. Higher
orders come from the triple jump ``S(g1 dt) S(g2 dt) S(g1 dt)`` with complex
``g1, g2`` (Castella et al. 2009; Hansen & Ostermann 2009); adjacent
first-operator sub-steps of consecutive base steps are merged.
"""

from __future__ import annotations

import enum
import itertools
import os
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "Scheme",
    "SchemeError",
    "SchemeFormatError",
    "StepError",
    "OperatorOrdering",
    "Trajectory",
    "lie_trotter",
    "strang",
    "triple_jump_coefficients",
    "triple_jump",
    "build_order",
    "compose",
    "validate",
    "load_scheme",
    "save_scheme",
    "format_scheme",
    "step",
    "integrate",
    "step_count",
]

SUM_TOL = 1e-12
LOAD_SUM_TOL = 1e-9
ROOT_TOL = 1e-13


class SchemeError(ValueError):
    """A scheme violates consistency or admissibility."""


class SchemeFormatError(ValueError):
    """A scheme file could not be parsed."""


class StepError(RuntimeError):
    """A flow failed inside a time step; ``stage`` is the failing stage index."""

    def __init__(self, message, stage=None, step_index=None):
        super().__init__(message)
        self.stage = stage
        self.step_index = step_index


class OperatorOrdering(enum.Enum):
    """Which flow receives the ``a`` coefficients.

    ``A_FIRST``: the problem's flow A takes ``a_j``, flow B takes ``b_j``.
    ``B_FIRST``: the roles are swapped.
    """

    A_FIRST = "A_first"
    B_FIRST = "B_first"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        for member in cls:
            if str(value).lower() in (member.value.lower(), member.name.lower()):
                return member
        raise ValueError(f"unknown operator ordering {value!r}")


@dataclass(frozen=True)
class Scheme:
    stages: tuple
    nominal_order: int
    name: str
    source: str = field(default="constructed", compare=False)

    def __post_init__(self):
        stages = tuple((complex(a), complex(b)) for a, b in self.stages)
        if not stages:
            raise SchemeError("a scheme needs at least one stage")
        object.__setattr__(self, "stages", stages)

    @property
    def a(self) -> np.ndarray:
        return np.array([s[0] for s in self.stages])

    @property
    def b(self) -> np.ndarray:
        return np.array([s[1] for s in self.stages])

    @property
    def is_real(self) -> bool:
        return all(a.imag == 0 and b.imag == 0 for a, b in self.stages)

    def __len__(self):
        return len(self.stages)

    def adjoint(self) -> "Scheme":
        """Stage-reversed, role-swapped scheme.

        Run with the opposite ordering it applies the sub-flows in reverse
        order; for symmetric schemes this reproduces the original step.
        """
        return Scheme(tuple((b, a) for a, b in reversed(self.stages)),
                      self.nominal_order, self.name + "*", self.source)


def _canonical(ops):
    """Merge an alternating ``[(op, coeff), ...]`` list into (a, b) pairs."""
    merged = []
    for op, c in ops:
        if c == 0:
            continue
        if merged and merged[-1][0] == op:
            merged[-1] = (op, merged[-1][1] + c)
        else:
            merged.append((op, c))
    stages = []
    i = 0
    if merged and merged[0][0] == 1:
        merged.insert(0, (0, 0j))
    while i < len(merged):
        a = merged[i][1]
        b = merged[i + 1][1] if i + 1 < len(merged) else 0j
        stages.append((a, b))
        i += 2
    return tuple(stages)


def _ops(stages, scale=1.0):
    out = []
    for a, b in stages:
        out.append((0, a * scale))
        out.append((1, b * scale))
    return out


def compose(schemes: Sequence[Scheme], weights: Sequence[complex], name: str,
            order: int) -> Scheme:
    """Flattened product: ``schemes[0]`` with step ``weights[0]*dt`` runs first."""
    ops = []
    for s, w in zip(schemes, weights):
        ops.extend(_ops(s.stages, w))
    return Scheme(_canonical(ops), order, name)


def lie_trotter() -> Scheme:
    return Scheme(((1.0, 1.0),), 1, "lie-trotter")


def strang() -> Scheme:
    return Scheme(((0.5, 1.0), (0.5, 0.0)), 2, "strang")


def triple_jump_coefficients(p: int, root_index: int):
    """Return ``(g1, g2)`` with ``2 g1 + g2 = 1`` and ``2 g1**(p+1) + g2**(p+1) = 0``.

    ``g2 = w g1`` where ``w`` is the ``root_index``-th root of ``w**(p+1) = -2``,
    ``w = 2**(1/(p+1)) exp(i pi (2k+1)/(p+1))``. The real root ``k = p/2``
    gives Yoshida's real triple jump.
    """
    if p < 2 or p % 2:
        raise ValueError(f"triple jump needs an even base order >= 2, got {p}")
    if not 0 <= root_index <= p:
        raise ValueError(f"root index must lie in 0..{p}, got {root_index}")
    k = root_index
    if 2 * k + 1 == p + 1:
        w = complex(-(2.0 ** (1.0 / (p + 1))), 0.0)
    else:
        w = 2.0 ** (1.0 / (p + 1)) * complex(np.exp(1j * np.pi * (2 * k + 1) / (p + 1)))
    g1 = 1.0 / (2.0 + w)
    g2 = 1.0 - 2.0 * g1
    return g1, g2


def triple_jump(base: Scheme, root_index: int, require_admissible: bool = True) -> Scheme:
    """Raise a symmetric scheme of even order p to order p + 2."""
    p = base.nominal_order
    g1, g2 = triple_jump_coefficients(p, root_index)
    scheme = compose([base, base, base], [g1, g2, g1],
                     f"tj{p + 2}[{base.name},k={root_index}]", p + 2)
    if require_admissible:
        bad = _inadmissible(scheme)
        if bad is not None:
            j, a, b = bad
            raise SchemeError(f"{scheme.name}: stage {j} has a negative real part "
                              f"(a={a:.6g}, b={b:.6g})")
    return scheme


def _inadmissible(scheme: Scheme, strict: bool = False):
    for j, (a, b) in enumerate(scheme.stages):
        if strict:
            bad = (a != 0 and a.real <= 0) or (b != 0 and b.real <= 0)
        else:
            bad = a.real < 0 or b.real < 0
        if bad:
            return j, a, b
    return None


def _max_arg(scheme: Scheme) -> float:
    return max(abs(np.angle(c)) for st in scheme.stages for c in st if c != 0)


def build_order(order: int) -> Scheme:
    """Strang (order 2) or a recursive complex triple jump of order 4, 6 or 8.

    Every sequence of roots across the levels is tried; the winner has all
    stage coefficients with positive real part and the smallest largest
    argument. Ties go to the lexicographically smallest root sequence.
    """
    if order not in (2, 4, 6, 8):
        raise ValueError(f"order must be one of 2, 4, 6, 8, got {order}")
    base = strang()
    if order == 2:
        return base
    levels = list(range(2, order, 2))
    best = None
    for roots in itertools.product(*[range(p + 1) for p in levels]):
        s = base
        for k in roots:
            s = triple_jump(s, k, require_admissible=False)
        if _inadmissible(s, strict=True) is not None:
            continue
        key = (_max_arg(s), roots)
        if best is None or key < best[0]:
            best = (key, s)
    if best is None:
        raise SchemeError(f"no admissible triple-jump root sequence for order {order}")
    roots = best[0][1]
    return replace(best[1], name=f"tj{order}", source="constructed:roots=" +
                   ",".join(map(str, roots)))


def validate(scheme: Scheme, sum_tol: float = SUM_TOL) -> list:
    """List the consistency/admissibility problems of a scheme (empty if none)."""
    problems = []
    sa, sb = sum(scheme.a), sum(scheme.b)
    if abs(sa - 1) > sum_tol:
        problems.append(f"sum of a coefficients is {sa:.17g} (deficit {1 - sa:.3g})")
    if abs(sb - 1) > sum_tol:
        problems.append(f"sum of b coefficients is {sb:.17g} (deficit {1 - sb:.3g})")
    bad = _inadmissible(scheme)
    if bad is not None:
        j, a, b = bad
        problems.append(f"stage {j} has a negative real part (a={a}, b={b})")
    return problems


def format_scheme(scheme: Scheme) -> str:
    lines = [f"# splitting scheme, {len(scheme)} stages; columns: Re(a) Im(a) Re(b) Im(b)",
             f"order {scheme.nominal_order} name {scheme.name}"]
    for a, b in scheme.stages:
        lines.append(" ".join(f"{x:.17g}" for x in (a.real, a.imag, b.real, b.imag)))
    return "\n".join(lines) + "\n"


def save_scheme(scheme: Scheme, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(format_scheme(scheme))
    os.replace(tmp, path)


def load_scheme(path, strict: bool = True) -> Scheme:
    """Read a scheme file.

    A consistency-sum violation beyond 1e-9 raises :class:`SchemeError`
    unless ``strict=False``, in which case it (like a negative real part)
    only warns.
    """
    order = name = None
    stages = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("order"):
                parts = line.split(None, 3)
                if len(parts) < 4 or parts[2] != "name":
                    raise SchemeFormatError(f"{path}:{lineno}: header must read 'order N name TEXT'")
                try:
                    order = int(parts[1])
                except ValueError:
                    raise SchemeFormatError(f"{path}:{lineno}: bad order {parts[1]!r}") from None
                name = parts[3].strip()
                continue
            fields = line.split()
            if len(fields) != 4:
                raise SchemeFormatError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            try:
                ra, ia, rb, ib = (float(f) for f in fields)
            except ValueError:
                raise SchemeFormatError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
            stages.append((complex(ra, ia), complex(rb, ib)))
    if order is None:
        raise SchemeFormatError(f"{path}: missing 'order N name TEXT' header")
    if not stages:
        raise SchemeFormatError(f"{path}: no stages")
    scheme = Scheme(tuple(stages), order, name, source=str(path))
    problems = validate(scheme, LOAD_SUM_TOL)
    sums = [p for p in problems if p.startswith("sum")]
    if sums and strict:
        raise SchemeError(f"{path}: " + "; ".join(sums))
    for p in problems:
        warnings.warn(f"{path}: {p}", stacklevel=2)
    return scheme


def step(scheme: Scheme, ordering: OperatorOrdering, flow_a: Callable, flow_b: Callable,
         state, dt: float, project: bool = True):
    """Advance ``state`` by one step of size ``dt``.

    The result is projected onto real values after the last stage (never
    between stages, which would spoil the cancellations of the composition).
    """
    ordering = OperatorOrdering.parse(ordering)
    first, second = (flow_a, flow_b) if ordering is OperatorOrdering.A_FIRST else (flow_b, flow_a)
    for j, (a, b) in enumerate(scheme.stages):
        try:
            if a != 0:
                state = first(state, a * dt)
            if b != 0:
                state = second(state, b * dt)
        except (ArithmeticError, ValueError) as exc:
            raise StepError(f"stage {j} of {scheme.name}: {exc}", stage=j) from exc
    if project:
        return np.real(state).copy()
    return state


def step_count(dt: float, t_final: float) -> int:
    if not (dt > 0 and t_final > 0):
        raise ValueError("dt and t_final must be positive")
    ratio = t_final / dt
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"dt={dt!r} does not tile t_final={t_final!r} (ratio {ratio!r})")
    return int(n)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def final(self):
        return self.states[-1]


def integrate(scheme: Scheme, ordering: Optional[OperatorOrdering], problem, dt: float,
              t_final: float, stride: Optional[int] = None, state=None):
    """Repeat :func:`step` from the problem's initial state up to ``t_final``.

    ``problem`` needs ``flow_a``, ``flow_b``, ``ordering`` and
    ``initial_state()``. Returns the final state, or a :class:`Trajectory`
    with snapshots every ``stride`` steps (both ends included) when
    ``stride`` is given.
    """
    n = step_count(dt, t_final)
    ordering = problem.ordering if ordering is None else OperatorOrdering.parse(ordering)
    u = problem.initial_state() if state is None else np.asarray(state)
    flow_a, flow_b = problem.flow_a, problem.flow_b
    times, snaps = [], []
    if stride:
        times.append(0.0)
        snaps.append(np.real(u).copy())
    for i in range(n):
        try:
            u = step(scheme, ordering, flow_a, flow_b, u, dt)
        except StepError as exc:
            exc.step_index = i
            raise StepError(f"step {i}: {exc}", stage=exc.stage, step_index=i) from exc
        if not np.isfinite(u).all():
            raise StepError(f"non-finite state after step {i} (t={(i + 1) * dt:.6g})",
                            step_index=i)
        if stride and ((i + 1) % stride == 0 or i + 1 == n):
            times.append((i + 1) * dt)
            snaps.append(u.copy())
    if stride:
        return Trajectory(np.array(times), np.array(snaps))
    return u
