"""Principal branch of the Lambert W function for real and complex input.

Values are refined by Halley's iteration on ``w * exp(w) - z`` from one of
three seeds: the branch-point series near ``-1/e``, the asymptotic
``log z - log log z`` expansion for large ``|z|`` (and around ``z = -1``,
where the third seed is singular), and Winitzki's logarithmic
approximation elsewhere. Arguments in the lower half plane are solved by
conjugate reflection, so ``W0(conj z) == conj(W0(z))`` holds exactly.

References
----------
R. M. Corless, G. H. Gonnet, D. E. G. Hare, D. J. Jeffrey, D. E. Knuth,
"On the Lambert W function", Adv. Comput. Math. 5 (1996) 329-359.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "W0Result",
    "LambertWError",
    "lambert_w0",
    "lambert_w0_seed",
    "lambertw0",
    "lambertw0_from_log",
]

INV_E = math.exp(-1.0)
INV_E_LO = -1.2428753672788363e-17  # 1/e - INV_E
MAX_ITER = 50
STEP_TOL = 1e-15
BRANCH_RADIUS = 0.3
ASYMPTOTIC_RADIUS = 3.0
# below this |z + 1/e| the truncated series is exact to round-off and Halley
# cannot improve on it (W is ill-conditioned at the branch point)
SERIES_ONLY_RADIUS = 1e-3
EPS = np.finfo(float).eps



def _branch_coefficients(m: int) -> tuple:
    """First ``m`` coefficients of W0 in p = sqrt(2 (e z + 1)); CGHJK96 eqs. 4.23-4.24."""
    mu = [Fraction(-1), Fraction(1)]
    alpha = [Fraction(2), Fraction(-1)]
    for k in range(2, m):
        alpha.append(sum((mu[j] * mu[k + 1 - j] for j in range(2, k)), Fraction(0)))
        mu.append(Fraction(k - 1, k + 1) * (mu[k - 2] / 2 + alpha[k - 2] / 4)
                  - alpha[k] / 2 - mu[k - 1] / (k + 1))
    return tuple(float(c) for c in mu)


_BRANCH_COEFFS = _branch_coefficients(20)


class LambertWError(ArithmeticError):
    """Raised when W0 is undefined for the argument or Halley fails to converge."""


@dataclass(frozen=True)
class W0Result:
    value: complex
    iterations: int
    residual: float


def _branch_p(z):
    """sqrt(2 (e z + 1)) without cancellation in e z + 1.

    The float ``-INV_E`` lies just below -1/e; real input at or above it is
    clamped onto the real segment.
    """
    t = 2.0 * math.e * ((z + INV_E) + INV_E_LO)
    t = np.where((np.imag(z) == 0) & (np.real(z) >= -INV_E), np.maximum(np.real(t), 0.0), t)
    return np.sqrt(t)


def _branch_series(p):
    acc = 0.0
    for c in reversed(_BRANCH_COEFFS):
        acc = acc * p + c
    return acc


def lambert_w0_seed(z: complex) -> complex:
    """Initial guess inside the principal-branch basin of attraction."""
    z = complex(z)
    if z == 0:
        return 0j
    if abs(z + INV_E) < BRANCH_RADIUS:
        return complex(_branch_series(_branch_p(z)))
    # Winitzki's seed is singular at z = -1
    if abs(z) > ASYMPTOTIC_RADIUS or abs(z + 1.0) < 0.5:
        l1 = cmath.log(z)
        l2 = cmath.log(l1)
        return l1 - l2 + l2 / l1
    # Winitzki (2003)
    lz = cmath.log(1.0 + z)
    return lz * (1.0 - cmath.log(1.0 + lz) / (2.0 + lz))


def _halley(w, z):
    """Halley correction, or 0 once the residual is at round-off level."""
    ew = cmath.exp(w)
    f = w * ew - z
    if abs(f) <= EPS * abs(z):
        return 0j
    w1 = w + 1.0
    return f / (ew * w1 - (w + 2.0) * f / (2.0 * w1))


def lambert_w0(z) -> W0Result:
    """Principal-branch Lambert W of a scalar.

    Real input (``float``/``int``, or complex with zero imaginary part) on
    ``[-1/e, inf)`` is solved in real arithmetic so the value carries no
    imaginary dust. Real input below ``-1/e`` raises; complex input on the
    cut ``(-inf, -1/e)`` returns the value continuous from above.
    """
    is_real_type = isinstance(z, (int, float, np.floating, np.integer))
    zc = complex(z)
    if zc.imag == 0.0 and (zc.real >= -INV_E or is_real_type):
        x = zc.real
        if x < -INV_E:
            raise LambertWError(f"real argument {x!r} below -1/e has no real W0 value")
        w, iters = _real_w0(x)
        return W0Result(complex(w, 0.0), iters, abs(w * math.exp(w) - x))

    # solve in the closed upper half plane, reflect back
    lower = zc.imag < 0.0
    zu = zc.conjugate() if lower else zc
    w = lambert_w0_seed(zu)
    if abs(zu + INV_E) < SERIES_ONLY_RADIUS:
        return W0Result(w, 0, abs(w * cmath.exp(w) - zc))
    for it in range(1, MAX_ITER + 1):
        dw = _halley(w, zu)
        w -= dw
        if abs(dw) <= STEP_TOL * (1.0 + abs(w)):
            if lower:
                w = w.conjugate()
            return W0Result(w, it, abs(w * cmath.exp(w) - zc))
    raise LambertWError(f"Halley iteration did not converge for z={zc!r}")


def _real_w0(x: float):
    if x == 0.0:
        return 0.0, 0
    if x == -INV_E:
        return -1.0, 0
    if x + INV_E < SERIES_ONLY_RADIUS:
        return float(_branch_series(_branch_p(x))), 0
    w = lambert_w0_seed(x).real
    for it in range(1, MAX_ITER + 1):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= EPS * abs(x):
            return w, it
        w1 = w + 1.0
        dw = f / (ew * w1 - (w + 2.0) * f / (2.0 * w1))
        w -= dw
        if abs(dw) <= STEP_TOL * (1.0 + abs(w)):
            return w, it
    raise LambertWError(f"Halley iteration did not converge for x={x!r}")


def lambertw0(z, seed=None) -> np.ndarray:
    """Vectorized principal-branch W for complex arrays.

    Same seeds and Halley refinement as :func:`lambert_w0`; input on the cut
    ``(-inf, -1/e)`` gets the value continuous from above. Raises
    :class:`LambertWError` if any entry fails to converge.

    ``seed`` replaces the built-in initial guesses. It must already lie close
    to the principal-branch value (the caller vouches for that); iteration
    then stops as soon as a Halley step is below ``1e-6 (1 + |w|)``, since
    cubic convergence leaves the next error far below round-off.
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.ravel()
    if seed is not None:
        return _halley_from(z, np.array(seed, dtype=complex).ravel()).reshape(shape)
    lower = z.imag < 0.0
    reflect = lower.any()
    if reflect:
        z = np.where(lower, z.conj(), z)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        near = np.abs(z + INV_E) < BRANCH_RADIUS
        large = ((np.abs(z) > ASYMPTOTIC_RADIUS) | (np.abs(z + 1.0) < 0.5)) & ~near
        lz = np.log1p(z)
        w = lz * (1.0 - np.log1p(lz) / (2.0 + lz))
        if large.any():
            l1 = np.log(z[large])
            l2 = np.log(l1)
            w[large] = l1 - l2 + l2 / l1
        frozen = z == 0
        w[frozen] = 0.0
        if near.any():
            w[near] = _branch_series(_branch_p(z[near]))
            frozen |= np.abs(z + INV_E) < SERIES_ONLY_RADIUS

        tol_scale = EPS * np.abs(z)
        for _ in range(MAX_ITER):
            ew = np.exp(w)
            f = w * ew - z
            w1 = w + 1.0
            dw = f / (ew * w1 - (w + 2.0) * f / (2.0 * w1))
            dw[(np.abs(f) <= tol_scale) | frozen] = 0.0
            w -= dw
            if np.all(np.abs(dw) <= STEP_TOL * (1.0 + np.abs(w))):
                break
        else:
            bad = np.flatnonzero(~(np.abs(dw) <= STEP_TOL * (1.0 + np.abs(w))))
            raise LambertWError(f"Halley iteration did not converge for z={z[bad[0]]!r} "
                                f"({bad.size} entries)")
    if reflect:
        w[lower] = w[lower].conj()
    return w.reshape(shape)


def _halley_from(z, w):
    tol_scale = EPS * np.abs(z)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(MAX_ITER):
            ew = np.exp(w)
            f = w * ew - z
            w1 = w + 1.0
            dw = f / (ew * w1 - (w + 2.0) * f / (2.0 * w1))
            dw[np.abs(f) <= tol_scale] = 0.0
            w -= dw
            if np.all(np.abs(dw) <= 1e-6 * (1.0 + np.abs(w))):
                return w
    raise LambertWError("seeded Halley iteration did not converge")


def lambertw0_from_log(log_z) -> np.ndarray:
    """W0(z) given ``log z`` for ``|z|`` too large to represent.

    Solves ``w + log w = log z`` by Newton's method; valid where ``Re log z``
    is large (the principal branch has ``Re w >> 1`` there).
    """
    lz = np.asarray(log_z, dtype=complex)
    w = lz - np.log(lz)
    for _ in range(MAX_ITER):
        dw = (w + np.log(w) - lz) / (1.0 + 1.0 / w)
        w = w - dw
        if np.all(np.abs(dw) <= STEP_TOL * (1.0 + np.abs(w))):
            return w
    raise LambertWError("log-form Newton iteration did not converge")
