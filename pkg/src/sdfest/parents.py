"""Built-in cell-probability generators and their limit curves.

The benchmark generator is the quintic CDF G(x) = 10x^3 - 15x^4 + 6x^5 with
density g(x) = 30x^2(1-x)^2.  The scaled cell probabilities M*p_i built from
G converge to the law of g(U), U uniform, whose CDF has the closed form

    F(x) = 1 - sqrt(1 - sqrt(8x/15)),   0 <= x <= 15/8.

Distances from a step CDF to this limit are computed exactly: F is strictly
increasing on its support with a closed-form inverse and antiderivative, so
the integral of |Fhat - F| splits into per-knot-interval pieces with at most
one sign change each.
"""

from __future__ import annotations

import math

import numpy as np

from .core import StepCdf, StepDensity, sdf_of_density

__all__ = [
    "quintic_cdf",
    "uniform_cdf",
    "limit_F_eval",
    "limit_g_eval",
    "QuinticLimit",
    "TabulatedCdf",
    "l1_to_limit",
    "sup_to_limit",
]

SUPPORT_END = 15.0 / 8.0


def quintic_cdf(x):
    """G(x) = 10x^3 - 15x^4 + 6x^5, clamped outside [0, 1]."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    out = ((6.0 * x - 15.0) * x + 10.0) * x * x * x
    return float(out) if out.ndim == 0 else out


def uniform_cdf(x):
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    return float(x) if x.ndim == 0 else x


def limit_g_eval(x):
    """The limiting parent density g(x) = 30x^2(1-x)^2 on [0, 1], else 0."""
    x = np.asarray(x, dtype=np.float64)
    inside = (x >= 0.0) & (x <= 1.0)
    out = np.where(inside, 30.0 * x * x * (1.0 - x) * (1.0 - x), 0.0)
    return float(out) if out.ndim == 0 else out


def limit_F_eval(x):
    """The limit structural distribution function of the quintic generator."""
    x = np.asarray(x, dtype=np.float64)
    t = np.sqrt(np.clip(8.0 * x / 15.0, 0.0, 1.0))
    out = np.where(x < 0.0, 0.0, np.where(x >= SUPPORT_END, 1.0, 1.0 - np.sqrt(1.0 - t)))
    return float(out) if out.ndim == 0 else out


def _limit_F_inverse(u):
    """x with F(x) = u for u in [0, 1]: x = (15/8)(1 - (1-u)^2)^2."""
    u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
    s = 1.0 - u
    return SUPPORT_END * (1.0 - s * s) ** 2


def _limit_F_antiderivative(x):
    """A(x) = integral of F from 0 to x, in closed form.

    With s(x) = sqrt(1 - sqrt(8x/15)) = 1 - F(x) on the support,
    integral of sqrt(1 - sqrt(8x/15)) dx = (15/2)(s^5/5 - s^3/3) + const,
    so A(x) = x - 1 - (15/2)(s^5/5 - s^3/3), A(15/8) = 7/8, and A grows
    linearly with slope 1 past the support.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.sqrt(np.clip(8.0 * x / 15.0, 0.0, 1.0))
    s = np.sqrt(np.clip(1.0 - t, 0.0, 1.0))
    body = x - 1.0 - 7.5 * (0.2 * s**5 - s**3 / 3.0)
    return np.where(x <= 0.0, 0.0, body)


class QuinticLimit:
    """Closed-form limit target for the quintic generator."""

    support_end = SUPPORT_END

    def cdf(self, x):
        return limit_F_eval(x)

    def density(self, x):
        return limit_g_eval(x)

    def l1_to(self, step: StepCdf) -> float:
        """Exact integral of |step - F| over [0, infinity)."""
        pts = np.concatenate([[0.0], step.knots])
        vals = np.concatenate([[0.0], step.levels])
        if pts[-1] < SUPPORT_END:
            pts = np.append(pts, SUPPORT_END)
        else:
            vals = vals[:-1]
        a, b = pts[:-1], pts[1:]
        v = vals  # step value on [a, b)
        crossing = np.clip(_limit_F_inverse(v), a, b)
        A = _limit_F_antiderivative
        below = v * (crossing - a) - (A(crossing) - A(a))  # where F <= v
        above = (A(b) - A(crossing)) - v * (b - crossing)  # where F >= v
        return float(np.sum(below) + np.sum(above))

    def sup_to(self, step: StepCdf) -> float:
        """sup_x |step(x) - F(x)|; F is continuous, so the sup over each
        constant piece of the step function is attained at its endpoints."""
        f = limit_F_eval(step.knots)
        right = np.max(np.abs(f - step.levels))
        prev = np.concatenate([[0.0], step.levels[:-1]])
        left = np.max(np.abs(f - prev))
        # below the first knot the step is 0 and F is increasing
        head = limit_F_eval(step.knots[0]) if step.knots[0] > 0.0 else 0.0
        return float(max(right, left, head))


class TabulatedCdf:
    """A user-supplied CDF given by (x, G(x)) pairs, linearly interpolated.

    The grid must start at (0, 0) and end at (1, 1) and be nondecreasing;
    between grid points G is linear, so the implied parent density is a
    histogram and the implied limit SDF is itself a step CDF.
    """

    def __init__(self, xs, gs) -> None:
        xs = np.ascontiguousarray(xs, dtype=np.float64)
        gs = np.ascontiguousarray(gs, dtype=np.float64)
        if xs.ndim != 1 or xs.shape != gs.shape or xs.size < 2:
            raise ValueError("tabulated CDF needs matching x and G columns, length >= 2")
        if xs[0] != 0.0 or xs[-1] != 1.0:
            raise ValueError("tabulated CDF grid must run from x=0 to x=1")
        if not np.all(np.diff(xs) > 0.0):
            raise ValueError("tabulated CDF grid must be strictly increasing")
        if abs(gs[0]) > 1e-12 or abs(gs[-1] - 1.0) > 1e-12:
            raise ValueError("tabulated CDF must satisfy G(0) = 0 and G(1) = 1")
        if np.any(np.diff(gs) < -1e-12):
            raise ValueError("tabulated CDF values must be nondecreasing")
        self.xs = xs
        self.gs = gs

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.interp(x, self.xs, self.gs)
        return float(out) if out.ndim == 0 else out

    def limit_sdf(self) -> StepCdf:
        slopes = np.diff(self.gs) / np.diff(self.xs)
        return sdf_of_density(StepDensity(self.xs, slopes))


def l1_to_limit(step: StepCdf, limit) -> float:
    """L1 distance from a step CDF to a limit target (smooth or step)."""
    if isinstance(limit, StepCdf):
        from .core import l1_distance

        return l1_distance(step, limit)
    return limit.l1_to(step)


def sup_to_limit(step: StepCdf, limit) -> float:
    if isinstance(limit, StepCdf):
        from .core import sup_distance

        return sup_distance(step, limit)
    return limit.sup_to(step)
