"""Exact finite-sample machinery for structural distribution functions.

Cell-probability vectors, right-continuous step CDFs, piecewise-constant
densities on (0,1], the natural / grouped / kernel estimators together with
their deterministic population counterparts, and exact distances between
step CDFs.

Every step CDF produced here is built from a multiset of (value, mass)
pairs whose masses are integer counts over a common denominator.  Levels
are computed as ``cumulative_count / denominator`` in a single float
division, which is what makes the bit-exact identities between estimator
pairs (unit-group grouping vs. the natural estimator, box kernel with
bandwidth 1 vs. the natural estimator, density round-trips) hold on real
hardware rather than only on paper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import poisson as _poisson

__all__ = [
    "CellProbabilities",
    "StepCdf",
    "StepDensity",
    "GroupingScheme",
    "KernelSpec",
    "KERNELS",
    "make_cell_probs_from_cdf",
    "structural_df",
    "parent_density",
    "sdf_of_density",
    "natural_estimator",
    "poissonized_estimator",
    "grouped_estimator",
    "grouped_parent_estimate",
    "group_probabilities",
    "kernel_estimator",
    "kernel_parent_estimate",
    "grouped_population_sdf",
    "kernel_population_sdf",
    "l1_distance",
    "sup_distance",
    "second_moment",
    "poisson_mixture_expectation",
]

# Renormalization thresholds for cell-probability construction: drift up to
# RENORM_DRIFT is silently fixed by dividing through, anything larger is a
# modelling error on the caller's side.
RENORM_DRIFT = 1e-9
SUM_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CellProbabilities:
    """A multinomial cell-probability vector p_1..p_M (nonnegative, sum 1)."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size < 1:
            raise ValueError("probs must be a nonempty 1-D vector")
        if not np.all(np.isfinite(probs)):
            raise ValueError("probs must be finite")
        if np.any(probs < 0.0):
            raise ValueError("probs must be nonnegative")
        # math.fsum is exact, so the total (and everything derived from it)
        # is invariant under permutations of the input.
        drift = abs(math.fsum(probs) - 1.0)
        if drift > SUM_TOL:
            raise ValueError(
                f"probs sum off by {drift:.3e}; construct via from_values() "
                "to renormalize small drift"
            )
        object.__setattr__(self, "probs", _readonly(probs))

    @classmethod
    def from_values(cls, values) -> "CellProbabilities":
        """Build from raw nonnegative weights, fixing float drift up to 1e-9."""
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("cell probabilities must be a nonempty 1-D vector")
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise ValueError("cell probabilities must be finite and nonnegative")
        total = math.fsum(values)
        if abs(total - 1.0) > RENORM_DRIFT:
            raise ValueError(
                f"cell probabilities sum to {total!r}; drift above {RENORM_DRIFT} "
                "is rejected rather than renormalized"
            )
        return cls(values / total)

    @property
    def M(self) -> int:
        return self.probs.size


class StepCdf:
    """A right-continuous step distribution function.

    ``knots`` are the strictly increasing jump locations, ``levels[i]`` the
    value of F at and right of ``knots[i]``.  F is 0 before the first knot
    and the final level is exactly 1.0.
    """

    __slots__ = ("knots", "levels")

    def __init__(self, knots, levels) -> None:
        knots = np.ascontiguousarray(knots, dtype=np.float64)
        levels = np.ascontiguousarray(levels, dtype=np.float64)
        if knots.ndim != 1 or knots.shape != levels.shape or knots.size == 0:
            raise ValueError("knots and levels must be nonempty 1-D vectors of equal length")
        if not np.all(np.isfinite(knots)):
            raise ValueError("knots must be finite")
        if knots.size > 1 and not np.all(np.diff(knots) > 0.0):
            raise ValueError("knots must be strictly increasing")
        if levels.size > 1 and not np.all(np.diff(levels) > 0.0):
            raise ValueError("levels must be strictly increasing")
        if levels[0] <= 0.0 or levels[-1] != 1.0:
            raise ValueError("levels must lie in (0, 1] with final level exactly 1")
        self.knots = _readonly(knots)
        self.levels = _readonly(levels)

    @classmethod
    def from_weighted_values(cls, values, mass_counts, denom: int) -> "StepCdf":
        """Empirical CDF of ``values`` where value i carries mass counts[i]/denom.

        Duplicate values are merged (their counts accumulate) and levels are
        computed as merged-cumulative-count / denom, one division per level.
        """
        values = np.ascontiguousarray(values, dtype=np.float64)
        counts = np.ascontiguousarray(mass_counts, dtype=np.int64)
        if values.shape != counts.shape or values.ndim != 1 or values.size == 0:
            raise ValueError("values and mass counts must be matching nonempty vectors")
        if np.any(counts < 0) or int(counts.sum()) != int(denom):
            raise ValueError("mass counts must be nonnegative and sum to denom")
        keep = counts > 0
        values, counts = values[keep], counts[keep]
        order = np.argsort(values, kind="stable")
        v, c = values[order], counts[order]
        starts = np.empty(v.size, dtype=bool)
        starts[0] = True
        starts[1:] = v[1:] != v[:-1]
        cum = np.cumsum(c)
        group_last = np.flatnonzero(np.append(starts[1:], True))
        return cls(v[starts], cum[group_last] / int(denom))

    @classmethod
    def from_knots_levels(cls, knots, levels) -> "StepCdf":
        """Construct from possibly unsorted knots; duplicate knots merge by
        keeping the accumulated (largest) level at that location."""
        knots = np.ascontiguousarray(knots, dtype=np.float64)
        levels = np.ascontiguousarray(levels, dtype=np.float64)
        order = np.argsort(knots, kind="stable")
        k, lv = knots[order], levels[order]
        starts = np.empty(k.size, dtype=bool)
        starts[0] = True
        starts[1:] = k[1:] != k[:-1]
        group_last = np.flatnonzero(np.append(starts[1:], True))
        return cls(k[starts], lv[group_last])

    @classmethod
    def point_mass(cls, x: float) -> "StepCdf":
        return cls(np.array([float(x)]), np.array([1.0]))

    def evaluate(self, x):
        """F(x), right-continuous; scalar in, scalar out."""
        x = np.asarray(x, dtype=np.float64)
        idx = np.searchsorted(self.knots, x, side="right")
        padded = np.concatenate([[0.0], self.levels])
        out = padded[idx]
        return float(out) if out.ndim == 0 else out

    def left_limit(self, x):
        """F(x-), the limit from the left."""
        x = np.asarray(x, dtype=np.float64)
        idx = np.searchsorted(self.knots, x, side="left")
        padded = np.concatenate([[0.0], self.levels])
        out = padded[idx]
        return float(out) if out.ndim == 0 else out

    def jump_masses(self) -> np.ndarray:
        return np.diff(self.levels, prepend=0.0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepCdf):
            return NotImplemented
        return np.array_equal(self.knots, other.knots) and np.array_equal(
            self.levels, other.levels
        )

    __hash__ = None  # mutable ndarray payload

    def __repr__(self) -> str:
        return f"StepCdf({self.knots.size} knots on [{self.knots[0]:g}, {self.knots[-1]:g}])"


class StepDensity:
    """A piecewise-constant density on (0, 1].

    ``heights[i]`` is the density on the left-open interval
    (breakpoints[i], breakpoints[i+1]].  Densities produced by this library
    live on a rational lattice j/denom; the lattice is kept alongside the
    float breakpoints so that interval masses stay exact integer counts.
    """

    __slots__ = ("breakpoints", "heights", "edge_counts", "denom")

    def __init__(self, breakpoints, heights) -> None:
        breakpoints = np.ascontiguousarray(breakpoints, dtype=np.float64)
        heights = np.ascontiguousarray(heights, dtype=np.float64)
        if breakpoints.ndim != 1 or breakpoints.size < 2:
            raise ValueError("need at least two breakpoints")
        if heights.shape != (breakpoints.size - 1,):
            raise ValueError("need one height per interval")
        if breakpoints[0] != 0.0 or breakpoints[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if not np.all(np.diff(breakpoints) > 0.0):
            raise ValueError("breakpoints must be strictly increasing")
        if not np.all(np.isfinite(heights)) or np.any(heights < 0.0):
            raise ValueError("heights must be finite and nonnegative")
        self.breakpoints = _readonly(breakpoints)
        self.heights = _readonly(heights)
        self.edge_counts = None
        self.denom = None

    @classmethod
    def on_lattice(cls, edge_counts, denom: int, heights) -> "StepDensity":
        """Density whose breakpoints are edge_counts[i]/denom exactly."""
        edges = np.ascontiguousarray(edge_counts, dtype=np.int64)
        denom = int(denom)
        if edges[0] != 0 or edges[-1] != denom:
            raise ValueError("lattice edges must run from 0 to denom")
        d = cls(edges / denom, heights)
        d.edge_counts = _readonly(edges)
        d.denom = denom
        return d

    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def integral(self) -> float:
        """Exact-as-possible total mass sum(height * width)."""
        if self.edge_counts is not None:
            return math.fsum(self.heights * np.diff(self.edge_counts)) / self.denom
        return math.fsum(self.heights * self.widths())

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepDensity):
            return NotImplemented
        return np.array_equal(self.breakpoints, other.breakpoints) and np.array_equal(
            self.heights, other.heights
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"StepDensity({self.heights.size} intervals)"


@dataclass(frozen=True)
class GroupingScheme:
    """Cell-group breakpoints 0 = k_0 < k_1 < ... < k_m = M."""

    breaks: np.ndarray

    def __post_init__(self) -> None:
        breaks = np.ascontiguousarray(self.breaks, dtype=np.int64)
        if breaks.ndim != 1 or breaks.size < 2:
            raise ValueError("need at least one group (two breakpoints)")
        if breaks[0] != 0:
            raise ValueError("group breaks must start at 0")
        if not np.all(np.diff(breaks) > 0):
            raise ValueError("group breaks must be strictly increasing")
        object.__setattr__(self, "breaks", _readonly(breaks))

    @classmethod
    def equal_size(cls, M: int, size: int) -> "GroupingScheme":
        """Groups of ``size`` cells; a remainder < size is absorbed by the
        final group."""
        if size < 1 or M < 1:
            raise ValueError("group size and cell count must be positive")
        q = M // size
        if q == 0:
            return cls(np.array([0, M]))
        breaks = [i * size for i in range(q)] + [M]
        return cls(np.asarray(breaks))

    @classmethod
    def unit(cls, M: int) -> "GroupingScheme":
        return cls(np.arange(M + 1))

    @property
    def m(self) -> int:
        return self.breaks.size - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.breaks)

    @property
    def M(self) -> int:
        return int(self.breaks[-1])


def _box(t: np.ndarray) -> np.ndarray:
    return np.where((t > -0.5) & (t <= 0.5), 1.0, 0.0)


def _triangular(t: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - np.abs(t))


def _epanechnikov(t: np.ndarray) -> np.ndarray:
    return np.where(np.abs(t) <= 1.0, 0.75 * (1.0 - t * t), 0.0)


# name -> (weight function on the real line, support radius as multiple of
# the bandwidth: offsets l with |l| <= radius*k can have positive weight)
KERNELS = {
    "box": (_box, 0.5),
    "triangular": (_triangular, 1.0),
    "epanechnikov": (_epanechnikov, 1.0),
}


@dataclass(frozen=True)
class KernelSpec:
    """A built-in smoothing kernel plus a positive integer bandwidth."""

    kernel: str
    bandwidth: int

    def __post_init__(self) -> None:
        if self.kernel not in KERNELS:
            raise ValueError(
                f"unknown kernel {self.kernel!r}; choose from {sorted(KERNELS)}"
            )
        if int(self.bandwidth) < 1:
            raise ValueError("bandwidth must be a positive integer")
        object.__setattr__(self, "bandwidth", int(self.bandwidth))

    def offsets_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer offsets l and weights w(l/k), zero-weight tails dropped."""
        w, radius = KERNELS[self.kernel]
        k = self.bandwidth
        if self.kernel == "box":
            # support (-1/2, 1/2]: -k/2 < l <= k/2
            offs = np.arange(-((k - 1) // 2), k // 2 + 1)
        else:
            offs = np.arange(-radius * k, radius * k + 1, dtype=np.int64)
        weights = w(offs / k)
        keep = weights > 0.0
        return offs[keep], weights[keep]

    def discrete_mass(self) -> float:
        """The Riemann sum sum_l (1/k) w(l/k); tends to 1 as k grows."""
        _, weights = self.offsets_weights()
        return math.fsum(weights) / self.bandwidth


def make_cell_probs_from_cdf(G, M: int) -> CellProbabilities:
    """Cell probabilities p_i = G(i/M) - G((i-1)/M) from a CDF on [0, 1]."""
    if int(M) < 1:
        raise ValueError("M must be a positive integer")
    M = int(M)
    grid = np.arange(M + 1) / M
    try:
        vals = np.asarray(G(grid), dtype=np.float64)
        if vals.shape != grid.shape:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.asarray([float(G(x)) for x in grid])
    if abs(vals[0]) > SUM_TOL or abs(vals[-1] - 1.0) > SUM_TOL:
        raise ValueError("G must satisfy G(0) = 0 and G(1) = 1")
    diffs = np.diff(vals)
    if np.any(diffs < -SUM_TOL):
        raise ValueError("G is not nondecreasing on the evaluation grid")
    return CellProbabilities.from_values(np.maximum(diffs, 0.0))


def _check_counts(counts, n: int) -> np.ndarray:
    arr = np.ascontiguousarray(counts, dtype=np.int64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("counts must be a nonempty 1-D integer vector")
    if np.any(arr < 0):
        raise ValueError("counts must be nonnegative")
    if int(arr.sum()) != int(n):
        raise ValueError(f"counts sum to {int(arr.sum())}, expected n = {n}")
    return arr


def structural_df(p: CellProbabilities) -> StepCdf:
    """The structural distribution function: empirical CDF of the M*p_i."""
    M = p.M
    return StepCdf.from_weighted_values(M * p.probs, np.ones(M, dtype=np.int64), M)


def parent_density(p: CellProbabilities) -> StepDensity:
    """Histogram with height M*p_i on ((i-1)/M, i/M]; integrates to sum(p)."""
    M = p.M
    return StepDensity.on_lattice(np.arange(M + 1), M, M * p.probs)


def sdf_of_density(d: StepDensity) -> StepCdf:
    """Distribution function of the height drawn with probability = width.

    Inverts the parent-density view: for a density built from cell
    probabilities this reproduces structural_df bit for bit.
    """
    if d.edge_counts is not None:
        return StepCdf.from_weighted_values(
            d.heights, np.diff(d.edge_counts), d.denom
        )
    widths = d.widths()
    order = np.argsort(d.heights, kind="stable")
    h, w = d.heights[order], widths[order]
    starts = np.empty(h.size, dtype=bool)
    starts[0] = True
    starts[1:] = h[1:] != h[:-1]
    cum = np.cumsum(w)
    group_last = np.flatnonzero(np.append(starts[1:], True))
    levels = cum[group_last] / cum[-1]
    return StepCdf(h[starts], levels)


def natural_estimator(counts, n: int) -> StepCdf:
    """Empirical CDF of the scaled frequencies (M/n) * X_i; requires sum X = n."""
    arr = _check_counts(counts, n)
    return poissonized_estimator(arr, n)


def poissonized_estimator(counts, n: int) -> StepCdf:
    """Natural-estimator arithmetic without the total-count constraint.

    Used with independent Poisson counts, whose total is random; the
    denominator stays the original sample size n.
    """
    arr = np.ascontiguousarray(counts, dtype=np.int64)
    if arr.ndim != 1 or arr.size < 1 or np.any(arr < 0):
        raise ValueError("counts must be a nonempty nonnegative 1-D vector")
    M = arr.size
    values = (M * arr) / int(n)
    return StepCdf.from_weighted_values(values, np.ones(M, dtype=np.int64), M)


def _check_scheme(scheme: GroupingScheme, M: int) -> None:
    if scheme.M != M:
        raise ValueError(
            f"grouping breaks end at {scheme.M}, but there are {M} cells"
        )


def grouped_estimator(counts, n: int, scheme: GroupingScheme) -> StepCdf:
    """Grouped-cells estimator: mass size_j/M at M * Xbar_j / (n * size_j)."""
    arr = _check_counts(counts, n)
    _check_scheme(scheme, arr.size)
    sizes = scheme.sizes
    xbar = np.add.reduceat(arr, scheme.breaks[:-1])
    values = (arr.size * xbar) / (int(n) * sizes)
    return StepCdf.from_weighted_values(values, sizes, arr.size)


def grouped_parent_estimate(counts, n: int, scheme: GroupingScheme) -> StepDensity:
    """Histogram of group frequencies: height M * Xbar_j / (n * size_j) on
    (k_{j-1}/M, k_j/M]."""
    arr = _check_counts(counts, n)
    _check_scheme(scheme, arr.size)
    sizes = scheme.sizes
    xbar = np.add.reduceat(arr, scheme.breaks[:-1])
    heights = (arr.size * xbar) / (int(n) * sizes)
    return StepDensity.on_lattice(scheme.breaks, arr.size, heights)


def _kernel_heights(weights_source: np.ndarray, spec: KernelSpec, scale_denom: int) -> np.ndarray:
    """Discrete convolution sum_i w((j-i)/k) * source_i for j = 1..M, then
    scaled by M/scale_denom.  Indices outside 1..M contribute nothing."""
    M = weights_source.size
    offs, w = spec.offsets_weights()
    conv = np.convolve(weights_source.astype(np.float64), w)
    lo = int(offs[0])
    return (M * conv[-lo : M - lo]) / scale_denom


def kernel_parent_estimate(counts, n: int, spec: KernelSpec) -> StepDensity:
    """Kernel-smoothed parent-density estimate with height
    (M/(n k)) * sum_i w((j-i)/k) X_i on ((j-1)/M, j/M].

    No boundary correction: cells near the edges are biased low because the
    inner sum only runs over existing cells.
    """
    arr = _check_counts(counts, n)
    heights = _kernel_heights(arr, spec, int(n) * spec.bandwidth)
    return StepDensity.on_lattice(np.arange(arr.size + 1), arr.size, heights)


def kernel_estimator(counts, n: int, spec: KernelSpec) -> StepCdf:
    """Empirical CDF (mass 1/M per grid cell) of the kernel-smoothed heights."""
    arr = _check_counts(counts, n)
    heights = _kernel_heights(arr, spec, int(n) * spec.bandwidth)
    return StepCdf.from_weighted_values(
        heights, np.ones(arr.size, dtype=np.int64), arr.size
    )


def group_probabilities(p: CellProbabilities, scheme: GroupingScheme) -> np.ndarray:
    """The group masses q_j = sum of p over group j, compensated-summed."""
    _check_scheme(scheme, p.M)
    breaks = scheme.breaks
    return np.asarray(
        [math.fsum(p.probs[breaks[j] : breaks[j + 1]]) for j in range(scheme.m)]
    )


def grouped_population_sdf(p: CellProbabilities, scheme: GroupingScheme) -> StepCdf:
    """Noise-free grouped SDF: mass size_j/M at M * q_j / size_j with the
    exact group probabilities q_j = sum of p over group j.

    The jump location is computed as the compensated group average of the
    scaled values M * p_i, which equals M * q_j / size_j exactly and keeps a
    uniform p collapsing to a single knot at 1.0 under every scheme.
    """
    _check_scheme(scheme, p.M)
    breaks = scheme.breaks
    scaled = p.M * p.probs
    values = (
        np.asarray(
            [math.fsum(scaled[breaks[j] : breaks[j + 1]]) for j in range(scheme.m)]
        )
        / scheme.sizes
    )
    return StepCdf.from_weighted_values(values, scheme.sizes, p.M)


def kernel_population_sdf(p: CellProbabilities, spec: KernelSpec) -> StepCdf:
    """Noise-free kernel SDF: the kernel estimator with X_i/n replaced by p_i."""
    heights = _kernel_heights(p.probs, spec, spec.bandwidth)
    return StepCdf.from_weighted_values(
        heights, np.ones(p.M, dtype=np.int64), p.M
    )


def l1_distance(a: StepCdf, b: StepCdf) -> float:
    """Exact integral of |a - b| over the real line.

    Both CDFs reach 1, so the integrand vanishes outside the union of the
    knot ranges and the integral is a finite sum of rectangle areas.
    """
    grid = np.union1d(a.knots, b.knots)
    fa = a.evaluate(grid)
    fb = b.evaluate(grid)
    if grid.size < 2:
        return 0.0
    return float(np.sum(np.abs(fa[:-1] - fb[:-1]) * np.diff(grid)))


def sup_distance(a: StepCdf, b: StepCdf) -> float:
    """sup_x |a(x) - b(x)|, attained at a knot or just left of one."""
    grid = np.union1d(a.knots, b.knots)
    right = np.max(np.abs(a.evaluate(grid) - b.evaluate(grid)))
    left = np.max(np.abs(a.left_limit(grid) - b.left_limit(grid)))
    return float(max(right, left))


def second_moment(f: StepCdf) -> float:
    """Exact integral of x^2 dF for a step CDF: sum of mass * knot^2."""
    return float(np.sum(f.jump_masses() * f.knots * f.knots))


def poisson_mixture_expectation(p: CellProbabilities, n: int, x: float) -> float:
    """E of the Poissonized natural estimator at x:
    (1/M) sum_i P(Poisson(n p_i) <= n x / M)."""
    x = float(x)
    if x < 0.0 or math.isnan(x):
        return 0.0
    if math.isinf(x):
        return 1.0
    kmax = math.floor(int(n) * x / p.M)
    return float(np.mean(_poisson.cdf(kmax, int(n) * p.probs)))
