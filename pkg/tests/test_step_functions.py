from fractions import Fraction

import numpy as np
import pytest

from sdfest.core import CellProbabilities, StepCdf, StepDensity, parent_density


class TestStepCdf:
    def test_duplicate_values_merge(self):
        f = StepCdf.from_weighted_values([1.0, 3.0, 1.0], [1, 2, 1], 4)
        assert np.array_equal(f.knots, [1.0, 3.0])
        assert np.array_equal(f.levels, [0.5, 1.0])

    def test_point_mass(self):
        f = StepCdf.point_mass(2.5)
        assert f.evaluate(2.5) == 1.0
        assert f.evaluate(2.4999) == 0.0

    def test_right_continuity_at_knots(self):
        f = StepCdf.from_weighted_values([0.4, 1.6], [1, 1], 2)
        for knot, level, prev in [(0.4, 0.5, 0.0), (1.6, 1.0, 0.5)]:
            assert f.evaluate(knot) == level
            assert f.evaluate(knot + 1e-12) == level
            assert f.evaluate(knot - 1e-12) == prev
            assert f.left_limit(knot) == prev

    def test_evaluate_vectorized(self):
        f = StepCdf.from_weighted_values([0.4, 1.6], [1, 1], 2)
        out = f.evaluate(np.array([-1.0, 0.4, 1.0, 1.6, 9.0]))
        assert np.array_equal(out, [0.0, 0.5, 0.5, 1.0, 1.0])

    def test_levels_monotone_final_exactly_one(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            M = int(rng.integers(1, 60))
            vals = rng.normal(size=M)
            f = StepCdf.from_weighted_values(vals, np.ones(M, dtype=int), M)
            assert np.all(np.diff(f.levels) > 0)
            assert f.levels[-1] == 1.0
            assert f.levels[0] > 0.0

    def test_zero_mass_values_dropped(self):
        f = StepCdf.from_weighted_values([5.0, 1.0], [0, 4], 4)
        assert np.array_equal(f.knots, [1.0])

    def test_validation(self):
        with pytest.raises(ValueError):
            StepCdf([2.0, 1.0], [0.5, 1.0])
        with pytest.raises(ValueError):
            StepCdf([1.0, 2.0], [0.5, 0.9])
        with pytest.raises(ValueError):
            StepCdf([1.0], [1.0 + 1e-12])
        with pytest.raises(ValueError):
            StepCdf.from_weighted_values([1.0], [2], 4)
        with pytest.raises(ValueError):
            StepCdf([], [])

    def test_from_knots_levels_merges(self):
        f = StepCdf.from_knots_levels([3.0, 1.0, 1.0], [1.0, 0.25, 0.5])
        assert np.array_equal(f.knots, [1.0, 3.0])
        assert np.array_equal(f.levels, [0.5, 1.0])

    def test_jump_masses(self):
        f = StepCdf.from_weighted_values([0.4, 1.6], [1, 3], 4)
        assert np.array_equal(f.jump_masses(), [0.25, 0.75])


class TestStepDensity:
    def test_validation(self):
        with pytest.raises(ValueError):
            StepDensity([0.0, 0.5], [1.0])  # must end at 1
        with pytest.raises(ValueError):
            StepDensity([0.1, 1.0], [1.0])  # must start at 0
        with pytest.raises(ValueError):
            StepDensity([0.0, 0.5, 1.0], [1.0, -0.1])
        with pytest.raises(ValueError):
            StepDensity([0.0, 0.5, 0.5, 1.0], [1.0, 1.0, 1.0])

    def test_lattice_breakpoints(self):
        d = StepDensity.on_lattice(np.array([0, 2, 5]), 5, [2.0, 1.0 / 3.0])
        assert np.array_equal(d.breakpoints, [0.0, 0.4, 1.0])
        assert np.array_equal(d.edge_counts, [0, 2, 5])

    def test_parent_density_integral_tolerance(self):
        # type invariant: unit mass within 1e-9 for densities built from cells
        rng = np.random.default_rng(11)
        for _ in range(50):
            M = int(rng.integers(1, 80))
            d = parent_density(CellProbabilities.from_values(rng.dirichlet(np.ones(M))))
            assert abs(d.integral() - 1.0) <= 1e-9

    def test_parent_density_integral_rational(self):
        # knot*height arithmetic in exact rationals: dyadic cells integrate to
        # exactly 1, everything else to within a few ulps of the rounded heights
        p = CellProbabilities.from_values([0.25, 0.25, 0.125, 0.375])
        d = parent_density(p)
        total = sum(
            Fraction(h) * (Fraction(i + 1, 4) - Fraction(i, 4))
            for i, h in enumerate(d.heights.tolist())
        )
        assert total == 1

        rng = np.random.default_rng(5)
        for _ in range(25):
            M = int(rng.integers(1, 50))
            d = parent_density(CellProbabilities.from_values(rng.dirichlet(np.ones(M))))
            total = sum(Fraction(h) / M for h in d.heights.tolist())
            assert abs(float(total - 1)) <= 1e-12
