import math

import numpy as np
import pytest

from sdfest.core import CellProbabilities, make_cell_probs_from_cdf, structural_df
from sdfest.parents import quintic_cdf, uniform_cdf


class TestCellProbabilities:
    def test_basic_construction(self):
        p = CellProbabilities.from_values([0.2, 0.8])
        assert p.M == 2
        assert np.array_equal(p.probs, [0.2, 0.8])
        assert not p.probs.flags.writeable

    def test_renormalizes_small_drift(self):
        raw = np.array([0.25, 0.25, 0.25, 0.25]) * (1.0 + 5e-10)
        p = CellProbabilities.from_values(raw)
        assert abs(math.fsum(p.probs) - 1.0) <= 1e-12

    def test_rejects_large_drift(self):
        with pytest.raises(ValueError, match="drift"):
            CellProbabilities.from_values([0.5, 0.5 + 1e-8])

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            CellProbabilities.from_values([])
        with pytest.raises(ValueError):
            CellProbabilities.from_values([0.5, -0.5, 1.0])
        with pytest.raises(ValueError):
            CellProbabilities.from_values([0.5, np.nan])

    def test_direct_constructor_is_strict(self):
        with pytest.raises(ValueError):
            CellProbabilities(np.array([0.5, 0.5 + 1e-10]))

    def test_single_cell(self):
        p = CellProbabilities.from_values([1.0])
        assert p.M == 1
        assert structural_df(p) == structural_df(p)


class TestMakeCellProbsFromCdf:
    def test_uniform_increments(self):
        p = make_cell_probs_from_cdf(uniform_cdf, 4)
        assert np.array_equal(p.probs, [0.25, 0.25, 0.25, 0.25])

    def test_quintic_m2_exact_halves(self):
        # the quintic density is symmetric about 1/2, so G(1/2) = 1/2
        p = make_cell_probs_from_cdf(quintic_cdf, 2)
        assert np.array_equal(p.probs, [0.5, 0.5])

    def test_quintic_m1000_peak(self):
        p = make_cell_probs_from_cdf(quintic_cdf, 1000)
        scaled = 1000 * p.probs
        peak = int(np.argmax(scaled))
        assert 498 <= peak <= 501
        assert abs(scaled.max() - 1.875) < 1e-4  # max of g is g(1/2) = 15/8

    def test_rejects_m_zero(self):
        with pytest.raises(ValueError):
            make_cell_probs_from_cdf(uniform_cdf, 0)

    def test_rejects_non_monotone(self):
        wavy = lambda x: np.asarray(x) + 0.3 * np.sin(2.0 * np.pi * np.asarray(x))
        with pytest.raises(ValueError, match="nondecreasing"):
            make_cell_probs_from_cdf(wavy, 8)

    def test_rejects_bad_endpoints(self):
        with pytest.raises(ValueError, match="G"):
            make_cell_probs_from_cdf(lambda x: np.asarray(x) * 0.5, 4)

    def test_scalar_callable_supported(self):
        p = make_cell_probs_from_cdf(lambda x: float(np.clip(x, 0, 1)) ** 2, 5)
        grid = np.arange(6) / 5
        assert np.allclose(p.probs, np.diff(grid**2), atol=1e-15)


def test_structural_df_permutation_invariant():
    rng = np.random.default_rng(42)
    for _ in range(30):
        M = int(rng.integers(2, 40))
        raw = rng.dirichlet(np.ones(M))
        ref = structural_df(CellProbabilities.from_values(raw))
        shuffled = structural_df(CellProbabilities.from_values(rng.permutation(raw)))
        assert ref == shuffled
