import numpy as np
import pytest

from slm.errors import InvalidParameterError
from slm.grid import Grid
from slm.stats import (
    default_pair_edges,
    density_estimate,
    estimate_correlations,
    pair_correlation,
    subpoisson_diagnostic,
)


@pytest.fixture
def grid():
    return Grid(1, 10.0, 20)


def poisson_runs(rng, intensity, side, dim, runs):
    out = []
    for _ in range(runs):
        n = rng.poisson(intensity * side**dim)
        out.append(rng.uniform(0.0, side, size=(n, dim)))
    return out


class TestDensity:
    def test_poisson_mean(self, grid):
        rng = np.random.default_rng(0)
        runs = poisson_runs(rng, 2.0, grid.side, 1, 400)
        est = density_estimate(runs, grid)
        z = (est.mean - 2.0) / est.se
        assert np.max(np.abs(z)) < 4.5
        assert abs(est.mean.mean() - 2.0) < 0.1

    def test_counts_partition_exactly(self, grid):
        pts = np.array([[0.1], [0.1], [9.95], [5.0]])
        est = density_estimate([pts, pts], grid)
        assert est.mean.sum() * grid.cell_volume == pytest.approx(4.0)
        assert np.all(est.se == 0.0)

    def test_requires_two_runs(self, grid):
        with pytest.raises(InvalidParameterError):
            density_estimate([np.zeros((3, 1))], grid)

    def test_translation_covariance(self, grid):
        # shifting every run by one cell width rolls the estimate
        rng = np.random.default_rng(1)
        runs = poisson_runs(rng, 1.5, grid.side, 1, 50)
        shifted = [np.mod(p + grid.spacing, grid.side) for p in runs]
        a = density_estimate(runs, grid)
        b = density_estimate(shifted, grid)
        assert np.allclose(np.roll(a.mean, 1), b.mean, rtol=1e-12)


class TestPairCorrelation:
    def test_poisson_is_flat(self, grid):
        rng = np.random.default_rng(2)
        runs = poisson_runs(rng, 3.0, grid.side, 1, 300)
        edges = np.linspace(0.0, 5.0, 11)
        bins = pair_correlation(runs, grid.side, 1, edges)
        for b in bins:
            assert abs(b.g - 1.0) < 4.5 * max(b.se, 1e-3)

    def test_fixed_distance_pair(self, grid):
        # every run holds one pair at distance 1: all mass in one bin
        rng = np.random.default_rng(3)
        runs = []
        for _ in range(50):
            x = rng.uniform(0.0, grid.side)
            runs.append(np.array([[x], [np.mod(x + 1.0, grid.side)]]))
        edges = np.linspace(0.0, 2.0, 4)
        bins = pair_correlation(runs, grid.side, 1, edges)
        hot = [b for b in bins if b.r_lo < 1.0 <= b.r_hi]
        assert len(hot) == 1
        assert hot[0].g > 0
        for b in bins:
            if b is not hot[0]:
                assert b.g == 0.0

    def test_minimum_image_distance_used(self, grid):
        # 0.3 and 9.8 are 0.5 apart through the boundary
        runs = [np.array([[0.3], [9.8]])] * 4
        edges = np.array([0.0, 1.0, 2.0])
        bins = pair_correlation(runs, grid.side, 1, edges)
        assert bins[0].g > 0 and bins[1].g == 0.0

    def test_bins_beyond_half_side_rejected(self, grid):
        with pytest.raises(InvalidParameterError):
            pair_correlation([np.zeros((2, 1))] * 2, grid.side, 1, np.array([0.0, 6.0]))

    def test_default_edges(self, grid):
        edges = default_pair_edges(10.0, 0.5)
        assert edges[0] == 0.0 and edges[-1] == pytest.approx(2.0)
        assert len(edges) == 25
        assert default_pair_edges(10.0, 5.0)[-1] == pytest.approx(5.0)
        assert default_pair_edges(10.0, 0.0)[-1] == pytest.approx(5.0)

    def test_relabeling_invariance(self, grid):
        rng = np.random.default_rng(4)
        runs = poisson_runs(rng, 2.0, grid.side, 1, 20)
        perm = [p[rng.permutation(len(p))] for p in runs]
        edges = np.linspace(0.0, 4.0, 9)
        a = pair_correlation(runs, grid.side, 1, edges)
        b = pair_correlation(perm, grid.side, 1, edges)
        for x, y in zip(a, b):
            assert x.g == pytest.approx(y.g, rel=1e-12)


class TestSubPoisson:
    def estimate(self, intensity=2.0, runs=200, seed=5):
        grid = Grid(1, 10.0, 20)
        rng = np.random.default_rng(seed)
        data = poisson_runs(rng, intensity, grid.side, 1, runs)
        edges = np.linspace(0.0, 4.0, 9)
        return estimate_correlations(data, grid, edges, t=0.0)

    def test_generous_bound_passes(self):
        report = subpoisson_diagnostic(self.estimate(), C=5.0)
        assert report.passed
        assert report.flagged_cells == [] and report.flagged_bins == []

    def test_tight_bound_flags(self):
        report = subpoisson_diagnostic(self.estimate(), C=0.5)
        assert not report.passed
        assert report.flagged_cells

    def test_minimal_C_is_a_valid_witness(self):
        est = self.estimate()
        report = subpoisson_diagnostic(est, C=0.5)
        again = subpoisson_diagnostic(est, C=report.minimal_C + 1e-9)
        assert again.passed
        # just below the witness something must flag
        below = subpoisson_diagnostic(est, C=report.minimal_C * (1 - 1e-6))
        assert not below.passed

    def test_minimal_C_monotone_in_intensity(self):
        low = subpoisson_diagnostic(self.estimate(intensity=1.0), C=10.0)
        high = subpoisson_diagnostic(self.estimate(intensity=4.0), C=10.0)
        assert low.minimal_C < high.minimal_C

    def test_invalid_C(self):
        with pytest.raises(InvalidParameterError):
            subpoisson_diagnostic(self.estimate(), C=0.0)
