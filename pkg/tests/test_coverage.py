import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stagegame.coverage import (SQUASH_EPS, RoiGaussian, build_grid, chi2_quantile_2dof, make_coverage_potentials,
                                pairwise_coverage, squash, unary_coverage)
from stagegame.topology import LinkModelParams, received_power

LINK = LinkModelParams()
ROI = RoiGaussian()
GRID = build_grid(ROI, 40)
NO_CONTEXT = np.zeros((0, 3))

coords = st.floats(-600, 600)
positions = st.tuples(coords, coords, st.floats(0, 120))


class TestGrid:
    def test_unit_circle_radius(self):
        roi = RoiGaussian(np.zeros(2), np.eye(2), 0.95)
        assert math.sqrt(roi.radius2) == pytest.approx(2.4477, abs=1e-4)
        grid = build_grid(roi, 61)
        assert np.max(np.hypot(*grid.points.T)) <= 2.4477 + 1e-4

    def test_weights(self):
        assert GRID.weights.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(GRID.weights > 0)
        assert np.all(ROI.mahalanobis2(GRID.points) <= ROI.radius2)

    def test_mode_at_mean(self):
        grid = build_grid(ROI, 41)  # odd resolution puts a node on the mean
        centre = np.argmin(np.hypot(*grid.points.T))
        assert np.allclose(grid.points[centre], 0) and np.argmax(grid.weights) == centre

    def test_anisotropic(self):
        roi = RoiGaussian([100.0, -50.0], [[300.0**2, 2e4], [2e4, 100.0**2]], 0.9)
        grid = build_grid(roi, 30)
        assert np.all(roi.mahalanobis2(grid.points) <= roi.radius2)
        assert grid.weights.sum() == pytest.approx(1.0)

    @pytest.mark.parametrize("cov", [[[1.0, 0.0], [0.0, 0.0]], [[1.0, 2.0], [2.0, 1.0]], [[1.0, 0.1], [0.0, 1.0]]])
    def test_degenerate(self, cov):
        with pytest.raises(ValueError):
            RoiGaussian(np.zeros(2), cov)

    def test_bad_args(self):
        with pytest.raises(ValueError):
            build_grid(ROI, 1)
        with pytest.raises(ValueError):
            RoiGaussian(confidence=1.0)
        with pytest.raises(ValueError):
            chi2_quantile_2dof(0.0)


class TestUnary:
    def test_singleton_is_mean_power(self):
        c = np.array([50.0, 20.0, 30.0])
        raw = sum(w * received_power(LINK, math.dist(c, (*p, 0.0))) for p, w in zip(GRID.points, GRID.weights))
        assert unary_coverage(c, NO_CONTEXT, GRID, LINK) == pytest.approx(float(squash(raw, LINK)), rel=1e-12)

    def test_colocated_context(self):
        c = np.array([10.0, -40.0, 25.0])
        assert unary_coverage(c, c[None], GRID, LINK) == pytest.approx(unary_coverage(c, NO_CONTEXT, GRID, LINK),
                                                                       rel=1e-14)

    def test_centre_beats_offset(self):
        centred = unary_coverage([0, 0, 30], NO_CONTEXT, GRID, LINK)
        offset = unary_coverage([100, 0, 30], NO_CONTEXT, GRID, LINK)
        assert centred > offset

    @given(positions, st.lists(positions, max_size=4), positions)
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_context_and_bounded(self, cand, ctx, extra):
        ctx = np.array(ctx, dtype=float).reshape(-1, 3)
        base = unary_coverage(cand, ctx, GRID, LINK)
        more = unary_coverage(cand, np.vstack([ctx, extra]), GRID, LINK)
        assert more >= base
        assert SQUASH_EPS <= base <= 1.0

    @pytest.mark.parametrize("cand", [(0, 0, 30), (150, -80, 30), (400, 0, 60), (-300, -300, 30)])
    def test_refinement(self, cand):
        ctx = np.array([[100.0, 100.0, 30.0], [-50.0, 20.0, 30.0]])
        coarse = unary_coverage(cand, ctx, GRID, LINK)
        fine = unary_coverage(cand, ctx, build_grid(ROI, 80), LINK)
        assert abs(coarse - fine) / fine < 0.01


class TestPairwise:
    def test_reference_distance(self):
        assert pairwise_coverage([0, 0, 0], [1, 0, 0], LINK) == pytest.approx(float(squash(LINK.peak_power_dbm, LINK)))

    @given(positions, positions)
    def test_symmetric_bounded(self, a, b):
        v = pairwise_coverage(a, b, LINK)
        assert v == pairwise_coverage(b, a, LINK) and SQUASH_EPS <= v <= 1.0

    def test_decreasing(self):
        assert pairwise_coverage([0, 0, 0], [10, 0, 0], LINK) > pairwise_coverage([0, 0, 0], [100, 0, 0], LINK)
        d = np.linspace(1.5, 500, 50)
        v = [pairwise_coverage([0, 0, 0], [x, 0, 0], LINK) for x in d]
        assert all(b < a for a, b in zip(v, v[1:]))


class TestPotentials:
    def test_pair_invariants(self, rng):
        pot = make_coverage_potentials(ROI, 30, LINK)
        for _ in range(20):
            a, b = rng.uniform(-800, 800, 3), rng.uniform(-800, 800, 3)
            ctx = rng.uniform(-800, 800, (3, 3))
            assert 0 < pot.unary(a, ctx) <= 1 and 0 < pot.pairwise(a, b) <= 1
            assert pot.pairwise(a, b) == pot.pairwise(b, a)
        cands = rng.uniform(-300, 300, (5, 3))
        np.testing.assert_allclose(pot.unary_many(cands, ctx), [pot.unary(c, ctx) for c in cands], rtol=1e-14)
        np.testing.assert_allclose(pot.pairwise_many(cands, cands[:2]),
                                   [[pot.pairwise(x, y) for y in cands[:2]] for x in cands], rtol=1e-14)
