import math

import numpy as np
import pytest

from cdm import (
    Grid2D,
    RasterPlan,
    StateVector,
    fidelity,
    fix_global_phase,
    gaussian_state,
    partial_raster_recover,
    raster_dm,
)

from conftest import random_state

ALPHA = math.radians(20.0)


class TestRasterPlan:
    def test_random_subset_size_and_uniqueness(self, grid_desk):
        plan = RasterPlan.random(grid_desk, 0.25, seed=3)
        assert plan.pixels.size == 48
        assert len(np.unique(plan.pixels)) == 48
        assert plan.pixels.min() >= 0 and plan.pixels.max() < 192

    def test_reproducible(self, grid_desk):
        a = RasterPlan.random(grid_desk, 0.3, seed=7)
        b = RasterPlan.random(grid_desk, 0.3, seed=7)
        assert np.array_equal(a.pixels, b.pixels)
        c = RasterPlan.random(grid_desk, 0.3, seed=8)
        assert not np.array_equal(a.pixels, c.pixels)

    def test_validation(self, grid_desk):
        with pytest.raises(ValueError):
            RasterPlan(np.array([1, 1]), 0.5)
        with pytest.raises(ValueError):
            RasterPlan(np.array([], dtype=int), 0.5)
        with pytest.raises(ValueError):
            RasterPlan(np.array([-1]), 0.5)
        with pytest.raises(ValueError):
            RasterPlan.random(grid_desk, 0.0, seed=0)

    def test_full_plan(self, grid_small):
        plan = RasterPlan.full(grid_small)
        assert np.array_equal(plan.pixels, np.arange(16))


class TestRasterDm:
    def test_analytic_is_exact_inverse(self, grid_desk):
        for seed in range(5):
            s = random_state(grid_desk, seed=seed)
            st = raster_dm(s, ALPHA, model="analytic")
            assert fidelity(st, s) >= 1 - 1e-12

    def test_exact_model_uniform_state(self, grid_desk):
        # weak-measurement bias is a global factor on a uniform state
        amps = np.full(grid_desk.n, 1 / math.sqrt(grid_desk.n), dtype=complex)
        s = StateVector(grid_desk, amps, normalized=True)
        st = raster_dm(s, ALPHA, model="exact")
        assert fidelity(st, s) >= 0.999

    def test_exact_model_aberrated_state(self, desk_state):
        st = raster_dm(desk_state, ALPHA, model="exact")
        assert fidelity(st, desk_state) >= 0.999

    def test_counts_model_shot_noise_propagation(self, grid_desk, desk_state):
        # predicted fidelity from shot-noise propagation:
        #   fid = (1 + N^2 / (2 alpha^2 budget))^(-1/2)
        # Monte-Carlo must land near the prediction, and a 1e7 budget
        # pushes it above 0.99
        n = grid_desk.n
        budget = 1e6
        predicted = (1 + n ** 2 / (2 * ALPHA ** 2 * budget)) ** -0.5
        fids = [fidelity(raster_dm(desk_state, ALPHA, model="counts",
                                   budget=budget, seed=seed), desk_state)
                for seed in range(5)]
        assert abs(np.mean(fids) - predicted) < 0.02
        st = raster_dm(desk_state, ALPHA, model="counts", budget=1e7, seed=1)
        assert fidelity(st, desk_state) >= 0.99

    def test_counts_model_needs_budget_and_seed(self, desk_state):
        with pytest.raises(ValueError):
            raster_dm(desk_state, ALPHA, model="counts")

    def test_unknown_model(self, desk_state):
        with pytest.raises(ValueError):
            raster_dm(desk_state, ALPHA, model="quantum")


class TestPartialRasterRecover:
    def test_full_plan_matches_raster_dm(self, grid_desk, desk_state):
        plan = RasterPlan.full(grid_desk)
        a = partial_raster_recover(desk_state, plan, ALPHA)
        b = raster_dm(desk_state, ALPHA)
        assert np.abs(a.amps - b.amps).max() < 1e-14

    def test_covered_support_gives_unit_fidelity(self):
        g = Grid2D(4, 4)
        amps = np.zeros(g.n, dtype=complex)
        amps[:8] = np.arange(1, 9)
        s = StateVector(g, amps).normalize()
        plan = RasterPlan(np.arange(8), 0.5)
        st = partial_raster_recover(s, plan, ALPHA)
        assert fidelity(st, s) >= 1 - 1e-12

    def test_fidelity_equals_energy_fraction_root(self, grid_desk, desk_state):
        truth = fix_global_phase(desk_state)
        for seed in range(20):
            plan = RasterPlan.random(grid_desk, 0.3, seed=seed)
            st = partial_raster_recover(desk_state, plan, ALPHA)
            captured = float(np.sum(np.abs(truth.amps[plan.pixels]) ** 2))
            assert abs(fidelity(st, desk_state) - math.sqrt(captured)) < 1e-10

    def test_quarter_scan_statistics(self, grid_desk, desk_state):
        fids = [fidelity(partial_raster_recover(
            desk_state, RasterPlan.random(grid_desk, 0.25, seed=s), ALPHA),
            desk_state) for s in range(100)]
        assert 0.4 <= np.mean(fids) <= 0.75

    def test_mean_fidelity_monotone_in_fraction(self, grid_desk, desk_state):
        means = []
        for frac in (0.1, 0.3, 0.5, 0.7, 0.9):
            fids = [fidelity(partial_raster_recover(
                desk_state, RasterPlan.random(grid_desk, frac, seed=s), ALPHA),
                desk_state) for s in range(100)]
            means.append(np.mean(fids))
        assert all(b >= a for a, b in zip(means, means[1:]))

    def test_plan_out_of_range(self, grid_small, grid_desk, desk_state):
        plan = RasterPlan.random(grid_desk, 0.5, seed=0)
        small_state = gaussian_state(grid_small, 2.0)
        with pytest.raises(ValueError):
            partial_raster_recover(small_state, plan, ALPHA)
