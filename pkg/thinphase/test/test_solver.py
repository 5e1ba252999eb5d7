

import numpy as np
import pytest

from thinphase.boundaries.analytic import TrivialTraceBoundary
from thinphase.boundaries.random_fourier import RandomFourierBoundary
from thinphase.exceptions import ConfigurationError, GridError
from thinphase.grid import Everywhere, GridSpec, build_grid, dirichlet_energy
from thinphase.solver import (
    SolveConfig, _area_change, _Candidate, _FlipEstimator, brute_force_minimize,
    flip_certificate, minimize
)

FORCED_SWEEP = SolveConfig(exhaustive_threshold=0)


class TestSolveConfig:
    def test_defaults(self):
        cfg = SolveConfig()
        assert cfg.exhaustive_threshold == 16
        assert cfg.as_dict()["sweep_order"] == "lexicographic"

    @pytest.mark.parametrize("kwargs, match", (
        ({"flip_tolerance": -1.0}, "flip_tolerance"),
        ({"exhaustive_threshold": 25}, "exhaustive_threshold"),
        ({"starts": 0}, "starts"),
        ({"starts": 5}, "starts"),
        ({"max_outer_iters": 0}, "max_outer_iters"),
        ({"sweep_order": "random"}, "sweep_order"),
        ({"tolerance": 0.0}, "tolerance"),
    ))
    def test_invalid(self, kwargs, match):
        with pytest.raises(ConfigurationError, match=match):
            SolveConfig(**kwargs)


def test_zero_boundary_gives_zero_minimiser(tiny_grid):
    result = minimize(tiny_grid, np.zeros(tiny_grid.shape))
    assert result.energy.total == 0.0
    assert np.all(result.field.values == 0.0)
    assert not result.mask.states.any()
    assert result.converged
    assert result.method == "exhaustive"


def test_exhaustive_is_reproducible(tiny_grid):
    boundary = RandomFourierBoundary().generate(tiny_grid, seed=3)
    first = minimize(tiny_grid, boundary)
    second = minimize(tiny_grid, boundary)
    np.testing.assert_array_equal(first.field.values, second.field.values)
    np.testing.assert_array_equal(first.mask.states, second.mask.states)


@pytest.mark.parametrize("seed", range(4))
def test_minimiser_properties(tiny_grid, seed):
    boundary = RandomFourierBoundary().generate(tiny_grid, seed=seed)
    result = minimize(tiny_grid, boundary)
    assert result.field.is_nonnegative()
    assert result.mask.consistent_with(result.field)
    np.testing.assert_allclose(
        result.field.values[tiny_grid.boundary], boundary[tiny_grid.boundary],
    )
    assert flip_certificate(result, boundary) >= -1e-10


@pytest.mark.parametrize("alpha", (0.25, 0.5, 0.75))
def test_sweep_matches_oracle(alpha, subtests):
    grid = build_grid(GridSpec(1, alpha, 1.0, 0.25))
    for seed in range(5):
        with subtests.test(msg="seed", seed=seed):
            boundary = RandomFourierBoundary().generate(grid, seed=seed)
            oracle = brute_force_minimize(grid, boundary)
            sweep = minimize(grid, boundary, FORCED_SWEEP)
            assert sweep.method == "sweep"
            assert sweep.converged
            np.testing.assert_array_equal(sweep.mask.states, oracle.mask.states)
            assert sweep.energy.total == pytest.approx(oracle.energy.total, rel=1e-9, abs=1e-12)


def test_constant_boundary_stays_positive(tiny_grid):
    boundary = np.full(tiny_grid.shape, 10.0)
    for cfg in (SolveConfig(), FORCED_SWEEP):
        result = minimize(tiny_grid, boundary, cfg)
        assert result.mask.states.all()
        np.testing.assert_allclose(result.field.values, 10.0)
        assert result.energy.thin_area == pytest.approx(2.0)


@pytest.mark.parametrize("alpha", (0.25, 0.5, 0.75))
def test_trivial_trace_zero_set_is_the_half_line(alpha):
    grid = build_grid(GridSpec(1, alpha, 1.0, 0.25))
    boundary = TrivialTraceBoundary().generate(grid)
    oracle = brute_force_minimize(grid, boundary)
    states = oracle.mask.states
    # ZERO on a left segment ending within one node of the origin
    assert not states[0]
    assert np.all(np.diff(states.astype(int)) >= 0)
    assert abs(grid.thin_coords[oracle.mask.zero].max()) <= grid.h + 1e-12
    sweep = minimize(grid, boundary, FORCED_SWEEP)
    np.testing.assert_array_equal(sweep.mask.states, states)


def test_trivial_trace_direction_mirrors_zero_set():
    grid = build_grid(GridSpec(1, 0.5, 1.0, 0.25))
    right = brute_force_minimize(grid, TrivialTraceBoundary().generate(grid)).mask.states
    left = brute_force_minimize(grid, TrivialTraceBoundary(direction="-1").generate(grid)).mask.states
    np.testing.assert_array_equal(left, right[::-1])


class TestFlipMoves:
    def test_area_change_needs_a_pair(self, tiny_grid):
        states = np.ones(9, dtype=bool)
        h = tiny_grid.h
        assert _area_change(tiny_grid, states, [(4,)], False) == 0.0
        assert _area_change(tiny_grid, states, [(4,), (5,)], False) == pytest.approx(-h)
        zero = states.copy()
        zero[3:6] = False
        assert _area_change(tiny_grid, zero, [(3,), (4,), (5,)], True) == pytest.approx(2.0 * h)

    def test_pair_estimates_are_exact(self, tiny_grid):
        cfg = SolveConfig()
        boundary = np.ones(tiny_grid.shape)
        positive = _Candidate(tiny_grid, np.ones(9, dtype=bool), boundary, cfg)
        pair = [(3,), (4,)]
        states = positive.states.copy()
        states[[3, 4]] = False
        carved = _Candidate(tiny_grid, states, boundary, cfg)
        increase = dirichlet_energy(carved.field, Everywhere()) - dirichlet_energy(positive.field, Everywhere())
        assert increase > 0.0

        removal = _FlipEstimator(tiny_grid, positive.states).removal(pair, positive.field.slab)
        assert removal == pytest.approx(increase, rel=1e-6)
        flux = tiny_grid.flux_sum(carved.field.values)[..., 0]
        release = _FlipEstimator(tiny_grid, carved.states).release(pair, flux)
        assert release == pytest.approx(-increase, rel=1e-6)


def test_exhaustive_limit(line_grid):
    with pytest.raises(ConfigurationError, match="exceeds the limit"):
        brute_force_minimize(line_grid, np.zeros(line_grid.shape))


def test_boundary_validation(tiny_grid):
    with pytest.raises(GridError, match="nonnegative"):
        minimize(tiny_grid, -np.ones(tiny_grid.shape))
    with pytest.raises(ValueError, match="does not match"):
        minimize(tiny_grid, np.zeros((3, 3)))


def test_summary(tiny_grid):
    result = minimize(tiny_grid, np.ones(tiny_grid.shape))
    summary = result.summary()
    assert set(summary) == {"energy", "iterations", "converged", "method", "flips", "zero_nodes"}
    assert summary["iterations"] == 2 ** 7
    assert summary["energy"]["total"] == pytest.approx(result.energy.total)


def test_sweep_on_larger_grid(line_grid):
    boundary = RandomFourierBoundary(seed=1).generate(line_grid)
    result = minimize(line_grid, boundary)
    assert result.method == "sweep"
    assert result.field.is_nonnegative()
    assert result.mask.consistent_with(result.field)
    assert all(change < 0.0 for _, change in result.flips_log)
