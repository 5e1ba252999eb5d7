import numpy as np
import pytest

from thinphase.energy import (
    SHELL_WIDTH, EnergyBreakdown, RadialProfile, annulus_deficit, eval_J_local,
    eval_J_nonlocal, flux_identity_check, homogeneity_integrand, thin_area,
    weiss_density, weiss_profile, weiss_terms
)
from thinphase.exceptions import GridError
from thinphase.extension import (
    ExtensionConfig, ThinFunction, minimizing_amplitude, poisson_extend,
    trivial_solution
)
from thinphase.grid import (
    Ball, Everywhere, GridSpec, ScalarField, ThinMask, build_grid, dirichlet_solve
)


@pytest.fixture(scope="module")
def wide_grid():
    return build_grid(GridSpec(1, 0.5, 2.0, 1.0 / 64))


def test_breakdown_total():
    energy = EnergyBreakdown(1.5, 0.25)
    assert energy.total == 1.75
    assert energy.as_dict() == {"dirichlet": 1.5, "thin_area": 0.25, "total": 1.75}


def test_zero_field_has_no_energy(line_grid):
    zero = ScalarField(line_grid, np.zeros(line_grid.shape))
    energy = eval_J_local(zero, Ball((0.0,), 0.5))
    assert (energy.dirichlet, energy.thin_area, energy.total) == (0.0, 0.0, 0.0)


def test_thin_area_of_positive_constant(wide_grid):
    ones = ScalarField(wide_grid, np.ones(wide_grid.shape))
    energy = eval_J_local(ones, Ball((0.0,), 1.0))
    assert energy.dirichlet == 0.0
    assert energy.thin_area == pytest.approx(2.0, abs=1e-12)


def test_thin_area_counts_cells(tiny_grid):
    slab = np.zeros(9)
    slab[4] = 1.0
    assert thin_area(tiny_grid, slab, Everywhere()) == pytest.approx(0.5)


def test_region_must_fit(line_grid):
    with pytest.raises(GridError):
        eval_J_local(ScalarField(line_grid, np.zeros(line_grid.shape)), Ball((0.5,), 0.75))


def test_closed_form_energy(wide_grid):
    energy = eval_J_local(trivial_solution(wide_grid), Ball((0.0,), 1.0))
    assert energy.dirichlet == pytest.approx(np.pi / 2.0, rel=0.03)
    assert energy.thin_area == pytest.approx(1.0, abs=wide_grid.h)


class TestNonlocal:
    def test_zero(self, line_grid):
        f = ThinFunction(line_grid, np.zeros(65))
        assert eval_J_nonlocal(f, Ball((0.0,), 0.5)) == 0.0

    def test_constant_is_pure_area(self, line_grid):
        f = ThinFunction(line_grid, np.full(65, 3.0))
        assert eval_J_nonlocal(f, Ball((0.0,), 0.5)) == pytest.approx(1.0, abs=1e-12)

    def test_requires_thin_function(self, line_grid):
        with pytest.raises(TypeError):
            eval_J_nonlocal(ScalarField(line_grid, np.zeros(line_grid.shape)), Ball((0.0,), 0.5))

    def test_seminorm_grows_with_oscillation(self, line_grid):
        x = line_grid.thin_coords
        smooth = ThinFunction(line_grid, 1.0 + 0.5 * np.cos(np.pi * x))
        rough = ThinFunction(line_grid, 1.0 + 0.5 * np.cos(4.0 * np.pi * x))
        region = Ball((0.0,), 0.5)
        assert eval_J_nonlocal(rough, region) > eval_J_nonlocal(smooth, region) > 1.0

    def test_ranking_matches_extension_energy(self, line_grid, trivial_line):
        x = line_grid.thin_coords
        base = minimizing_amplitude(0.5) * trivial_line.slab
        bump = np.where(np.abs(x - 0.5) < 0.25, 0.5 * np.sin(2.0 * np.pi * (x - 0.25)) ** 2, 0.0)
        competitors = [ThinFunction(line_grid, base), ThinFunction(line_grid, base + bump)]
        cfg = ExtensionConfig.for_grid(line_grid)
        nonlocal_energy = [eval_J_nonlocal(f, Ball((0.0,), 1.0)) for f in competitors]
        local_energy = [
            eval_J_local(poisson_extend(cfg, f, line_grid), Everywhere()).total for f in competitors
        ]
        assert nonlocal_energy[0] < nonlocal_energy[1]
        assert local_energy[0] < local_energy[1]


class TestRadialProfile:
    def test_width(self, line_grid):
        assert RadialProfile.for_grid(line_grid, 0.5).width == pytest.approx(SHELL_WIDTH * line_grid.h)
        assert RadialProfile.for_grid(line_grid, 0.05).width == 0.05

    @pytest.mark.parametrize("n", (1, 2, 3))
    def test_tail_and_weight(self, n):
        profile = RadialProfile(0.5, 0.125, n)
        assert profile.tail(0.0) == pytest.approx(1.0)
        assert profile.tail(profile.inner) == pytest.approx(1.0)
        assert profile.tail(0.6) == pytest.approx(0.0, abs=1e-14)
        assert profile.tail(0.5) == pytest.approx(0.5, abs=0.02)
        tails = profile.tail(np.linspace(0.4, 0.6, 21))
        assert np.all(np.diff(tails) <= 0.0)
        assert profile.volume_weight(0.1) == pytest.approx(profile.normalization)
        assert profile.volume_weight(0.6) == 0.0

    def test_normalization(self):
        assert RadialProfile(0.5, 0.125, 1).normalization == pytest.approx(2.0)
        assert RadialProfile(0.5, 0.125, 2).normalization == pytest.approx(1.0 / (0.25 + 0.125 ** 2 / 28.0))


class TestWeissDensity:
    def test_trivial_solution_density(self):
        field = trivial_solution(build_grid(GridSpec(1, 0.5, 1.0, 1.0 / 64)))
        for r in (0.25, 0.5):
            assert weiss_density(field, (0.0,), r) == pytest.approx(1.0, rel=0.02)

    @pytest.mark.parametrize("alpha, tolerance", ((0.25, 0.05), (0.5, 0.02), (0.75, 0.05)))
    def test_density_is_constant_for_trivial_solution(self, alpha, tolerance):
        field = trivial_solution(build_grid(GridSpec(1, alpha, 1.0, 1.0 / 128)))
        for r in (0.1, 0.2, 0.4, 0.6):
            assert weiss_density(field, (0.0,), r) == pytest.approx(1.0, rel=tolerance)

    @pytest.mark.slow
    def test_density_of_half_plane_cone(self):
        field = trivial_solution(build_grid(GridSpec(2, 0.5, 1.0, 1.0 / 64)))
        for r in (0.1, 0.2, 0.4, 0.6):
            assert weiss_density(field, (0.0, 0.0), r) == pytest.approx(np.pi / 2.0, rel=0.03)

    def test_density_of_quadrant_cone(self, quadrant_cone):
        assert weiss_density(quadrant_cone, (0.0, 0.0), 0.5) == pytest.approx(0.75 * np.pi, rel=0.05)

    def test_density_is_scale_free(self, trivial_line):
        scaled = ScalarField(trivial_line.grid, 3.0 * trivial_line.values)
        flux, sphere, area = weiss_terms(trivial_line, (0.0,), 0.5)
        scaled_flux, scaled_sphere, scaled_area = weiss_terms(scaled, (0.0,), 0.5)
        assert (scaled_flux, scaled_sphere) == pytest.approx((9.0 * flux, 9.0 * sphere))
        assert scaled_area == area

    def test_green_form_matches_edge_energy(self, line_grid, trivial_line):
        field = dirichlet_solve(line_grid, ThinMask.half_space(line_grid, (1.0,)), trivial_line)
        flux, _, _ = weiss_terms(field, (0.0,), 0.5)
        dist = np.broadcast_to(Ball((0.0,), 0.5).distance(line_grid), line_grid.shape)
        weight = RadialProfile.for_grid(line_grid, 0.5).volume_weight(dist)
        direct = sum(
            float(np.sum(K * np.diff(field.values, axis=axis) ** 2 * 2.0 * line_grid.edge_means(weight, axis)))
            for axis, K in enumerate(line_grid.conductances)
        )
        assert direct > 0.0
        assert flux == pytest.approx(direct, rel=1e-6)

    def test_homogeneity_integrand_vanishes(self, trivial_line):
        integrand = homogeneity_integrand(trivial_line, (0.0,))
        assert integrand[32, 0] == 0.0
        x, y = np.broadcast_arrays(*trivial_line.grid.coordinates())
        far = (np.hypot(x, y) >= 0.25) & (np.hypot(x, y) <= 0.75) & (y > 0.0)
        assert integrand[far].max() < 1e-2

    def test_profile(self, trivial_line):
        profile = weiss_profile(trivial_line, (0.0,), (0.25, 0.5, 0.75))
        assert len(profile.psi) == 3
        assert len(profile.deficit) == 2
        assert profile.span < 0.1
        assert profile.monotonicity_violation < 0.05
        assert len(profile.rows()) == 3
        assert profile.rows()[0]["deficit_from_prev"] == ""
        assert profile.as_dict()["radii"] == [0.25, 0.5, 0.75]

    def test_profile_radii_increasing(self, trivial_line):
        with pytest.raises(GridError, match="strictly increasing"):
            weiss_profile(trivial_line, (0.0,), (0.5, 0.25))

    def test_annulus_deficit_nonnegative(self, trivial_line):
        assert annulus_deficit(trivial_line, (0.0,), 0.25, 0.5) >= 0.0


def test_flux_identity_for_trivial_solution():
    field = trivial_solution(build_grid(GridSpec(1, 0.5, 1.0, 1.0 / 64)))
    lhs, rhs = flux_identity_check(field, (0.0,), 0.5)
    assert rhs == pytest.approx(lhs, rel=0.05)
