"""Tests for the degenerate diffusion solver and weak-form residuals."""

import math

import numpy as np
import pytest

from pmmsim import pde
from pmmsim.pde import (
    BoundaryCondition,
    DensityGrid,
    NumericalInstability,
    TestFunction,
    max_stable_dt,
    pde_step,
    robin_stationary_coefficients,
    solve,
    stationary_profile,
    weak_form_residual,
)

DIR = BoundaryCondition.dirichlet(0.2, 0.8)
ROB = BoundaryCondition.robin(1.0, 0.2, 0.8)
NEU = BoundaryCondition.robin(0.0, 0.2, 0.8)


def sin_test_function():
    return TestFunction.from_space(
        lambda u: math.sin(math.pi * u),
        lambda u: math.pi * math.cos(math.pi * u),
        lambda u: -math.pi**2 * math.sin(math.pi * u),
        klass="vanishing",
        name="sin(pi u)",
    )


class TestStationaryProfiles:
    def test_dirichlet_endpoints(self):
        assert stationary_profile(DIR, 0.0) == pytest.approx(0.2)
        assert stationary_profile(DIR, 1.0) == pytest.approx(0.8)

    def test_dirichlet_midpoint_closed_form(self):
        bc = BoundaryCondition.dirichlet(1e-12, 1 - 1e-12)
        # degenerate alpha=0, beta=1 up to the (0,1) constraint: sqrt(u)
        assert stationary_profile(bc, 0.25) == pytest.approx(0.5, abs=1e-6)

    def test_neumann_constant(self):
        u = np.linspace(0, 1, 11)
        assert np.allclose(stationary_profile(NEU, u), 0.5)

    def test_robin_equilibrium_is_flat(self):
        bc = BoundaryCondition.robin(2.7, 0.4, 0.4)
        u = np.linspace(0, 1, 7)
        assert np.allclose(stationary_profile(bc, u), 0.4, atol=1e-12)

    def test_robin_coefficients_satisfy_flux_conditions(self):
        # derived oracle: the affine square must satisfy both boundary relations
        for kappa, al, be in [(1.0, 0.2, 0.8), (0.3, 0.6, 0.25), (5.0, 0.45, 0.5)]:
            bc = BoundaryCondition.robin(kappa, al, be)
            a, b = robin_stationary_coefficients(bc)
            rho0 = math.sqrt(b)
            rho1 = math.sqrt(a + b)
            assert a == pytest.approx(kappa * (rho0 - al), rel=1e-12)
            assert a == pytest.approx(kappa * (be - rho1), rel=1e-9)

    def test_domain_check(self):
        with pytest.raises(ValueError):
            stationary_profile(DIR, 1.5)


class TestStep:
    def test_constant_profile_is_neumann_stationary(self):
        grid = DensityGrid.from_profile(lambda u: 0.37, 32)
        out = pde_step(grid, max_stable_dt(grid.du), NEU)
        assert np.array_equal(out.values, grid.values)

    def test_cfl_guard(self):
        grid = DensityGrid.from_profile(lambda u: 0.5, 32)
        with pytest.raises(ValueError):
            pde_step(grid, 10 * max_stable_dt(grid.du), NEU)

    def test_instability_detected(self):
        grid = DensityGrid(values=np.full(33, 1.5), du=1 / 32)
        with pytest.raises(NumericalInstability):
            pde_step(grid, max_stable_dt(1 / 32), NEU)

    @pytest.mark.parametrize("bc", [DIR, ROB, NEU])
    def test_stationary_profiles_are_discrete_fixed_points(self, bc):
        # the ghost discretization is exact on affine squares
        for J in (32, 128):
            grid = DensityGrid.from_profile(lambda u: stationary_profile(bc, u), J)
            out = pde_step(grid, max_stable_dt(grid.du), bc)
            assert np.abs(out.values - grid.values).max() < 1e-13

    def test_neumann_mass_per_step(self):
        grid = DensityGrid.from_profile(lambda u: 0.4 + 0.2 * math.sin(math.pi * u), 64)
        out = pde_step(grid, max_stable_dt(grid.du), NEU)
        assert abs(out.mass() - grid.mass()) < 1e-12

    def test_maximum_principle(self):
        rng = np.random.default_rng(0)
        for bc in (DIR, ROB, NEU):
            vals = rng.uniform(0.2, 0.8, 33)
            grid = DensityGrid(values=vals, du=1 / 32)
            for _ in range(200):
                grid = pde_step(grid, max_stable_dt(grid.du), bc)
            assert grid.values.min() >= 0.0 and grid.values.max() <= 1.0


class TestSolve:
    def test_constant_equilibrium_dirichlet(self):
        bc = BoundaryCondition.dirichlet(0.5, 0.5)
        field = solve(lambda u: 0.5, bc, 0.5, 64, sample_times=[0.0, 0.25, 0.5])
        assert np.allclose(field.values, 0.5)

    def test_stays_near_stationary_start(self):
        for bc in (DIR, ROB):
            field = solve(lambda u: stationary_profile(bc, u), bc, 1.0, 64,
                          sample_times=[0.0, 1.0])
            assert np.abs(field.values[-1] - field.values[0]).max() < 1e-10

    def test_neumann_mass_conserved_over_run(self):
        field = solve(lambda u: 0.3 if u < 0.5 else 0.7, NEU, 0.5, 128,
                      sample_times=[0.0, 0.5])
        m = [np.trapezoid(v, dx=field.du) for v in field.values]
        assert abs(m[-1] - m[0]) < 1e-10

    def test_self_convergence_order(self):
        sols = {}
        for J in (64, 128, 256):
            f = solve(lambda u: 0.5, DIR, 0.25, J, sample_times=[0.25])
            sols[J] = f.values[-1]
        e1 = np.abs(sols[64] - sols[128][::2]).max()
        e2 = np.abs(sols[128] - sols[256][::2]).max()
        assert math.log2(e1 / e2) > 1.9

    def test_long_run_approaches_stationary(self):
        field = solve(lambda u: 0.5, DIR, 3.0, 64, sample_times=[3.0])
        target = stationary_profile(DIR, field.nodes)
        assert np.abs(field.values[-1] - target).max() < 1e-6

    def test_lipschitz_in_data(self):
        # perturbation of the initial state decays linearly (uniqueness proxy)
        def run(delta):
            g = lambda u: 0.5 + delta * math.sin(math.pi * u)
            return solve(g, DIR, 0.2, 64, sample_times=[0.2]).values[-1]

        base = run(0.0)
        d1 = np.abs(run(0.02) - base).mean()
        d2 = np.abs(run(0.002) - base).mean()
        assert d2 < 0.15 * d1  # ~ linear scaling in the perturbation size


class TestWeakFormResiduals:
    def test_zero_at_time_zero(self):
        field = solve(lambda u: 0.5, DIR, 0.1, 32, sample_times=[0.0, 0.1])
        G = sin_test_function()
        assert weak_form_residual(field, lambda u: 0.5, G, DIR, 0.0) == pytest.approx(0.0)

    def test_class_mismatch_rejected(self):
        field = solve(lambda u: 0.5, DIR, 0.1, 32, sample_times=[0.0, 0.1])
        G_free = TestFunction.from_space(lambda u: 1.0, lambda u: 0.0, lambda u: 0.0)
        with pytest.raises(ValueError):
            weak_form_residual(field, lambda u: 0.5, G_free, DIR, 0.1)

    def test_constant_equilibrium_cancels_to_quadrature_error(self):
        bc = BoundaryCondition.dirichlet(0.5, 0.5)
        G = sin_test_function()
        vals = []
        for J in (16, 32, 64):
            field = solve(lambda u: 0.5, bc, 0.2, J,
                          sample_times=np.linspace(0, 0.2, 9))
            vals.append(abs(weak_form_residual(field, lambda u: 0.5, G, bc, 0.2)))
        assert vals[0] < 2e-3
        assert vals[2] < vals[1] < vals[0]
        # trapezoidal in space: second order
        assert vals[0] / vals[1] > 3.0

    def test_solution_residual_decreases_under_refinement(self):
        G = sin_test_function()
        res = []
        for J in (32, 64, 128):
            field = solve(lambda u: 0.5, DIR, 0.3, J,
                          sample_times=np.linspace(0, 0.3, 25))
            res.append(abs(weak_form_residual(field, lambda u: 0.5, G, DIR, 0.3)))
        assert res[2] < res[1] < res[0]

    def test_robin_residual_on_solution(self):
        Gf = TestFunction.from_space(
            lambda u: 1.0 + 0.5 * u * u,
            lambda u: u,
            lambda u: 1.0,
            klass="free",
        )
        res = []
        for J in (32, 64, 128):
            field = solve(lambda u: 0.5, ROB, 0.3, J,
                          sample_times=np.linspace(0, 0.3, 25))
            res.append(abs(weak_form_residual(field, lambda u: 0.5, Gf, ROB, 0.3)))
        assert res[2] < res[1] < res[0]

    def test_robin_flux_consistency_at_stationarity(self):
        # one-sided second-order derivative of rho^2 matches the flux law
        errs = []
        for J in (64, 128):
            field = solve(lambda u: stationary_profile(ROB, u), ROB, 0.2, J,
                          sample_times=[0.2])
            q = field.values[-1] ** 2
            du = field.du
            dq0 = (-3 * q[0] + 4 * q[1] - q[2]) / (2 * du)
            errs.append(abs(dq0 - ROB.kappa * (field.values[-1][0] - ROB.alpha)))
        assert errs[0] < 1e-8  # exact stationary state: residual at rounding level
