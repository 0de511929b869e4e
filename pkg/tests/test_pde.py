import math

import numpy as np
import pytest

from trsqp_pinn.autodiff import Jet2
from trsqp_pinn.errors import ConfigurationError
from trsqp_pinn.pde import (
    PDEProblem,
    ReferenceGrid,
    analytic_solution,
    logistic_flow,
    pde_residual,
    read_grid_csv,
    reference_solve,
    write_grid_csv,
)


def reaction_time_derivative(problem, x, t):
    """d/dt of the closed-form logistic solution, differentiated by hand."""
    u0 = problem.initial_condition(x)
    e = np.exp(problem.alpha * t)
    return problem.alpha * u0 * e * (1 - u0) / (u0 * e + 1 - u0) ** 2


class TestProblem:
    def test_reaction_diffusion_needs_positive_tau(self):
        with pytest.raises(ConfigurationError):
            PDEProblem.reaction_diffusion(20, 0.0)

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            PDEProblem("burgers")

    def test_coefficients_only_list_relevant_fields(self):
        assert PDEProblem.transport(30).coefficients == {"beta": 30.0}
        assert set(PDEProblem.reaction(30).coefficients) == {"alpha", "zeta"}
        assert set(PDEProblem.reaction_diffusion(20, 2).coefficients) == {"alpha", "tau", "zeta"}


class TestResidual:
    def test_transport_identity(self):
        jet = Jet2(u=0.5, du_dx=0.37, du_dt=-30 * 0.37, d2u_dx2=9.0)
        assert pde_residual(PDEProblem.transport(30), jet) == 0.0

    def test_reaction_equilibrium_at_zero(self):
        jet = Jet2(u=0.0, du_dx=1.0, du_dt=0.0, d2u_dx2=1.0)
        assert pde_residual(PDEProblem.reaction(30), jet) == 0.0

    def test_reaction_diffusion_equilibrium_at_one(self):
        jet = Jet2(u=1.0, du_dx=0.0, du_dt=0.0, d2u_dx2=0.0)
        assert pde_residual(PDEProblem.reaction_diffusion(20, 2), jet) == 0.0

    def test_diffusion_term_sign(self):
        jet = Jet2(u=0.0, du_dx=0.0, du_dt=0.0, d2u_dx2=1.0)
        assert pde_residual(PDEProblem.reaction_diffusion(20, 2), jet) == -2.0

    def test_transport_solution_satisfies_operator(self):
        rng = np.random.default_rng(0)
        x, t = rng.uniform(0, 2 * np.pi, 50), rng.uniform(0, 1, 50)
        beta = 30.0
        jet = Jet2(np.sin(x - beta * t), np.cos(x - beta * t), -beta * np.cos(x - beta * t), None)
        assert np.max(np.abs(pde_residual(PDEProblem.transport(beta), jet))) <= 1e-10

    def test_reaction_solution_satisfies_operator(self):
        problem = PDEProblem.reaction(30)
        rng = np.random.default_rng(1)
        x, t = rng.uniform(0, 2 * np.pi, 50), rng.uniform(0, 1, 50)
        u = analytic_solution(problem, x, t)
        jet = Jet2(u, None, reaction_time_derivative(problem, x, t), None)
        assert np.max(np.abs(pde_residual(problem, jet))) <= 1e-10


class TestAnalytic:
    def test_transport_peak(self):
        assert analytic_solution(PDEProblem.transport(7), np.pi / 2, 0.0) == 1.0

    @pytest.mark.parametrize("t", [0.0, 0.3, 1.0])
    def test_reaction_fixed_point_at_pi(self, t):
        assert analytic_solution(PDEProblem.reaction(30, 2), np.pi, t) == pytest.approx(1.0, abs=1e-15)

    def test_reaction_corner_value(self):
        value = analytic_solution(PDEProblem.reaction(30, 2), 0.0, 0.0)
        assert value == pytest.approx(math.exp(-2 * math.pi**2), rel=1e-12)
        assert value == pytest.approx(2.68e-9, rel=1e-2)

    def test_periodic_in_x(self):
        for problem in (PDEProblem.transport(30), PDEProblem.reaction(5)):
            t = np.linspace(0, 1, 7)
            left = analytic_solution(problem, 0.0, t)
            right = analytic_solution(problem, 2 * np.pi, t)
            assert np.allclose(left, right, atol=1e-12)

    def test_reaction_diffusion_has_no_closed_form(self):
        with pytest.raises(ConfigurationError):
            analytic_solution(PDEProblem.reaction_diffusion(20, 2), 0.0, 0.0)

    def test_logistic_flow_composes(self):
        u0 = np.linspace(0.01, 0.99, 9)
        assert np.allclose(logistic_flow(logistic_flow(u0, 0.7), 0.5), logistic_flow(u0, 1.2))


class TestReferenceSolver:
    def test_without_diffusion_matches_reaction_solution(self):
        problem = PDEProblem.reaction(30)
        grid = reference_solve(problem, n_x=256, n_steps=10_000, n_t=100)
        X, T = np.meshgrid(grid.x, grid.t, indexing="ij")
        assert np.max(np.abs(grid.values - analytic_solution(problem, X, T))) <= 1e-6

    def test_single_mode_heat_decay(self):
        problem = PDEProblem.reaction_diffusion(0.0, 2.0)
        grid = reference_solve(problem, n_x=64, n_steps=200, n_t=11, initial=np.sin)
        exact = np.exp(-2.0 * grid.t)[None, :] * np.sin(grid.x)[:, None]
        assert np.max(np.abs(grid.values - exact)) <= 1e-6

    def test_second_order_self_convergence(self):
        problem = PDEProblem.reaction_diffusion(20, 2)
        u = [reference_solve(problem, 256, n, n_t=11).values for n in (200, 400, 800)]
        ratio = np.max(np.abs(u[0] - u[1])) / np.max(np.abs(u[1] - u[2]))
        assert 3.0 <= ratio <= 5.0

    @pytest.mark.parametrize("level", [0.0, 1.0])
    def test_equilibria_stay_fixed(self, level):
        problem = PDEProblem.reaction_diffusion(20, 2)
        grid = reference_solve(problem, 32, 100, n_t=5, initial=lambda x: np.full_like(x, level))
        assert np.allclose(grid.values, level, atol=1e-14)

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ConfigurationError):
            reference_solve(PDEProblem.reaction_diffusion(20, 2), n_x=2560)

    def test_rejects_transport(self):
        with pytest.raises(ConfigurationError):
            reference_solve(PDEProblem.transport(1.0), n_x=64)

    def test_grid_axes(self):
        grid = reference_solve(PDEProblem.reaction_diffusion(1, 1), 16, 10, n_t=6)
        assert grid.values.shape == (16, 6)
        assert grid.x[-1] < 2 * np.pi and grid.x[1] == pytest.approx(2 * np.pi / 16)
        assert grid.t[0] == 0.0 and grid.t[-1] == 1.0


class TestGridCsv:
    def test_round_trip(self, tmp_path):
        values = np.random.default_rng(0).standard_normal((5, 3)) / 3
        coefficients = {"kind": "reaction_diffusion", "alpha": 20.0, "tau": 2.0}
        write_grid_csv(tmp_path / "g.csv", values, coefficients)
        back, meta = read_grid_csv(tmp_path / "g.csv")
        assert np.array_equal(back, values)
        assert meta == coefficients

    def test_reference_grid_round_trip(self, tmp_path):
        grid = reference_solve(PDEProblem.reaction_diffusion(5, 1), 16, 20, n_t=4)
        grid.to_csv(tmp_path / "ref.csv")
        back = ReferenceGrid.from_csv(tmp_path / "ref.csv")
        assert np.array_equal(back.values, grid.values)
        assert back.coefficients == grid.coefficients
