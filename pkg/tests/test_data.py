import numpy as np
import pytest

from trsqp_pinn.data import (
    LabeledSet,
    even_split,
    evaluation_grid,
    sample_collocation,
    sample_labeled,
)
from trsqp_pinn.errors import ConfigurationError
from trsqp_pinn.pde import PDEProblem, analytic_solution, reference_solve


class TestLabeled:
    def test_noiseless_transport_is_exact(self):
        problem = PDEProblem.transport(30)
        data = sample_labeled(problem, 200, noise_std=0.0, seed=4)
        assert np.array_equal(data.u, analytic_solution(problem, data.x, data.t))

    def test_points_inside_domain(self):
        data = sample_labeled(PDEProblem.reaction(30), 500, seed=0)
        assert np.all((0 <= data.x) & (data.x <= 2 * np.pi))
        assert np.all((0 <= data.t) & (data.t <= 1))

    def test_deterministic(self):
        problem = PDEProblem.transport(1)
        a, b = sample_labeled(problem, 50, 0.01, seed=9), sample_labeled(problem, 50, 0.01, seed=9)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.u, b.u)

    def test_noise_level(self):
        problem = PDEProblem.transport(1)
        data = sample_labeled(problem, 10_000, noise_std=0.01, seed=3)
        resid = data.u - analytic_solution(problem, data.x, data.t)
        assert 0.009 <= resid.std() <= 0.011

    @pytest.mark.parametrize("n", [0, -3])
    def test_rejects_empty(self, n):
        with pytest.raises(ConfigurationError):
            sample_labeled(PDEProblem.transport(1), n)

    def test_reaction_diffusion_draws_grid_nodes(self):
        problem = PDEProblem.reaction_diffusion(5, 1)
        ref = reference_solve(problem, 16, 50, n_t=10)
        data = sample_labeled(problem, 100, noise_std=0.0, seed=1, reference=ref)
        ix = np.rint(data.x / (2 * np.pi / 16)).astype(int)
        it = np.rint(data.t * 9).astype(int)
        assert np.array_equal(data.u, ref.values[ix, it])
        assert len({(i, j) for i, j in zip(ix, it)}) == 100  # no repeats

    def test_reaction_diffusion_needs_reference(self):
        with pytest.raises(ConfigurationError):
            sample_labeled(PDEProblem.reaction_diffusion(5, 1), 10)

    def test_csv_round_trip(self, tmp_path):
        data = sample_labeled(PDEProblem.transport(3), 20, seed=2)
        data.to_csv(tmp_path / "d.csv")
        back = LabeledSet.from_csv(tmp_path / "d.csv")
        assert np.array_equal(back.x, data.x) and np.array_equal(back.u, data.u)


class TestCollocation:
    @pytest.mark.parametrize(
        "m,expected", [(150, (50, 50, 50)), (12, (4, 4, 4)), (7, (3, 2, 2)), (8, (3, 3, 2))]
    )
    def test_even_split(self, m, expected):
        assert even_split(m) == expected
        assert sample_collocation(m, seed=0).sizes == expected

    def test_explicit_split(self):
        colloc = sample_collocation(10, split=(6, 0, 4), seed=1)
        assert colloc.sizes == (6, 0, 4) and colloc.M == 10

    def test_split_must_sum(self):
        with pytest.raises(ConfigurationError):
            sample_collocation(10, split=(3, 3, 3))

    def test_even_split_needs_three(self):
        with pytest.raises(ConfigurationError):
            sample_collocation(2)

    def test_seed_changes_points(self):
        a, b = sample_collocation(12, seed=0), sample_collocation(12, seed=1)
        assert not np.array_equal(a.pde_points, b.pde_points)
        assert np.array_equal(a.pde_points, sample_collocation(12, seed=0).pde_points)

    def test_ranges(self):
        colloc = sample_collocation(300, seed=5)
        assert np.all((0 <= colloc.pde_points[:, 0]) & (colloc.pde_points[:, 0] <= 2 * np.pi))
        assert np.all((0 <= colloc.bc_times) & (colloc.bc_times <= 1))
        assert np.all((0 <= colloc.ic_xs) & (colloc.ic_xs <= 2 * np.pi))


class TestEvaluationGrid:
    def test_two_by_two(self):
        X, T = evaluation_grid(2, 2)
        points = sorted(zip(X.ravel(), T.ravel()))
        assert points == [(0.0, 0.0), (0.0, 1.0), (np.pi, 0.0), (np.pi, 1.0)]

    def test_full_size(self):
        X, T = evaluation_grid(2560, 1000)
        assert X.size == 2_560_000

    def test_spacing(self):
        X, T = evaluation_grid(256, 100)
        assert np.allclose(np.diff(X[:, 0]), 2 * np.pi / 256)
        assert T[0, 0] == 0.0 and T[0, -1] == 1.0
        assert X[-1, 0] < 2 * np.pi

    def test_too_small(self):
        with pytest.raises(ConfigurationError):
            evaluation_grid(1, 10)
