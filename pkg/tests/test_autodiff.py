import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import central_diff
from trsqp_pinn import autodiff as ad
from trsqp_pinn.data import CollocationSet, sample_collocation
from trsqp_pinn.errors import NumericOverflowError
from trsqp_pinn.network import MLPArchitecture, forward, init_params
from trsqp_pinn.pde import PDEProblem

PROBLEMS = [
    PDEProblem.transport(3.0),
    PDEProblem.reaction(2.0),
    PDEProblem.reaction_diffusion(2.0, 0.5),
]


def fd_jet(arch, theta, x, t, h=1e-3):
    """Input derivatives of the network by fourth-order central differences."""
    u = lambda a, b: forward(arch, theta, [a], [b])[0]
    u0 = u(x, t)
    ux = [u(x + k * h, t) for k in (-2, -1, 1, 2)]
    ut = [u(x, t + k * h) for k in (-2, -1, 1, 2)]
    first = lambda f: (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)
    return (
        u0,
        first(ux),
        first(ut),
        (-ux[0] + 16 * ux[1] - 30 * u0 + 16 * ux[2] - ux[3]) / (12 * h**2),
    )


class TestJet:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 3), st.integers(1, 8), st.integers(0, 10_000))
    def test_matches_finite_differences(self, depth, width, seed):
        arch = MLPArchitecture(depth, width)
        rng = np.random.default_rng(seed)
        theta = rng.standard_normal(arch.n_params) * 0.7
        x, t = rng.uniform(0, 2 * np.pi), rng.uniform(0, 1)
        jet = ad.eval_jet(arch, theta, x, t)
        expected = fd_jet(arch, theta, x, t)
        got = (jet.u, jet.du_dx, jet.du_dt, jet.d2u_dx2)
        assert got[0] == pytest.approx(expected[0], rel=1e-12, abs=1e-14)
        assert got[1:3] == pytest.approx(expected[1:3], rel=1e-6, abs=1e-8)
        assert got[3] == pytest.approx(expected[3], rel=1e-4, abs=1e-5)

    def test_single_neuron_by_hand(self):
        arch = MLPArchitecture(1, 1)
        w1, w2, b0, v, b1 = 0.8, -0.3, 0.1, 1.7, 0.25
        theta = np.array([w1, w2, b0, v, b1])
        x, t = 0.9, 0.4
        s = np.tanh(w1 * x + w2 * t + b0)
        jet = ad.eval_jet(arch, theta, x, t)
        assert jet.u == pytest.approx(v * s + b1, rel=1e-15)
        assert jet.du_dx == pytest.approx(v * (1 - s**2) * w1, rel=1e-14)
        assert jet.du_dt == pytest.approx(v * (1 - s**2) * w2, rel=1e-14)
        assert jet.d2u_dx2 == pytest.approx(-2 * v * s * (1 - s**2) * w1**2, rel=1e-14)

    def test_zero_network_has_zero_jet(self):
        arch = MLPArchitecture(3, 5)
        jet = ad.eval_jet(arch, np.zeros(arch.n_params), 1.2, 0.3)
        assert (jet.u, jet.du_dx, jet.du_dt, jet.d2u_dx2) == (0.0, 0.0, 0.0, 0.0)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_overflow_raises(self):
        arch = MLPArchitecture(1, 2)
        theta = np.full(arch.n_params, 1e308)
        with pytest.raises(NumericOverflowError):
            ad.eval_jet(arch, theta, 6.0, 1.0)


class TestParameterGradients:
    def test_gradient_of_one_parameter(self):
        tape = ad.Tape()
        theta = tape.param(np.array([0.3, -1.2, 2.0]))
        first = ad.total(theta * np.array([1.0, 0.0, 0.0]))
        assert np.array_equal(ad.grad_scalar(first), [1.0, 0.0, 0.0])

    def test_half_squared_norm(self):
        tape = ad.Tape()
        value = np.array([0.3, -1.2, 2.0, 0.0])
        theta = tape.param(value)
        out = 0.5 * ad.total(theta * theta)
        assert np.allclose(ad.grad_scalar(out), value, rtol=0, atol=1e-15)

    def test_vjp_equals_transpose_product(self):
        rng = np.random.default_rng(0)
        h, v = rng.standard_normal((4, 3)), rng.standard_normal(4)
        tape = ad.Tape()
        W = tape.param(rng.standard_normal((2, 3)))
        out = ad.column(ad.tanh(ad.linear(h, W)), 1)
        J = ad.jacobian(out)
        assert np.allclose(ad.vjp(out, v), J.T @ v, rtol=1e-14, atol=1e-15)
        fd = central_diff(lambda w: np.tanh(h @ w.reshape(2, 3).T)[:, 1], W.value.ravel())
        assert np.allclose(J, fd, rtol=1e-7, atol=1e-9)

    @pytest.mark.parametrize("problem", PROBLEMS, ids=lambda p: p.kind)
    def test_constraint_jacobian_matches_fd(self, problem):
        arch = MLPArchitecture(2, 6)
        theta = init_params(arch, 1) + 0.1 * np.random.default_rng(2).standard_normal(arch.n_params)
        colloc = sample_collocation(9, seed=4)
        c, J = ad.residual_and_jacobian(problem, arch, theta, colloc)
        fd = central_diff(lambda th: ad.residual_and_jacobian(problem, arch, th, colloc, False)[0], theta)
        assert J.shape == (9, arch.n_params)
        assert np.allclose(J, fd, rtol=1e-5, atol=1e-7)

    def test_diagonal_sweep_equals_full_jacobian(self):
        arch = MLPArchitecture(2, 5)
        theta = init_params(arch, 3)
        colloc = sample_collocation(12, seed=0)
        interior = CollocationSet(colloc.pde_points, np.zeros(0), np.zeros(0))
        (group,) = ad.residual_groups(PROBLEMS[2], arch, theta, interior)
        assert np.allclose(group.tape.backward_rows(group), ad.jacobian(group), rtol=1e-13, atol=1e-15)

    def test_data_loss_gradient_matches_fd(self):
        arch = MLPArchitecture(2, 4)
        rng = np.random.default_rng(7)
        theta = rng.standard_normal(arch.n_params) * 0.5
        x, t, u = rng.uniform(0, 6, 20), rng.uniform(0, 1, 20), rng.standard_normal(20)

        def loss(th):
            tape = ad.Tape()
            return ad.data_loss_node(tape, tape.network_params(arch, th), x, t, u)

        grad = ad.grad_scalar(loss(theta))
        fd = central_diff(lambda th: float(loss(th).value), theta)
        assert np.allclose(grad, fd, rtol=1e-6, atol=1e-8)

    def test_repeatable(self):
        arch = MLPArchitecture(2, 5)
        theta = init_params(arch, 0)
        colloc = sample_collocation(9, seed=1)
        a = ad.residual_and_jacobian(PROBLEMS[0], arch, theta, colloc)
        b = ad.residual_and_jacobian(PROBLEMS[0], arch, theta, colloc)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


class TestResidualLayout:
    def test_zero_network_initial_condition_residual(self):
        arch = MLPArchitecture(2, 3)
        colloc = CollocationSet(np.zeros((0, 2)), np.zeros(0), np.array([np.pi / 2]))
        c, _ = ad.residual_and_jacobian(PDEProblem.transport(1), arch, np.zeros(arch.n_params), colloc)
        assert c.tolist() == [-1.0]

    def test_row_order_is_pde_bc_ic(self):
        arch = MLPArchitecture(1, 3)
        theta = init_params(arch, 5)
        colloc = sample_collocation(6, split=(1, 2, 3), seed=2)
        c, J = ad.residual_and_jacobian(PDEProblem.transport(2), arch, theta, colloc)
        u = lambda x, t: forward(arch, theta, x, t)
        bc = u(np.zeros(2), colloc.bc_times) - u(np.full(2, 2 * np.pi), colloc.bc_times)
        ic = u(colloc.ic_xs, np.zeros(3)) - np.sin(colloc.ic_xs)
        assert np.allclose(c[1:3], bc, atol=1e-15)
        assert np.allclose(c[3:], ic, atol=1e-15)
        assert J.shape == (6, arch.n_params)

    def test_empty_collocation(self):
        arch = MLPArchitecture(1, 2)
        empty = CollocationSet(np.zeros((0, 2)), np.zeros(0), np.zeros(0))
        c, J = ad.residual_and_jacobian(PDEProblem.transport(1), arch, np.zeros(arch.n_params), empty)
        assert c.shape == (0,) and J.shape == (0, arch.n_params)
