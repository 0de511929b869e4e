import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trsqp_pinn.errors import ConfigurationError, ParameterShapeError
from trsqp_pinn.network import (
    MLPArchitecture,
    flatten,
    forward,
    init_params,
    load_params,
    save_params,
    unflatten,
)


class TestArchitecture:
    def test_default_parameter_count(self):
        # 150+50 + 3*(2500+50) + 50+1
        assert MLPArchitecture(4, 50).n_params == 7851
        assert init_params(MLPArchitecture(4, 50), seed=3).size == 7851

    def test_smallest_network(self):
        assert MLPArchitecture(1, 1).n_params == 5

    @given(st.integers(1, 6), st.integers(1, 40))
    def test_count_matches_layer_shapes(self, depth, width):
        arch = MLPArchitecture(depth, width)
        total = sum(w[0] * w[1] + b[0] for w, b in arch.shapes)
        assert total == arch.n_params

    @pytest.mark.parametrize("depth,width", [(0, 5), (2, 0), (-1, 3)])
    def test_rejects_empty_layers(self, depth, width):
        with pytest.raises(ConfigurationError):
            MLPArchitecture(depth, width)


class TestLayout:
    @settings(max_examples=25)
    @given(st.integers(1, 4), st.integers(1, 12), st.integers(0, 2**31 - 1))
    def test_flatten_inverts_unflatten(self, depth, width, seed):
        arch = MLPArchitecture(depth, width)
        theta = np.random.default_rng(seed).standard_normal(arch.n_params)
        assert np.array_equal(flatten(unflatten(arch, theta)), theta)

    def test_layer_major_weights_then_biases(self):
        arch = MLPArchitecture(1, 2)
        theta = np.arange(arch.n_params, dtype=float)
        (W0, b0), (W1, b1) = unflatten(arch, theta)
        assert W0.tolist() == [[0, 1], [2, 3]]
        assert b0.tolist() == [4, 5]
        assert W1.tolist() == [[6, 7]]
        assert b1.tolist() == [8]

    @pytest.mark.parametrize("bad", [np.zeros(7850), np.zeros((7851, 1)), np.zeros(7852)])
    def test_shape_mismatch(self, bad):
        with pytest.raises(ParameterShapeError):
            unflatten(MLPArchitecture(4, 50), bad)


class TestInit:
    def test_deterministic_per_seed(self):
        arch = MLPArchitecture(2, 20)
        assert np.array_equal(init_params(arch, 7), init_params(arch, 7))
        assert not np.array_equal(init_params(arch, 7), init_params(arch, 8))

    def test_glorot_bounds_and_zero_biases(self):
        arch = MLPArchitecture(3, 30)
        for W, b in unflatten(arch, init_params(arch, 0)):
            bound = np.sqrt(6.0 / (W.shape[0] + W.shape[1]))
            assert np.all(np.abs(W) <= bound)
            assert np.all(b == 0)


class TestForward:
    def test_zero_network_is_zero(self):
        arch = MLPArchitecture(3, 7)
        x, t = np.meshgrid(np.linspace(0, 2 * np.pi, 9), np.linspace(0, 1, 5))
        assert np.all(forward(arch, np.zeros(arch.n_params), x, t) == 0)

    def test_matches_manual_composition(self):
        arch = MLPArchitecture(2, 4)
        theta = np.random.default_rng(1).standard_normal(arch.n_params)
        (W0, b0), (W1, b1), (W2, b2) = unflatten(arch, theta)
        x, t = 0.3, 0.7
        h = np.tanh(W1 @ np.tanh(W0 @ [x, t] + b0) + b1)
        assert forward(arch, theta, [x], [t])[0] == pytest.approx((W2 @ h + b2)[0], rel=1e-14)

    def test_chunking_is_invisible(self):
        arch = MLPArchitecture(2, 5)
        theta = init_params(arch, 2)
        rng = np.random.default_rng(0)
        x, t = rng.uniform(0, 6, 1000), rng.uniform(0, 1, 1000)
        assert np.array_equal(forward(arch, theta, x, t), forward(arch, theta, x, t, chunk=7))


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path):
        arch = MLPArchitecture(2, 6)
        theta = np.random.default_rng(5).standard_normal(arch.n_params) * 1e3
        save_params(tmp_path / "p.params", arch, theta)
        arch2, theta2 = load_params(tmp_path / "p.params")
        assert arch2 == arch
        assert np.array_equal(theta2, theta)

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_text('{"format": "something-else"}\n1.0\n')
        with pytest.raises(ConfigurationError):
            load_params(path)

    def test_save_checks_length(self, tmp_path):
        with pytest.raises(ParameterShapeError):
            save_params(tmp_path / "p", MLPArchitecture(1, 1), np.zeros(4))
