"""Fully-connected tanh MLP ``u(x, t)`` and its flat parameter layout.

Parameters are stored as one flat float64 vector, layer-major, with each
layer's weight matrix (row-major, shape ``(fan_out, fan_in)``) followed by
its bias vector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ParameterShapeError

CHECKPOINT_FORMAT = "trsqp-pinn-params"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MLPArchitecture:
    """``depth`` hidden tanh layers of ``width`` neurons, 2 inputs, 1 output."""

    depth: int = 4
    width: int = 50
    input_dim: int = 2
    output_dim: int = 1

    def __post_init__(self):
        if self.depth < 1 or self.width < 1:
            raise ConfigurationError(
                f"depth and width must be positive, got depth={self.depth}, width={self.width}"
            )

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [self.width] * self.depth + [self.output_dim]

    @property
    def shapes(self) -> list[tuple[tuple[int, int], tuple[int]]]:
        """``[(W.shape, b.shape), ...]`` for every affine layer."""
        sizes = self.layer_sizes
        return [((n_out, n_in), (n_out,)) for n_in, n_out in zip(sizes[:-1], sizes[1:])]

    @property
    def n_params(self) -> int:
        w, d = self.width, self.depth
        return (
            (self.input_dim * w + w)
            + (d - 1) * (w * w + w)
            + (w * self.output_dim + self.output_dim)
        )


def unflatten(arch: MLPArchitecture, theta) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat parameter vector into ``[(W, b), ...]`` views."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size != arch.n_params:
        raise ParameterShapeError(
            f"expected a flat vector of {arch.n_params} parameters for {arch}, "
            f"got shape {theta.shape}"
        )
    layers = []
    offset = 0
    for w_shape, b_shape in arch.shapes:
        n_w = w_shape[0] * w_shape[1]
        W = theta[offset : offset + n_w].reshape(w_shape)
        offset += n_w
        b = theta[offset : offset + b_shape[0]]
        offset += b_shape[0]
        layers.append((W, b))
    return layers


def flatten(layers) -> np.ndarray:
    return np.concatenate([np.concatenate([W.ravel(), b.ravel()]) for W, b in layers])


def init_params(arch: MLPArchitecture, seed: int) -> np.ndarray:
    """Glorot-uniform weights, zero biases; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    layers = []
    for (n_out, n_in), b_shape in arch.shapes:
        bound = np.sqrt(6.0 / (n_in + n_out))
        layers.append((rng.uniform(-bound, bound, size=(n_out, n_in)), np.zeros(b_shape)))
    return flatten(layers)


def forward(arch: MLPArchitecture, theta, x, t, chunk: int = 65536) -> np.ndarray:
    """Plain network output at arrays of points (no derivatives)."""
    layers = unflatten(arch, theta)
    x = np.asarray(x, dtype=float).ravel()
    t = np.asarray(t, dtype=float).ravel()
    out = np.empty(x.size)
    for start in range(0, x.size, chunk):
        h = np.stack([x[start : start + chunk], t[start : start + chunk]], axis=1)
        for W, b in layers[:-1]:
            h = np.tanh(h @ W.T + b)
        W, b = layers[-1]
        out[start : start + chunk] = (h @ W.T + b)[:, 0]
    return out


def save_params(path, arch: MLPArchitecture, theta) -> None:
    """Write a checkpoint: a JSON header line then one float per line."""
    theta = np.asarray(theta, dtype=float)
    unflatten(arch, theta)  # shape check
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "depth": arch.depth,
        "width": arch.width,
        "input_dim": arch.input_dim,
        "output_dim": arch.output_dim,
        "n_params": arch.n_params,
    }
    lines = [json.dumps(header)] + [repr(float(v)) for v in theta]
    Path(path).write_text("\n".join(lines) + "\n")


def load_params(path) -> tuple[MLPArchitecture, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    header = json.loads(lines[0])
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ConfigurationError(f"{path} is not a parameter checkpoint")
    if header.get("version") != CHECKPOINT_VERSION:
        raise ConfigurationError(f"unsupported checkpoint version {header.get('version')}")
    arch = MLPArchitecture(
        depth=header["depth"],
        width=header["width"],
        input_dim=header["input_dim"],
        output_dim=header["output_dim"],
    )
    theta = np.array([float(v) for v in lines[1:] if v.strip()])
    if theta.size != header["n_params"]:
        raise ParameterShapeError(
            f"checkpoint declares {header['n_params']} parameters, found {theta.size}"
        )
    return arch, theta
