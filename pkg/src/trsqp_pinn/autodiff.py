"""Input jets of the network and exact parameter gradients via a reverse tape.

Input derivatives ``u, u_x, u_t, u_xx`` are propagated forward through the
layers as ordinary arithmetic on tape nodes. Every node value carries a
leading batch axis (one entry per evaluation point), so one tape covers a
whole set of points. The reverse sweep accepts a stack of ``S`` seed
cotangents at once: seeding with the identity on a residual vector yields
all Jacobian rows, one independent reverse pass per row, in a single sweep.

When output row ``i`` depends only on batch entry ``i`` (true for every
collocation residual group), :meth:`Tape.backward_rows` runs the same
per-row passes but stores only the diagonal of the seed stack, which keeps
the cost linear in the number of rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import NumericOverflowError
from .network import MLPArchitecture, unflatten
from .pde import X_MAX, PDEProblem, pde_residual


@dataclass(frozen=True)
class Jet2:
    """Network output and its input derivatives up to ``d2/dx2``."""

    u: Any
    du_dx: Any
    du_dt: Any
    d2u_dx2: Any


class Node:
    __slots__ = ("tape", "index", "value", "name")

    def __init__(self, tape, index, value, name):
        self.tape = tape
        self.index = index
        self.value = value
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return f"Node({self.name}, shape={self.value.shape})"


class Tape:
    """Records node values and their vector-Jacobian products."""

    def __init__(self):
        self._values = []
        self._parents = []
        self._names = []
        self.params: list[Node] = []

    def __len__(self):
        return len(self._values)

    def push(self, value, parents, name) -> Node:
        """Append a node; ``parents`` is a sequence of ``(node, vjp)`` pairs."""
        value = np.asarray(value, dtype=float)
        index = len(self._values)
        label = f"{name}#{index}"
        if not np.all(np.isfinite(value)):
            raise NumericOverflowError(f"non-finite value at node {label}")
        self._values.append(value)
        self._parents.append(tuple((p.index, vjp) for p, vjp in parents))
        self._names.append(label)
        return Node(self, index, value, label)

    def param(self, value, name="param") -> Node:
        node = self.push(value, (), name)
        self.params.append(node)
        return node

    def network_params(self, arch: MLPArchitecture, theta) -> list[tuple[Node, Node]]:
        return [
            (self.param(W, f"W{i}"), self.param(b, f"b{i}"))
            for i, (W, b) in enumerate(unflatten(arch, theta))
        ]

    def backward(self, output: Node, seed, diagonal: bool = False) -> np.ndarray:
        """Reverse sweep; returns ``(S, p)`` stacked flat parameter gradients.

        ``seed`` has shape ``(S,) + output.shape``; row ``s`` of the result is
        the gradient of ``<seed[s], output>`` with respect to all parameters.

        With ``diagonal=True`` the seed has ``output.shape`` and entry ``b``
        stands for the seed ``e_b``; cotangents then keep only the entries
        belonging to their own seed. Only batch-aligned ops support this.
        """
        seed = np.asarray(seed, dtype=float)
        n_seeds = seed.shape[0]
        cot = [None] * (output.index + 1)
        cot[output.index] = seed
        for i in range(output.index, -1, -1):
            g = cot[i]
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NumericOverflowError(f"non-finite cotangent at node {self._names[i]}")
            for parent, vjp in self._parents[i]:
                contrib = vjp(g, diagonal)
                cot[parent] = contrib if cot[parent] is None else cot[parent] + contrib
        grads = []
        for node in self.params:
            g = cot[node.index] if node.index < len(cot) else None
            if g is None:
                g = np.zeros((n_seeds,) + node.shape)
            grads.append(g.reshape(n_seeds, -1))
        return np.concatenate(grads, axis=1)

    def backward_rows(self, output: Node) -> np.ndarray:
        """Jacobian ``(B, p)`` of a batch-aligned ``(B,)`` output node."""
        return self.backward(output, np.ones(output.shape[0]), diagonal=True)


def _tape_of(*items):
    for item in items:
        if isinstance(item, Node):
            return item.tape
    raise TypeError("at least one operand must be a tape node")


def _value(item):
    return item.value if isinstance(item, Node) else item


def _sum_to(g, shape, diagonal=False):
    """Reduce a broadcast cotangent ``(S,) + broadcast_shape`` to ``(S,) + shape``."""
    if diagonal:
        if g.shape != tuple(shape):
            raise ValueError("broadcasting is not batch-aligned")
        return g
    target = (g.shape[0],) + tuple(shape)
    if g.shape == target:
        return g
    extra = g.ndim - len(target)
    if extra:
        g = g.sum(axis=tuple(range(1, 1 + extra)))
    axes = tuple(i for i, n in enumerate(target) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------- primitives


def add(a, b) -> Node:
    tape = _tape_of(a, b)
    va, vb = _value(a), _value(b)
    parents = []
    if isinstance(a, Node):
        parents.append((a, lambda g, dg, s=va.shape: _sum_to(g, s, dg)))
    if isinstance(b, Node):
        parents.append((b, lambda g, dg, s=vb.shape: _sum_to(g, s, dg)))
    return tape.push(va + vb, parents, "add")


def sub(a, b) -> Node:
    tape = _tape_of(a, b)
    va, vb = _value(a), _value(b)
    parents = []
    if isinstance(a, Node):
        parents.append((a, lambda g, dg, s=va.shape: _sum_to(g, s, dg)))
    if isinstance(b, Node):
        parents.append((b, lambda g, dg, s=np.shape(vb): -_sum_to(g, s, dg)))
    return tape.push(va - vb, parents, "sub")


def neg(a: Node) -> Node:
    return a.tape.push(-a.value, [(a, lambda g, dg: -g)], "neg")


def mul(a, b) -> Node:
    tape = _tape_of(a, b)
    va, vb = _value(a), _value(b)
    parents = []
    if isinstance(a, Node):
        parents.append((a, lambda g, dg, s=va.shape: _sum_to(g * vb, s, dg)))
    if isinstance(b, Node):
        parents.append((b, lambda g, dg, s=np.shape(vb): _sum_to(g * va, s, dg)))
    return tape.push(va * vb, parents, "mul")


def tanh(a: Node) -> Node:
    s = np.tanh(a.value)
    return a.tape.push(s, [(a, lambda g, dg: g * (1.0 - s * s))], "tanh")


def linear(h, W: Node, b: Node | None = None) -> Node:
    """Batched affine map ``h @ W.T (+ b)`` for ``h`` of shape ``(B, n_in)``."""
    hv = _value(h)
    def vjp_w(g, diagonal):
        if diagonal:
            return g[:, :, None] * hv[:, None, :]
        return np.einsum("sbo,bi->soi", g, hv)

    parents = [(W, vjp_w)]
    if isinstance(h, Node):
        parents.append((h, lambda g, dg: g @ W.value))
    value = hv @ W.value.T
    if b is not None:
        parents.append((b, lambda g, dg: g if dg else g.sum(axis=1)))
        value = value + b.value
    return W.tape.push(value, parents, "linear")


def column(a: Node, j: int) -> Node:
    """Column ``j`` of a ``(B, n)`` node as a ``(B,)`` node."""
    shape = a.shape

    def vjp(g, diagonal):
        out = np.zeros(g.shape + shape[1:])
        out[..., j] = g
        return out

    return a.tape.push(a.value[:, j], [(a, vjp)], "column")


def concat(nodes) -> Node:
    """Concatenate ``(B_i,)`` nodes along the batch axis."""
    nodes = list(nodes)
    sizes = [n.shape[0] for n in nodes]
    bounds = np.cumsum([0] + sizes)
    def piece(lo, hi):
        def vjp(g, diagonal):
            if diagonal:
                raise ValueError("concat is not batch-aligned")
            return g[:, lo:hi]

        return vjp

    parents = [(n, piece(lo, hi)) for n, lo, hi in zip(nodes, bounds[:-1], bounds[1:])]
    return nodes[0].tape.push(np.concatenate([n.value for n in nodes]), parents, "concat")


def total(a: Node) -> Node:
    """Sum of all entries, as a scalar node."""
    shape = a.shape

    def vjp(g, diagonal):
        if diagonal:
            raise ValueError("reductions are not batch-aligned")
        return np.broadcast_to(g.reshape((-1,) + (1,) * len(shape)), (g.shape[0],) + shape)

    return a.tape.push(a.value.sum(), [(a, vjp)], "sum")


def mean(a: Node) -> Node:
    return mul(total(a), 1.0 / a.value.size)


# ---------------------------------------------------------------- gradients


def grad_scalar(output: Node) -> np.ndarray:
    """Gradient of a scalar node with respect to every tape parameter."""
    if output.value.ndim != 0:
        raise ValueError(f"grad_scalar needs a scalar node, got shape {output.shape}")
    return output.tape.backward(output, np.ones(1))[0]


def vjp(output: Node, cotangent) -> np.ndarray:
    """``J^T v`` for a vector node ``output`` with Jacobian ``J``."""
    cotangent = np.asarray(cotangent, dtype=float)
    return output.tape.backward(output, cotangent[None])[0]


def jacobian(output: Node) -> np.ndarray:
    """Rows ``d output_i / d theta`` for a ``(M,)`` node, shape ``(M, p)``."""
    m = output.shape[0]
    return output.tape.backward(output, np.eye(m))


# ---------------------------------------------------------------- network jets


def network_jet(tape: Tape, params, x, t, derivatives: bool = True) -> Jet2:
    """Propagate ``(u, u_x, u_t, u_xx)`` through the MLP at points ``(x, t)``.

    ``params`` are the ``(W, b)`` node pairs from :meth:`Tape.network_params`.
    With ``derivatives=False`` only the value is computed; the derivative
    fields of the result are ``None``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    batch = x.size
    h = np.stack([x, t], axis=1)
    if derivatives:
        hx = np.tile([1.0, 0.0], (batch, 1))
        ht = np.tile([0.0, 1.0], (batch, 1))
        hxx = None  # identically zero at the input layer

    for W, b in params[:-1]:
        z = linear(h, W, b)
        s = tanh(z)
        if derivatives:
            zx = linear(hx, W)
            zt = linear(ht, W)
            d1 = 1.0 - s * s
            d2 = -2.0 * (s * d1)
            hxx_next = d2 * (zx * zx)
            if hxx is not None:
                hxx_next = hxx_next + d1 * linear(hxx, W)
            hx, ht, hxx = d1 * zx, d1 * zt, hxx_next
        h = s

    W, b = params[-1]
    u = column(linear(h, W, b), 0)
    if not derivatives:
        return Jet2(u, None, None, None)
    u_x = column(linear(hx, W), 0)
    u_t = column(linear(ht, W), 0)
    if hxx is None:
        u_xx = mul(u_x, 0.0)
    else:
        u_xx = column(linear(hxx, W), 0)
    return Jet2(u, u_x, u_t, u_xx)


def eval_jet(arch: MLPArchitecture, theta, x: float, t: float) -> Jet2:
    """Jet of the network at a single point, as floats."""
    tape = Tape()
    params = tape.network_params(arch, theta)
    jet = network_jet(tape, params, [x], [t])
    return Jet2(*(float(v.value[0]) for v in (jet.u, jet.du_dx, jet.du_dt, jet.d2u_dx2)))


def residual_groups(problem: PDEProblem, arch: MLPArchitecture, theta, points) -> list[Node]:
    """PDE, BC, and IC residual vectors, each recorded on its own tape.

    Row ``i`` of every group depends only on batch entry ``i`` of the
    network evaluations on that tape, so each group is batch-aligned.
    """
    groups = []
    if len(points.pde_points):
        tape = Tape()
        params = tape.network_params(arch, theta)
        jet = network_jet(tape, params, points.pde_points[:, 0], points.pde_points[:, 1])
        groups.append(pde_residual(problem, jet))
    if len(points.bc_times):
        tape = Tape()
        params = tape.network_params(arch, theta)
        ts = points.bc_times
        left = network_jet(tape, params, np.zeros_like(ts), ts, derivatives=False).u
        right = network_jet(tape, params, np.full_like(ts, X_MAX), ts, derivatives=False).u
        groups.append(left - right)
    if len(points.ic_xs):
        tape = Tape()
        params = tape.network_params(arch, theta)
        xs = points.ic_xs
        u0 = network_jet(tape, params, xs, np.zeros_like(xs), derivatives=False).u
        groups.append(u0 - problem.initial_condition(xs))
    return groups


def residual_and_jacobian(
    problem: PDEProblem, arch: MLPArchitecture, theta, points, want_jacobian: bool = True
):
    """Constraint vector ``c`` (PDE, then BC, then IC rows) and its Jacobian ``J``."""
    groups = residual_groups(problem, arch, theta, points)
    if not groups:
        return np.zeros(0), (np.zeros((0, arch.n_params)) if want_jacobian else None)
    c = np.concatenate([g.value for g in groups])
    if not want_jacobian:
        return c, None
    return c, np.concatenate([g.tape.backward_rows(g) for g in groups], axis=0)


def data_loss_node(tape: Tape, params, x, t, u_obs) -> Node:
    """Mean squared error ``(1/N) sum (u_i - u(x_i, t_i))^2`` on ``tape``."""
    u = network_jet(tape, params, x, t, derivatives=False).u
    diff = u - np.asarray(u_obs, dtype=float)
    return mean(diff * diff)
