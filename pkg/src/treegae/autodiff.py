"""Reverse-mode automatic differentiation over dense float64 matrices.

The graph is a dynamic tape: each operation returns a new :class:`Tensor`
that records its inputs and a rule for pushing gradients back to them.
Calling :func:`backward` on a 1x1 result walks the recorded graph once in
reverse topological order and accumulates d(result)/d(node) into the
``grad`` field of every node on a gradient-requiring path.

Values are plain 2-D numpy arrays and are treated as immutable once a
Tensor owns them; distinct graphs share no mutable state, so separate
graphs may be evaluated concurrently while a single graph is single
threaded.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError

__all__ = [
    "Tensor",
    "parameter",
    "constant",
    "scalar",
    "matmul",
    "add",
    "scale",
    "elementwise_mul",
    "elementwise_div",
    "elementwise_exp",
    "elementwise_square",
    "sum_all",
    "relu",
    "pairwise_sq_dist",
    "backward",
    "graph_nodes",
    "zero_grad",
]


def _as_matrix(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got array of shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"matrix dimensions must be positive, got {arr.shape}")
    return arr


class Tensor:
    """A matrix-valued node in a computation graph.

    ``grad`` is a lazily created accumulator of the same shape as ``value``.
    It is ``None`` until a backward pass deposits into it; within one pass
    contributions from multiple consumers are summed. Gradients on shared
    leaves (parameters) also accumulate across backward passes of distinct
    graphs, which is what batched gradient accumulation relies on.
    """

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, value, requires_grad: bool = False, _parents=(), _vjp=None):
        self.value = _as_matrix(value)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._vjp = _vjp

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def item(self) -> float:
        if self.value.shape != (1, 1):
            raise ContractError(f"item() requires a 1x1 tensor, got shape {self.value.shape}")
        return float(self.value[0, 0])

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"


def parameter(value) -> Tensor:
    """A leaf tensor that collects gradients."""
    return Tensor(value, requires_grad=True)


def constant(value) -> Tensor:
    """A leaf tensor excluded from gradient computation."""
    return Tensor(value)


def scalar(x: float) -> Tensor:
    """A 1x1 constant."""
    return Tensor(np.array([[float(x)]]))


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.value)
    t.grad += g


def _result(value: np.ndarray, parents: tuple[Tensor, ...], vjp) -> Tensor:
    # Constant-fold: a node none of whose inputs require gradients is a leaf.
    if any(p.requires_grad for p in parents):
        return Tensor(value, requires_grad=True, _parents=parents, _vjp=vjp)
    return Tensor(value)


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes differ, {a.shape} vs {b.shape}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product a @ b."""
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul: cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    value = a.value @ b.value

    def vjp(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, g @ b.value.T)
        if b.requires_grad:
            _accumulate(b, a.value.T @ g)

    return _result(value, (a, b), vjp)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum of two equal-shape matrices."""
    _check_same_shape("add", a, b)
    value = a.value + b.value

    def vjp(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, g)
        if b.requires_grad:
            _accumulate(b, g)

    return _result(value, (a, b), vjp)


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply every entry by the constant c."""
    c = float(c)
    value = a.value * c

    def vjp(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, g * c)

    return _result(value, (a,), vjp)


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    """Hadamard product."""
    _check_same_shape("elementwise_mul", a, b)
    value = a.value * b.value

    def vjp(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, g * b.value)
        if b.requires_grad:
            _accumulate(b, g * a.value)

    return _result(value, (a, b), vjp)


def elementwise_div(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise quotient a / b."""
    _check_same_shape("elementwise_div", a, b)
    value = a.value / b.value

    def vjp(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, g / b.value)
        if b.requires_grad:
            _accumulate(b, -g * a.value / (b.value * b.value))

    return _result(value, (a, b), vjp)


def elementwise_exp(a: Tensor) -> Tensor:
    """Elementwise exponential."""
    value = np.exp(a.value)

    def vjp(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, g * value)

    return _result(value, (a,), vjp)


def elementwise_square(a: Tensor) -> Tensor:
    """Elementwise square."""
    value = a.value * a.value

    def vjp(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, 2.0 * a.value * g)

    return _result(value, (a,), vjp)


def sum_all(a: Tensor) -> Tensor:
    """Sum of all entries as a 1x1 tensor."""
    value = np.array([[a.value.sum()]])

    def vjp(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, np.full_like(a.value, g[0, 0]))

    return _result(value, (a,), vjp)


def relu(a: Tensor) -> Tensor:
    """Elementwise max(x, 0); the gradient at exactly 0 is defined as 0."""
    mask = a.value > 0.0
    value = np.where(mask, a.value, 0.0)

    def vjp(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, g * mask)

    return _result(value, (a,), vjp)


def pairwise_sq_dist(z: Tensor) -> Tensor:
    """All-pairs squared Euclidean distances between the rows of z.

    For z of shape N x E the result S is N x N with
    S[i, j] = sum_e (z[i, e] - z[j, e])^2. The broadcasted difference
    formula is order independent, so S is bit-exactly symmetric with an
    exactly zero diagonal.
    """
    zv = z.value
    diff = zv[:, None, :] - zv[None, :, :]
    value = np.einsum("ijk,ijk->ij", diff, diff)

    def vjp(g: np.ndarray) -> None:
        if z.requires_grad:
            w = g + g.T
            _accumulate(z, 2.0 * (w.sum(axis=1, keepdims=True) * zv - w @ zv))

    return _result(value, (z,), vjp)


def graph_nodes(root: Tensor) -> list[Tensor]:
    """All nodes reachable from root, parents before consumers.

    The order is a deterministic function of graph topology (depth-first
    over the recorded input order), which makes backward deterministic.
    """
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    return order


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(node) into grad for every node reachable from root.

    The root must be 1x1. Interior nodes of the graph must hold no gradient
    from a previous pass; running backward twice on the same graph without
    zeroing raises :class:`ContractError`. Leaf gradients are accumulated
    additively, so several graphs sharing the same parameter leaves may each
    run backward once to build up a summed gradient.
    """
    if root.shape != (1, 1):
        raise ContractError(f"backward requires a 1x1 scalar root, got shape {root.shape}")
    order = graph_nodes(root)
    for node in order:
        if node._parents and node.grad is not None:
            raise ContractError(
                "backward was already run on this graph; zero its gradients before another pass"
            )
    root.grad = np.ones((1, 1))
    for node in reversed(order):
        if node._vjp is not None and node.grad is not None:
            node._vjp(node.grad)


def zero_grad(tensors) -> None:
    """Reset the gradient accumulator of each tensor to the empty state."""
    for t in tensors:
        t.grad = None
