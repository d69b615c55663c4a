"""Minimal reverse-mode automatic differentiation over dense float64 tensors.

The computation graph is implicit: every operation returns a new ``Tensor``
that remembers its parents and a backward rule.  ``backward(loss)`` walks the
graph once in reverse topological order and accumulates gradients with ``+=``
into every tensor that requires them.  Gradients are never zeroed implicitly;
call ``zero_gradients`` between backward passes.

Graph construction and backward are single-threaded per model instance.
Distinct models may live on distinct threads; tensors can be handed between
threads whenever no backward pass is in flight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DimensionError

ArrayLike = "np.ndarray | list | tuple | float | int"


class Tensor:
    """Dense float64 array with an optional gradient accumulator.

    ``grad`` is allocated (as zeros) exactly when ``requires_grad`` is true,
    either because the tensor is a trainable leaf or because it depends on
    one.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False,
                 _parents: tuple = (), _backward=None):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(arr) if self.requires_grad else None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; non-Tensor operands become constants.
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _lift(other))


def _lift(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def constant(value) -> Tensor:
    """A tensor that never receives gradients."""
    return Tensor(value)


def _make(data: np.ndarray, parents: tuple, backward_rule) -> Tensor:
    needs = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs, _parents=parents if needs else (),
                 _backward=backward_rule if needs else None)
    # Interior nodes allocate their accumulator lazily, on first use during
    # backward; leaves keep the eager zeros contract.
    out.grad = None
    return out


def _accumulate(t: Tensor, grad: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(grad)  # copy: never alias an upstream buffer
    else:
        t.grad += grad


def topological_order(root: Tensor) -> list[Tensor]:
    """Nodes reachable from ``root`` through parent links, parents first.

    The returned list is the operation record of the graph: acyclic by
    construction, and a reverse traversal visits every node exactly once.
    """
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(tensor) into every requires_grad tensor's grad."""
    if loss.data.size != 1:
        raise ContractError(
            f"backward requires a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order = topological_order(loss)
    if loss.grad is None:
        loss.grad = np.ones_like(loss.data)
    else:
        loss.grad += np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_gradients(tensors) -> None:
    for t in tensors:
        t.zero_grad()


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; also supports scalars and adding a length-d vector
    to each row of an n-by-d matrix (bias broadcast)."""
    bias_broadcast = (a.data.ndim == 2 and b.data.ndim == 1
                      and a.data.shape[1] == b.data.shape[0])
    if (not bias_broadcast and a.data.shape != b.data.shape
            and a.data.size != 1 and b.data.size != 1):
        raise DimensionError(f"add: {a.shape} vs {b.shape}")
    out_data = a.data + b.data

    def rule(g):
        if bias_broadcast:
            _accumulate(a, g)
            _accumulate(b, g.sum(axis=0))
        else:
            _accumulate(a, _unbroadcast(g, a.data.shape))
            _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), rule)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape and a.data.size != 1 and b.data.size != 1:
        raise DimensionError(f"sub: {a.shape} vs {b.shape}")
    out_data = a.data - b.data

    def rule(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, -_unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), rule)


def neg(a: Tensor) -> Tensor:
    def rule(g):
        _accumulate(a, -g)

    return _make(-a.data, (a,), rule)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; either operand may be a scalar."""
    if a.data.shape != b.data.shape and a.data.size != 1 and b.data.size != 1:
        raise DimensionError(f"mul: {a.shape} vs {b.shape}")
    out_data = a.data * b.data

    def rule(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), rule)


def div(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape and a.data.size != 1 and b.data.size != 1:
        raise DimensionError(f"div: {a.shape} vs {b.shape}")
    out_data = a.data / b.data

    def rule(g):
        _accumulate(a, _unbroadcast(g / b.data, a.data.shape))
        _accumulate(b, _unbroadcast(-g * a.data / (b.data * b.data),
                                    b.data.shape))

    return _make(out_data, (a, b), rule)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to ``shape`` after a scalar broadcast."""
    if grad.shape == shape:
        return grad
    return np.full(shape, grad.sum()) if shape == () else grad.sum().reshape(shape)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(f"matmul: {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def rule(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _make(out_data, (a, b), rule)


def transpose(a: Tensor) -> Tensor:
    def rule(g):
        _accumulate(a, g.T)

    return _make(a.data.T, (a,), rule)


def affine(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """x @ W + b for x: n-by-d_in, W: d_in-by-d_out, b: length d_out."""
    if (x.data.ndim != 2 or W.data.ndim != 2 or b.data.ndim != 1
            or x.data.shape[1] != W.data.shape[0]
            or W.data.shape[1] != b.data.shape[0]):
        raise DimensionError(
            f"affine: x{x.shape}, W{W.shape}, b{b.shape} do not conform")
    out_data = x.data @ W.data + b.data

    def rule(g):
        _accumulate(x, g @ W.data.T)
        _accumulate(W, x.data.T @ g)
        _accumulate(b, g.sum(axis=0))

    return _make(out_data, (x, W, b), rule)


_ELEMENTWISE_KINDS = ("relu", "tanh", "sigmoid")


def elementwise(x: Tensor, kind: str) -> Tensor:
    """Apply a named scalar nonlinearity entrywise.

    The relu derivative at exactly zero is taken to be zero.
    """
    if kind == "relu":
        out_data = np.maximum(x.data, 0.0)
        local = (x.data > 0).astype(np.float64)
    elif kind == "tanh":
        out_data = np.tanh(x.data)
        local = 1.0 - out_data * out_data
    elif kind == "sigmoid":
        out_data = _sigmoid(x.data)
        local = out_data * (1.0 - out_data)
    else:
        raise ContractError(f"unsupported elementwise kind: {kind!r}")

    def rule(g):
        _accumulate(x, g * local)

    return _make(out_data, (x,), rule)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def relu(x: Tensor) -> Tensor:
    return elementwise(x, "relu")


def tanh(x: Tensor) -> Tensor:
    return elementwise(x, "tanh")


def sigmoid(x: Tensor) -> Tensor:
    return elementwise(x, "sigmoid")


def exp(x: Tensor) -> Tensor:
    out_data = np.exp(x.data)

    def rule(g):
        _accumulate(x, g * out_data)

    return _make(out_data, (x,), rule)


def log(x: Tensor) -> Tensor:
    out_data = np.log(x.data)

    def rule(g):
        _accumulate(x, g / x.data)

    return _make(out_data, (x,), rule)


def sqrt(x: Tensor) -> Tensor:
    out_data = np.sqrt(x.data)

    def rule(g):
        _accumulate(x, g * 0.5 / out_data)

    return _make(out_data, (x,), rule)


def square(x: Tensor) -> Tensor:
    def rule(g):
        _accumulate(x, g * 2.0 * x.data)

    return _make(x.data * x.data, (x,), rule)


def softplus(x: Tensor) -> Tensor:
    """ln(1 + e^x), computed without overflow for large |x|."""
    out_data = np.maximum(x.data, 0.0) + np.log1p(np.exp(-np.abs(x.data)))
    local = _sigmoid(x.data)

    def rule(g):
        _accumulate(x, g * local)

    return _make(out_data, (x,), rule)


def tensor_sum(x: Tensor) -> Tensor:
    out_data = np.asarray(x.data.sum())

    def rule(g):
        _accumulate(x, np.broadcast_to(g, x.data.shape).copy())

    return _make(out_data, (x,), rule)


def tensor_mean(x: Tensor) -> Tensor:
    n = x.data.size
    out_data = np.asarray(x.data.mean())

    def rule(g):
        _accumulate(x, np.broadcast_to(g / n, x.data.shape).copy())

    return _make(out_data, (x,), rule)


def unit_normalize(x: Tensor, epsilon: float = 1e-12) -> Tensor:
    """Divide each row by max(its Euclidean norm, epsilon).

    The epsilon floor keeps zero rows (reachable early in relu training)
    at zero instead of erroring.
    """
    if epsilon <= 0:
        raise ContractError("unit_normalize requires epsilon > 0")
    if x.data.ndim != 2:
        raise DimensionError(f"unit_normalize expects n-by-d input, got {x.shape}")
    norms = np.linalg.norm(x.data, axis=1, keepdims=True)
    scale = np.maximum(norms, epsilon)
    floored = norms <= epsilon
    out_data = x.data / scale

    def rule(g):
        # Above the floor: d(x/|x|) pulls out the radial component.
        # At or below the floor the map is linear with constant 1/epsilon.
        radial = (g * out_data).sum(axis=1, keepdims=True)
        gx = np.where(floored, g / epsilon, (g - out_data * radial) / scale)
        _accumulate(x, gx)

    return _make(out_data, (x,), rule)


def cross_entropy_logits(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy of n-by-C logits against integer labels."""
    if logits.data.ndim != 2:
        raise DimensionError(f"cross_entropy_logits expects n-by-C, got {logits.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    n, C = logits.data.shape
    if labels.shape != (n,):
        raise DimensionError(f"labels shape {labels.shape} does not match n={n}")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1)) + logits.data.max(axis=1)
    picked = logits.data[np.arange(n), labels]
    out_data = np.asarray((lse - picked).mean())
    softmax = np.exp(shifted)
    softmax /= softmax.sum(axis=1, keepdims=True)

    def rule(g):
        gz = softmax.copy()
        gz[np.arange(n), labels] -= 1.0
        _accumulate(logits, g * gz / n)

    return _make(out_data, (logits,), rule)


# ---------------------------------------------------------------------------
# SGD with momentum
# ---------------------------------------------------------------------------

@dataclass
class SgdMomentumState:
    """Per-parameter velocity plus the step hyperparameters.

    Update: v <- momentum * v + grad; p <- p - learning_rate * v.
    """

    learning_rate: float
    momentum: float = 0.0
    velocity: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, learning_rate: float,
                   momentum: float = 0.0) -> "SgdMomentumState":
        if not 0.0 <= momentum < 1.0:
            raise ContractError(f"momentum must be in [0, 1), got {momentum}")
        if learning_rate <= 0:
            raise ContractError("learning_rate must be positive")
        return cls(learning_rate=learning_rate, momentum=momentum,
                   velocity=[np.zeros_like(p.data) for p in params])


def sgd_step(params, grads, state: SgdMomentumState) -> None:
    if len(state.velocity) != len(params):
        raise ContractError("optimizer state does not match parameter list")
    for p, g, v in zip(params, grads, state.velocity):
        if v.shape != p.data.shape:
            raise ContractError("velocity shape does not match parameter")
        v *= state.momentum
        v += g
        p.data -= state.learning_rate * v


class SgdMomentum:
    """Convenience wrapper reading gradients straight off the parameters."""

    def __init__(self, params, learning_rate: float, momentum: float = 0.0):
        self.params = list(params)
        self.state = SgdMomentumState.for_params(
            self.params, learning_rate, momentum)

    @property
    def learning_rate(self) -> float:
        return self.state.learning_rate

    @learning_rate.setter
    def learning_rate(self, value: float) -> None:
        self.state.learning_rate = value

    def step(self) -> None:
        grads = [p.grad for p in self.params]
        sgd_step(self.params, grads, self.state)

    def zero_grad(self) -> None:
        zero_gradients(self.params)
