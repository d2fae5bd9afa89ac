"""Minimal reverse-mode automatic differentiation over dense 2-D tensors.

Define-by-run: every operation records its parents and a backward closure on
the output tensor, so the tape is rebuilt on each forward pass. Everything is
64-bit; shapes must match exactly (the only broadcasting is scalar * tensor
and the explicit ``add_bias`` primitive), so shape bugs surface as errors
instead of silently broadcast gradients.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)  # bare vectors are columns
    elif arr.ndim != 2:
        raise ShapeError(f"tensors are 2-D, got ndim={arr.ndim}")
    return arr


class Tensor:
    """Dense float64 matrix with an optional gradient and recorded parents."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False,
                 _parents: tuple = (), _backward: Callable | None = None):
        self.data = _as_array(data)
        if not np.all(np.isfinite(self.data)):
            raise ValueError("tensor contains non-finite values")
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on non-scalar shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def backward(self) -> None:
        backward(self)

    def grad_or_zeros(self) -> np.ndarray:
        return self.grad if self.grad is not None else np.zeros_like(self.data)


def _needs(t: "Tensor") -> bool:
    """Whether a tensor participates in gradient flow."""
    return t.requires_grad or bool(t._parents)


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _result(data, parents, backward_fn) -> Tensor:
    track = any(p.requires_grad or p._parents for p in parents)
    if track:
        return Tensor(data, _parents=tuple(parents), _backward=backward_fn)
    return Tensor(data)


# ---------------------------------------------------------------------------
# primitives

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")
    out = _result(a.data + b.data, (a, b), None)

    def bw():
        if _needs(a):
            a.grad += out.grad
        if _needs(b):
            b.grad += out.grad

    out._backward = bw
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")
    out = _result(a.data - b.data, (a, b), None)

    def bw():
        if _needs(a):
            a.grad += out.grad
        if _needs(b):
            b.grad -= out.grad

    out._backward = bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Hadamard product."""
    _check_same_shape(a, b, "mul")
    out = _result(a.data * b.data, (a, b), None)

    def bw():
        if _needs(a):
            a.grad += out.grad * b.data
        if _needs(b):
            b.grad += out.grad * a.data

    out._backward = bw
    return out


def scale(a: Tensor, s: float) -> Tensor:
    """Multiply by a python scalar (the only permitted broadcast)."""
    s = float(s)
    out = _result(a.data * s, (a,), None)

    def bw():
        a.grad += out.grad * s

    out._backward = bw
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} x {b.shape}")
    out = _result(a.data @ b.data, (a, b), None)

    def bw():
        if _needs(a):
            a.grad += out.grad @ b.data.T
        if _needs(b):
            b.grad += a.data.T @ out.grad

    out._backward = bw
    return out


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add a (1, n) bias row to every row of x; backward sums over rows."""
    if b.shape != (1, x.shape[1]):
        raise ShapeError(f"add_bias: bias {b.shape} does not match {x.shape}")
    out = _result(x.data + b.data, (x, b), None)

    def bw():
        if _needs(x):
            x.grad += out.grad
        if _needs(b):
            b.grad += out.grad.sum(axis=0, keepdims=True)

    out._backward = bw
    return out


def transpose(a: Tensor) -> Tensor:
    out = _result(a.data.T, (a,), None)

    def bw():
        a.grad += out.grad.T

    out._backward = bw
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = _result(s, (a,), None)

    def bw():
        a.grad += out.grad * s * (1.0 - s)

    out._backward = bw
    return out


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    out = _result(t, (a,), None)

    def bw():
        a.grad += out.grad * (1.0 - t * t)

    out._backward = bw
    return out


def relu(a: Tensor) -> Tensor:
    out = _result(np.maximum(a.data, 0.0), (a,), None)

    def bw():
        a.grad += out.grad * (a.data > 0.0)

    out._backward = bw
    return out


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0.0):
        raise ValueError("log: non-positive input")
    out = _result(np.log(a.data), (a,), None)

    def bw():
        a.grad += out.grad / a.data

    out._backward = bw
    return out


def power(a: Tensor, p: float) -> Tensor:
    p = float(p)
    if p != int(p) and np.any(a.data <= 0.0):
        raise ValueError("power: fractional exponent of non-positive input")
    out = _result(a.data ** p, (a,), None)

    def bw():
        a.grad += out.grad * p * a.data ** (p - 1.0)

    out._backward = bw
    return out


_ELEMENTWISE_BINARY = {"add": add, "sub": sub, "mul": mul}
_ELEMENTWISE_UNARY = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu}


def elementwise(op: str, *args: Tensor) -> Tensor:
    """Dispatch by name over the elementwise primitive set."""
    if op in _ELEMENTWISE_BINARY:
        if len(args) != 2:
            raise TypeError(f"{op} takes 2 operands")
        return _ELEMENTWISE_BINARY[op](*args)
    if op in _ELEMENTWISE_UNARY:
        if len(args) != 1:
            raise TypeError(f"{op} takes 1 operand")
        return _ELEMENTWISE_UNARY[op](*args)
    raise ValueError(f"unknown elementwise op {op!r}")


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax, stabilized by row-max subtraction."""
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = _result(y, (x,), None)

    def bw():
        g = out.grad
        x.grad += y * (g - (g * y).sum(axis=1, keepdims=True))

    out._backward = bw
    return out


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    """Vertical concatenation; backward splits the gradient by extents."""
    if not parts:
        raise ShapeError("concat_rows: empty part list")
    ncols = parts[0].shape[1]
    for p in parts:
        if p.shape[1] != ncols:
            raise ShapeError(f"concat_rows: column mismatch {p.shape[1]} vs {ncols}")
    out = _result(np.concatenate([p.data for p in parts], axis=0), tuple(parts), None)
    extents = [p.shape[0] for p in parts]

    def bw():
        off = 0
        for p, n in zip(parts, extents):
            if _needs(p):
                p.grad += out.grad[off:off + n]
            off += n

    out._backward = bw
    return out


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    """Horizontal concatenation (batch-major convenience)."""
    if not parts:
        raise ShapeError("concat_cols: empty part list")
    nrows = parts[0].shape[0]
    for p in parts:
        if p.shape[0] != nrows:
            raise ShapeError(f"concat_cols: row mismatch {p.shape[0]} vs {nrows}")
    out = _result(np.concatenate([p.data for p in parts], axis=1), tuple(parts), None)
    extents = [p.shape[1] for p in parts]

    def bw():
        off = 0
        for p, n in zip(parts, extents):
            if _needs(p):
                p.grad += out.grad[:, off:off + n]
            off += n

    out._backward = bw
    return out


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    out = _result(x.data[start:stop], (x,), None)

    def bw():
        x.grad[start:stop] += out.grad

    out._backward = bw
    return out


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    out = _result(x.data[:, start:stop], (x,), None)

    def bw():
        x.grad[:, start:stop] += out.grad

    out._backward = bw
    return out


def tsum(x: Tensor) -> Tensor:
    """Sum of all entries, as a scalar node."""
    out = _result(np.array([[x.data.sum()]]), (x,), None)

    def bw():
        x.grad += out.grad[0, 0]

    out._backward = bw
    return out


def mse(pred: Tensor, target: Tensor) -> Tensor:
    """Mean of squared differences as a scalar node."""
    _check_same_shape(pred, target, "mse")
    n = pred.data.size
    diff = pred.data - target.data
    out = _result(np.array([[float((diff * diff).mean())]]), (pred, target), None)

    def bw():
        g = out.grad[0, 0] * 2.0 * diff / n
        if _needs(pred):
            pred.grad += g
        if _needs(target):
            target.grad -= g

    out._backward = bw
    return out


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy of row-wise softmax against integer labels."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    m, c = logits.shape
    if labels.shape[0] != m:
        raise ShapeError(f"cross_entropy: {m} rows vs {labels.shape[0]} labels")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError("cross_entropy: label out of range")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    loss = -logp[np.arange(m), labels].mean()
    out = _result(np.array([[loss]]), (logits,), None)

    def bw():
        p = np.exp(logp)
        p[np.arange(m), labels] -= 1.0
        logits.grad += out.grad[0, 0] * p / m

    out._backward = bw
    return out


# ---------------------------------------------------------------------------
# backward pass

def backward(loss: Tensor) -> None:
    """Reverse-accumulate gradients from a scalar loss through the tape.

    Iterative topological order (rollouts produce chains far deeper than the
    recursion limit). Gradients of all reachable nodes are reset first, so
    each call stands alone; leaves not reachable from the loss keep
    ``grad=None`` and read as zero via ``grad_or_zeros``.
    """
    if loss.shape != (1, 1):
        raise ShapeError(f"backward requires a scalar loss, got {loss.shape}")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    for node in topo:
        node.grad = np.zeros_like(node.data) if (_needs(node) or node is loss) else None
    loss.grad[0, 0] = 1.0
    for node in reversed(topo):
        # nodes without recorded parents are constants even if a closure
        # was attached before tracking was decided
        if node._parents and node._backward is not None:
            node._backward()


def grad_check(fn: Callable[..., Tensor], tensors: Sequence[Tensor],
               epsilon: float = 1e-5) -> float:
    """Worst relative error between backprop and central finite differences.

    ``fn`` maps the given tensors to a scalar Tensor. The numeric side
    re-evaluates ``fn`` at coordinate-wise perturbations, so it is independent
    of the recorded gradients it checks.
    """
    for t in tensors:
        t.requires_grad = True
    loss = fn(*tensors)
    backward(loss)
    analytic = [t.grad_or_zeros().copy() for t in tensors]
    worst = 0.0
    for t, g in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            hi = fn(*tensors).item()
            flat[i] = orig - epsilon
            lo = fn(*tensors).item()
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * epsilon)
            a = g.reshape(-1)[i]
            denom = max(abs(a), abs(numeric), 1e-6)
            worst = max(worst, abs(a - numeric) / denom)
    return worst
