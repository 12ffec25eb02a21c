"""Reverse-mode autodiff over numpy arrays.

Every op records its parents and a closure that maps the output gradient to
parent gradients; ``Tensor.backward`` walks the graph in reverse topological
order. All values are float64.
"""
from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

ArrayLike = Union["Tensor", np.ndarray, float, int]

_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    previous = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` back down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __array_priority__ = 100.0

    def __init__(self, data: ArrayLike, requires_grad: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: Tuple[Tensor, ...] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._op = ""

    # -- bookkeeping -----------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op or 'leaf'}, requires_grad={self.requires_grad})"

    def accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64, copy=True)
        else:
            self.grad = self.grad + grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        if grad is None:
            if self.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        self.accumulate(np.broadcast_to(grad, self.shape))

        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
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

        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- graph construction ----------------------------------------------

    @staticmethod
    def _wrap(value: ArrayLike) -> "Tensor":
        return value if isinstance(value, Tensor) else Tensor(value)

    @staticmethod
    def _result(
        data: np.ndarray,
        parents: Sequence["Tensor"],
        op: str,
        backward: Callable[[np.ndarray], None],
    ) -> "Tensor":
        out = Tensor(data)
        if grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
            out._op = op
        return out

    # -- elementwise arithmetic ------------------------------------------

    def __add__(self, other: ArrayLike) -> "Tensor":
        other = self._wrap(other)
        a, b = self, other

        def backward(g: np.ndarray) -> None:
            if a.requires_grad:
                a.accumulate(unbroadcast(g, a.shape))
            if b.requires_grad:
                b.accumulate(unbroadcast(g, b.shape))

        return self._result(a.data + b.data, (a, b), "add", backward)

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        a = self

        def backward(g: np.ndarray) -> None:
            a.accumulate(-g)

        return self._result(-a.data, (a,), "neg", backward)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return self + (-self._wrap(other))

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return self._wrap(other) + (-self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        other = self._wrap(other)
        a, b = self, other

        def backward(g: np.ndarray) -> None:
            if a.requires_grad:
                a.accumulate(unbroadcast(g * b.data, a.shape))
            if b.requires_grad:
                b.accumulate(unbroadcast(g * a.data, b.shape))

        return self._result(a.data * b.data, (a, b), "mul", backward)

    __rmul__ = __mul__

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        other = self._wrap(other)
        a, b = self, other

        def backward(g: np.ndarray) -> None:
            if a.requires_grad:
                a.accumulate(unbroadcast(g / b.data, a.shape))
            if b.requires_grad:
                b.accumulate(unbroadcast(-g * a.data / (b.data * b.data), b.shape))

        return self._result(a.data / b.data, (a, b), "div", backward)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return self._wrap(other) / self

    def __pow__(self, exponent: float) -> "Tensor":
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar exponents are supported")
        a = self
        if exponent == 0:
            return Tensor(np.ones_like(a.data))

        def backward(g: np.ndarray) -> None:
            a.accumulate(g * exponent * a.data ** (exponent - 1))

        return self._result(a.data**exponent, (a,), f"pow{exponent}", backward)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        other = self._wrap(other)
        a, b = self, other

        def backward(g: np.ndarray) -> None:
            if a.requires_grad:
                ga = g @ np.swapaxes(b.data, -1, -2) if b.ndim > 1 else np.multiply.outer(g, b.data)
                a.accumulate(unbroadcast(ga, a.shape))
            if b.requires_grad:
                gb = np.swapaxes(a.data, -1, -2) @ g
                b.accumulate(unbroadcast(gb, b.shape))

        return self._result(a.data @ b.data, (a, b), "matmul", backward)

    # -- unary functions -------------------------------------------------

    def exp(self) -> "Tensor":
        a = self
        y = np.exp(a.data)

        def backward(g: np.ndarray) -> None:
            a.accumulate(g * y)

        return self._result(y, (a,), "exp", backward)

    def log(self) -> "Tensor":
        a = self

        def backward(g: np.ndarray) -> None:
            a.accumulate(g / a.data)

        return self._result(np.log(a.data), (a,), "log", backward)

    def sqrt(self) -> "Tensor":
        return self**0.5

    def relu(self) -> "Tensor":
        a = self
        mask = a.data > 0

        def backward(g: np.ndarray) -> None:
            a.accumulate(g * mask)

        return self._result(a.data * mask, (a,), "relu", backward)

    def clip(self, low: Optional[float] = None, high: Optional[float] = None) -> "Tensor":
        a = self
        lo = -np.inf if low is None else low
        hi = np.inf if high is None else high
        mask = (a.data >= lo) & (a.data <= hi)

        def backward(g: np.ndarray) -> None:
            a.accumulate(g * mask)

        return self._result(np.clip(a.data, lo, hi), (a,), "clip", backward)

    # -- reductions and shape ops ----------------------------------------

    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        a = self

        def backward(g: np.ndarray) -> None:
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a.accumulate(np.broadcast_to(g, a.shape))

        return self._result(a.data.sum(axis=axis, keepdims=keepdims), (a,), "sum", backward)

    def mean(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        count = self.size if axis is None else int(np.prod([self.shape[i] for i in np.atleast_1d(axis)]))
        return self.sum(axis=axis, keepdims=keepdims) / float(count)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self

        def backward(g: np.ndarray) -> None:
            a.accumulate(g.reshape(a.shape))

        return self._result(a.data.reshape(shape), (a,), "reshape", backward)

    def transpose(self, *axes: int) -> "Tensor":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        a = self

        def backward(g: np.ndarray) -> None:
            a.accumulate(np.transpose(g, inverse))

        return self._result(np.transpose(a.data, axes), (a,), "transpose", backward)

    def __getitem__(self, index: object) -> "Tensor":
        a = self

        def backward(g: np.ndarray) -> None:
            full = np.zeros_like(a.data)
            np.add.at(full, index, g)
            a.accumulate(full)

        return self._result(a.data[index], (a,), "index", backward)


def tensor(data: ArrayLike, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g: np.ndarray) -> None:
        for t, start, stop in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                t.accumulate(np.take(g, np.arange(start, stop), axis=axis))

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor._result(data, tuple(tensors), "concat", backward)


__all__ = ["Tensor", "tensor", "concat", "no_grad", "grad_enabled", "unbroadcast"]
