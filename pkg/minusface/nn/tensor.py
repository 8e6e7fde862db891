"""
Reverse-mode autodiff tensor.

Each op builds its output with `Tensor.from_op`, passing the parents and a
closure that receives the output gradient and pushes gradients into the
parents. Graphs are only recorded when some parent requires a gradient.
"""

from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np

from minusface.errors import StateError


def as_array(data) -> np.ndarray:
    """float32 unless the data is already float64."""
    arr = np.asarray(data)
    if arr.dtype == np.float64:
        return arr
    return arr.astype(np.float32, copy=False)


class Tensor:
    """An array with an optional gradient buffer and the op that produced it."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = as_array(data)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: Sequence["Tensor"] = ()
        self._grad_fn: Optional[Callable[[np.ndarray], None]] = None
        self.name = name

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        parents: Sequence["Tensor"],
        grad_fn: Callable[[np.ndarray], None],
    ) -> "Tensor":
        out = cls(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._grad_fn = grad_fn
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def accumulate(self, grad: np.ndarray) -> None:
        """Add an incoming gradient (no-op for tensors that do not require one)."""
        if not self.requires_grad:
            return
        grad = np.asarray(grad, dtype=self.data.dtype).reshape(self.data.shape)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad = self.grad + grad

    def zero_grad(self) -> None:
        self.grad = None

    def _topological_order(self) -> List["Tensor"]:
        order: List[Tensor] = []
        visited = set()
        stack = [(self, False)]
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

    def backward(self) -> None:
        """Populate .grad on every tensor of the recorded graph that requires one."""
        if self.data.size != 1:
            raise StateError(f"backward needs a scalar loss, got shape {self.data.shape}")
        if self._grad_fn is None:
            raise StateError("backward called on a tensor with no recorded forward graph")

        order = self._topological_order()
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._grad_fn is not None and node.grad is not None:
                node._grad_fn(node.grad)

        # intermediate buffers are not needed after the pass
        for node in order:
            if node._grad_fn is not None and node is not self:
                node.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{label}, requires_grad={self.requires_grad})"


def parameters_of(tensors: Iterable[Tensor]) -> List[Tensor]:
    return [t for t in tensors if t.requires_grad]
