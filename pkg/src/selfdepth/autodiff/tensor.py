"""Reverse-mode automatic differentiation on dense numpy arrays.

A Tensor wraps a numpy array plus an optional gradient slot. Operations on
tensors record how to push gradients back to their inputs; ``backward`` on a
scalar replays those records in reverse execution order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible with an operation."""


_seq_counter = itertools.count()


class Tensor:
    """Dense N-dimensional float array with an optional gradient slot.

    ``data`` is always a float32 or float64 numpy array. ``grad`` is None
    until ``backward`` has run on a scalar that depends on this tensor.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn",
                 "_op", "_seq")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self._op: str = "leaf"
        self._seq: int = next(_seq_counter)

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def is_leaf(self) -> bool:
        return not self._parents

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, op={self._op})"

    def zero_grad(self) -> None:
        self.grad = None

    # -- operator sugar (implementations live in ops.py) ----------------------

    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(other, self)

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)

    def __pow__(self, exponent):
        from . import ops
        return ops.power(self, exponent)

    def __getitem__(self, key):
        from . import ops
        return ops.getitem(self, key)

    def reshape(self, *shape):
        from . import ops
        return ops.reshape(self, shape if len(shape) > 1 else shape[0])

    def sum(self, axes=None, keepdims=False):
        from . import ops
        return ops.reduce_sum(self, axes, keepdims)

    def mean(self, axes=None, keepdims=False):
        from . import ops
        return ops.reduce_mean(self, axes, keepdims)

    def backward(self) -> "ComputationRecord":
        return backward(self)


def as_tensor(x, dtype=None) -> Tensor:
    """Wrap ``x`` into a constant Tensor unless it already is one."""
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def make_op(data: np.ndarray,
            parents: Sequence[Tensor],
            backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]],
            op: str) -> Tensor:
    """Create the result tensor of a differentiable operation.

    ``backward_fn`` maps the upstream gradient to one gradient (or None)
    per parent. When no parent requires a gradient the op is not recorded,
    so inference-only graphs carry no tape overhead.
    """
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
        out._op = op
    return out


@dataclass
class ComputationRecord:
    """Executed operations reachable from a root, in execution order."""

    nodes: list[Tensor] = field(default_factory=list)

    @property
    def op_names(self) -> list[str]:
        return [n._op for n in self.nodes]

    def __len__(self) -> int:
        return len(self.nodes)


def linearize(root: Tensor) -> ComputationRecord:
    """Collect the recorded ops that ``root`` depends on, in execution order.

    Only interior (non-leaf) nodes are recorded; creation sequence numbers
    give a valid topological order because an op's inputs always exist
    before its output.
    """
    seen: set[int] = set()
    nodes: list[Tensor] = []
    stack = [root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if node._parents:
            nodes.append(node)
            stack.extend(node._parents)
    nodes.sort(key=lambda n: n._seq)
    return ComputationRecord(nodes)


def backward(root: Tensor) -> ComputationRecord:
    """Populate ``grad`` on every requires_grad leaf reachable from ``root``.

    ``root`` must be a scalar (size 1). Leaf gradients accumulate into any
    existing ``grad``, so callers re-running backward on the same graph
    should ``zero_grad`` first.
    """
    if root.size != 1:
        raise ShapeError(f"backward requires a scalar root, got shape {root.shape}")
    record = linearize(root)
    grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    if root.is_leaf() and root.requires_grad:
        _accumulate_leaf(root, grads[id(root)])
    for node in reversed(record.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        parent_grads = node._backward_fn(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            if pg.shape != parent.shape:
                raise ShapeError(
                    f"op {node._op}: gradient shape {pg.shape} does not match "
                    f"parent shape {parent.shape}")
            if parent._parents:
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
            else:
                _accumulate_leaf(parent, pg)
    return record


def _accumulate_leaf(leaf: Tensor, g: np.ndarray) -> None:
    if leaf.grad is None:
        leaf.grad = g.astype(leaf.dtype, copy=True)
    else:
        leaf.grad = leaf.grad + g.astype(leaf.dtype, copy=False)
