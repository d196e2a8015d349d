"""Reverse-mode autodiff over dense numpy arrays.

Minimal tape-based engine in the micrograd style: every op builds a Tensor
holding its forward value and a closure that routes gradients to its parents.
Double precision by default so finite-difference checks have headroom;
single precision can be enabled globally for faster training runs.
"""

from __future__ import annotations

import numpy as np

_config = {
    "dtype": np.float64,
    "debug_nan": False,
}


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible for an op."""


def set_default_dtype(dtype) -> None:
    if dtype not in (np.float32, np.float64):
        raise ValueError("dtype must be np.float32 or np.float64")
    _config["dtype"] = dtype


def get_default_dtype():
    return _config["dtype"]


def set_debug_nan(flag: bool) -> None:
    """When on, every op output is checked for NaN/Inf and raises naming the op."""
    _config["debug_nan"] = bool(flag)


_grad_enabled = True


class no_grad:
    """Context manager disabling tape construction (evaluation mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents", "_op")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _op: str = "leaf"):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=_config["dtype"])
        self.requires_grad = requires_grad and _grad_enabled
        self.grad = None
        self._backward = None
        self._parents = _parents if self.requires_grad else ()
        self._op = _op
        if _config["debug_nan"] and not np.all(np.isfinite(self.data)):
            raise FloatingPointError(f"non-finite values produced by op '{_op}'")

    # ------------------------------------------------------------------
    # basics

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op}, grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # ------------------------------------------------------------------
    # autodiff driver

    def backward(self) -> None:
        """Backpropagate from this scalar; accumulates into leaf .grad arrays."""
        if self.size != 1:
            raise ValueError(f"backward() requires a scalar loss, got shape {self.shape}")
        topo: list[Tensor] = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is not None:
                for parent, pg in node._backward(g):
                    if not parent.requires_grad:
                        continue
                    acc = grads.get(id(parent))
                    grads[id(parent)] = pg if acc is None else acc + pg
            else:
                # leaf: accumulate across repeated backward calls
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad = node.grad + g

    # ------------------------------------------------------------------
    # helpers

    @staticmethod
    def _coerce(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    def _binary(self, other, fwd, bwd, op):
        other = Tensor._coerce(other)
        try:
            value = fwd(self.data, other.data)
        except ValueError as e:
            raise ShapeError(f"{op}: incompatible shapes {self.shape} and {other.shape}") from e
        req = self.requires_grad or other.requires_grad
        out = Tensor(value, requires_grad=req, _parents=(self, other), _op=op)
        if out.requires_grad:
            out._backward = lambda g: bwd(g, self, other)
        return out

    # ------------------------------------------------------------------
    # arithmetic

    def __add__(self, other):
        def bwd(g, a, b):
            return [(a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape))]

        return self._binary(other, np.add, bwd, "add")

    __radd__ = __add__

    def __sub__(self, other):
        def bwd(g, a, b):
            return [(a, _unbroadcast(g, a.shape)), (b, _unbroadcast(-g, b.shape))]

        return self._binary(other, np.subtract, bwd, "sub")

    def __rsub__(self, other):
        return Tensor._coerce(other).__sub__(self)

    def __mul__(self, other):
        def bwd(g, a, b):
            return [
                (a, _unbroadcast(g * b.data, a.shape)),
                (b, _unbroadcast(g * a.data, b.shape)),
            ]

        return self._binary(other, np.multiply, bwd, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        def bwd(g, a, b):
            return [
                (a, _unbroadcast(g / b.data, a.shape)),
                (b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape)),
            ]

        return self._binary(other, np.divide, bwd, "div")

    def __rtruediv__(self, other):
        return Tensor._coerce(other).__truediv__(self)

    def __neg__(self):
        out = Tensor(-self.data, requires_grad=self.requires_grad, _parents=(self,), _op="neg")
        if out.requires_grad:
            out._backward = lambda g: [(self, -g)]
        return out

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("only scalar exponents supported")
        out = Tensor(self.data ** p, requires_grad=self.requires_grad, _parents=(self,), _op="pow")
        if out.requires_grad:
            out._backward = lambda g: [(self, g * p * self.data ** (p - 1))]
        return out

    def __matmul__(self, other):
        def bwd(g, a, b):
            bd = b.data
            ad = a.data
            ga = np.matmul(g, np.swapaxes(bd, -1, -2))
            gb = np.matmul(np.swapaxes(ad, -1, -2), g)
            return [(a, _unbroadcast(ga, a.shape)), (b, _unbroadcast(gb, b.shape))]

        return self._binary(other, np.matmul, bwd, "matmul")

    # ------------------------------------------------------------------
    # reductions

    def sum(self, axis=None, keepdims=False):
        out = Tensor(
            self.data.sum(axis=axis, keepdims=keepdims),
            requires_grad=self.requires_grad,
            _parents=(self,),
            _op="sum",
        )
        if out.requires_grad:
            def bwd(g):
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                return [(self, np.broadcast_to(g, self.shape).copy())]

            out._backward = bwd
        return out

    def mean(self, axis=None, keepdims=False):
        n = self.size if axis is None else self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def max(self, axis: int = 0):
        """Max along `axis`; ties route the gradient to the lowest index."""
        idx = np.argmax(self.data, axis=axis)
        value = np.take_along_axis(self.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)
        out = Tensor(value, requires_grad=self.requires_grad, _parents=(self,), _op="max")
        if out.requires_grad:
            def bwd(g):
                full = np.zeros_like(self.data)
                np.put_along_axis(full, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
                return [(self, full)]

            out._backward = bwd
        return out

    def argmax(self, axis: int = 0) -> np.ndarray:
        return np.argmax(self.data, axis=axis)

    # ------------------------------------------------------------------
    # elementwise nonlinearities

    def exp(self):
        value = np.exp(self.data)
        out = Tensor(value, requires_grad=self.requires_grad, _parents=(self,), _op="exp")
        if out.requires_grad:
            out._backward = lambda g: [(self, g * value)]
        return out

    def log(self):
        out = Tensor(np.log(self.data), requires_grad=self.requires_grad, _parents=(self,), _op="log")
        if out.requires_grad:
            out._backward = lambda g: [(self, g / self.data)]
        return out

    def relu(self):
        out = Tensor(np.maximum(self.data, 0.0), requires_grad=self.requires_grad, _parents=(self,), _op="relu")
        if out.requires_grad:
            mask = self.data > 0
            out._backward = lambda g: [(self, g * mask)]
        return out

    def sigmoid(self):
        # stable in both tails
        value = np.where(self.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(self.data))),
                         np.exp(-np.abs(self.data)) / (1.0 + np.exp(-np.abs(self.data))))
        out = Tensor(value, requires_grad=self.requires_grad, _parents=(self,), _op="sigmoid")
        if out.requires_grad:
            out._backward = lambda g: [(self, g * value * (1.0 - value))]
        return out

    def softplus(self):
        """log(1 + exp(x)), computed stably."""
        value = np.logaddexp(0.0, self.data)
        out = Tensor(value, requires_grad=self.requires_grad, _parents=(self,), _op="softplus")
        if out.requires_grad:
            sig = 1.0 / (1.0 + np.exp(-self.data.clip(-60, 60)))
            out._backward = lambda g: [(self, g * sig)]
        return out

    def tanh(self):
        value = np.tanh(self.data)
        out = Tensor(value, requires_grad=self.requires_grad, _parents=(self,), _op="tanh")
        if out.requires_grad:
            out._backward = lambda g: [(self, g * (1.0 - value * value))]
        return out

    # ------------------------------------------------------------------
    # softmax family

    def softmax(self, axis: int = -1):
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        value = e / e.sum(axis=axis, keepdims=True)
        out = Tensor(value, requires_grad=self.requires_grad, _parents=(self,), _op="softmax")
        if out.requires_grad:
            def bwd(g):
                dot = (g * value).sum(axis=axis, keepdims=True)
                return [(self, (g - dot) * value)]

            out._backward = bwd
        return out

    def logsumexp(self, axis: int = -1, keepdims: bool = False):
        m = self.data.max(axis=axis, keepdims=True)
        value = m + np.log(np.exp(self.data - m).sum(axis=axis, keepdims=True))
        sm = np.exp(self.data - value)
        if not keepdims:
            value = value.squeeze(axis)
        out = Tensor(value, requires_grad=self.requires_grad, _parents=(self,), _op="logsumexp")
        if out.requires_grad:
            def bwd(g):
                if not keepdims:
                    g = np.expand_dims(g, axis)
                return [(self, g * sm)]

            out._backward = bwd
        return out

    # ------------------------------------------------------------------
    # normalization / regularization

    def layer_norm(self, eps: float = 1e-5):
        """Normalize the last axis to zero mean, unit variance (no affine)."""
        mu = self.data.mean(axis=-1, keepdims=True)
        xc = self.data - mu
        var = (xc * xc).mean(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        value = xc * inv
        out = Tensor(value, requires_grad=self.requires_grad, _parents=(self,), _op="layer_norm")
        if out.requires_grad:
            n = self.shape[-1]

            def bwd(g):
                gm = g.mean(axis=-1, keepdims=True)
                gv = (g * value).mean(axis=-1, keepdims=True)
                return [(self, inv * (g - gm - value * gv))]

            out._backward = bwd
        return out

    def dropout(self, rate: float, rng: np.random.Generator, train: bool):
        """Inverted dropout: identity in eval mode, E[out] = in when training."""
        if not train or rate <= 0.0:
            return self
        keep = 1.0 - rate
        mask = (rng.random(self.shape) < keep).astype(self.data.dtype) / keep
        return self * Tensor(mask)

    # ------------------------------------------------------------------
    # shape ops

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = Tensor(self.data.reshape(shape), requires_grad=self.requires_grad,
                     _parents=(self,), _op="reshape")
        if out.requires_grad:
            out._backward = lambda g: [(self, g.reshape(self.shape))]
        return out

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        out = Tensor(self.data.transpose(axes), requires_grad=self.requires_grad,
                     _parents=(self,), _op="transpose")
        if out.requires_grad:
            inv = np.argsort(axes)
            out._backward = lambda g: [(self, g.transpose(inv))]
        return out

    def __getitem__(self, key):
        out = Tensor(self.data[key], requires_grad=self.requires_grad, _parents=(self,), _op="slice")
        if out.requires_grad:
            def bwd(g):
                full = np.zeros_like(self.data)
                np.add.at(full, key, g)
                return [(self, full)]

            out._backward = bwd
        return out


# ----------------------------------------------------------------------
# free functions


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [Tensor._coerce(t) for t in tensors]
    value = np.concatenate([t.data for t in tensors], axis=axis)
    req = any(t.requires_grad for t in tensors)
    out = Tensor(value, requires_grad=req, _parents=tuple(tensors), _op="concat")
    if out.requires_grad:
        sizes = [t.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)

        def bwd(g):
            grads = []
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                grads.append((t, g[tuple(idx)]))
            return grads

        out._backward = bwd
    return out


def stack(tensors, axis: int = 0) -> Tensor:
    expanded = []
    for t in tensors:
        t = Tensor._coerce(t)
        shape = list(t.shape)
        shape.insert(axis if axis >= 0 else len(shape) + 1 + axis, 1)
        expanded.append(t.reshape(shape))
    return concat(expanded, axis=axis)


def embedding(table: Tensor, indices) -> Tensor:
    """Row lookup with scatter-add gradient into the table."""
    idx = np.asarray(indices, dtype=np.int64)
    out = Tensor(table.data[idx], requires_grad=table.requires_grad,
                 _parents=(table,), _op="embedding")
    if out.requires_grad:
        def bwd(g):
            full = np.zeros_like(table.data)
            np.add.at(full, idx, g)
            return [(table, full)]

        out._backward = bwd
    return out


def zeros(*shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=_config["dtype"]))
