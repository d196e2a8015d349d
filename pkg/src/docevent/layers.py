"""Neural network building blocks on top of the autodiff tensors.

Modules register named Parameters; names must be unique within a model so
checkpoints and the Adam state can key on them.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, concat, embedding, get_default_dtype


class Parameter(Tensor):
    __slots__ = ("name",)

    def __init__(self, data, name: str):
        super().__init__(data, requires_grad=True)
        self.requires_grad = True  # parameters track grads even under no_grad init
        self.name = name

    def zero_grad(self):
        self.grad = None


def normal_init(rng: np.random.Generator, shape, std: float = 0.1) -> np.ndarray:
    return (rng.standard_normal(shape) * std).astype(get_default_dtype())


class Module:
    """Base class with a flat registry of parameters and submodules."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}
        self._children: dict[str, Module] = {}

    def add_param(self, name: str, data) -> Parameter:
        p = Parameter(data, name)
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        self._params[name] = p
        return p

    def add_module(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def parameters(self) -> list[Parameter]:
        out = list(self._params.values())
        for child in self._children.values():
            out.extend(child.parameters())
        names = [p.name for p in out]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate parameter names across modules: {dupes}")
        return out

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.data for p in self.parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        params = {p.name: p for p in self.parameters()}
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise KeyError(f"state dict mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=p.data.dtype)
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {p.data.shape}")
            p.data = arr.copy()


class Linear(Module):
    def __init__(self, rng, n_in: int, n_out: int, name: str, bias: bool = True):
        super().__init__()
        self.w = self.add_param(f"{name}.w", normal_init(rng, (n_in, n_out)))
        self.b = self.add_param(f"{name}.b", np.zeros(n_out, dtype=get_default_dtype())) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = x @ self.w
        if self.b is not None:
            y = y + self.b
        return y


class LayerNorm(Module):
    """Layer normalization over the last axis with learned gain and bias."""

    def __init__(self, d: int, name: str):
        super().__init__()
        dt = get_default_dtype()
        self.g = self.add_param(f"{name}.g", np.ones(d, dtype=dt))
        self.b = self.add_param(f"{name}.b", np.zeros(d, dtype=dt))

    def __call__(self, x: Tensor) -> Tensor:
        return x.layer_norm() * self.g + self.b


class Embedding(Module):
    def __init__(self, rng, n: int, d: int, name: str):
        super().__init__()
        self.table = self.add_param(name, normal_init(rng, (n, d)))

    def __call__(self, indices) -> Tensor:
        return embedding(self.table, indices)


class FeedForward(Module):
    """Two-layer MLP with ReLU, the "FFN" used by scorer heads and blocks."""

    def __init__(self, rng, n_in: int, hidden: int, n_out: int, name: str):
        super().__init__()
        self.fc1 = self.add_module("fc1", Linear(rng, n_in, hidden, f"{name}.fc1"))
        self.fc2 = self.add_module("fc2", Linear(rng, hidden, n_out, f"{name}.fc2"))

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(self.fc1(x).relu())


class MultiHeadAttention(Module):
    def __init__(self, rng, d: int, heads: int, name: str):
        super().__init__()
        if d % heads:
            raise ValueError(f"model dim {d} not divisible by {heads} heads")
        self.d, self.heads, self.dk = d, heads, d // heads
        self.wq = self.add_module("wq", Linear(rng, d, d, f"{name}.wq"))
        self.wk = self.add_module("wk", Linear(rng, d, d, f"{name}.wk"))
        self.wv = self.add_module("wv", Linear(rng, d, d, f"{name}.wv"))
        self.wo = self.add_module("wo", Linear(rng, d, d, f"{name}.wo"))

    def __call__(self, x: Tensor, mask: np.ndarray | None, dropout: float,
                 rng: np.random.Generator, train: bool) -> Tensor:
        """x: (B, S, d). mask: (B, S) with 1 for real positions, None for all-real."""
        B, S, d = x.shape
        h, dk = self.heads, self.dk

        def split(t):  # (B, S, d) -> (B, h, S, dk)
            return t.reshape(B, S, h, dk).transpose(0, 2, 1, 3)

        q, k, v = split(self.wq(x)), split(self.wk(x)), split(self.wv(x))
        scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(dk))
        if mask is not None:
            bias = np.where(mask[:, None, None, :] > 0, 0.0, -1e9)
            scores = scores + Tensor(bias)
        attn = scores.softmax(axis=-1)
        attn = attn.dropout(dropout, rng, train)
        ctx = (attn @ v).transpose(0, 2, 1, 3).reshape(B, S, d)
        return self.wo(ctx)


class TransformerLayer(Module):
    """Pre-norm transformer encoder block."""

    def __init__(self, rng, d: int, heads: int, ff: int, name: str):
        super().__init__()
        self.ln1 = self.add_module("ln1", LayerNorm(d, f"{name}.ln1"))
        self.attn = self.add_module("attn", MultiHeadAttention(rng, d, heads, f"{name}.attn"))
        self.ln2 = self.add_module("ln2", LayerNorm(d, f"{name}.ln2"))
        self.ff = self.add_module("ff", FeedForward(rng, d, ff, d, f"{name}.ff"))

    def __call__(self, x, mask, dropout, rng, train):
        x = x + self.attn(self.ln1(x), mask, dropout, rng, train).dropout(dropout, rng, train)
        x = x + self.ff(self.ln2(x)).dropout(dropout, rng, train)
        return x


class TransformerEncoder(Module):
    def __init__(self, rng, d: int, heads: int, ff: int, layers: int, name: str):
        super().__init__()
        self.layers = [
            self.add_module(f"l{i}", TransformerLayer(rng, d, heads, ff, f"{name}.l{i}"))
            for i in range(layers)
        ]
        self.ln_out = self.add_module("ln_out", LayerNorm(d, f"{name}.ln"))

    def __call__(self, x: Tensor, mask: np.ndarray | None = None, dropout: float = 0.0,
                 rng: np.random.Generator | None = None, train: bool = False) -> Tensor:
        for layer in self.layers:
            x = layer(x, mask, dropout, rng, train)
        return self.ln_out(x)


def masked_max(x: Tensor, mask: np.ndarray, axis: int) -> Tensor:
    """Elementwise max over `axis`, ignoring positions where mask == 0."""
    shape = [1] * x.ndim
    for i, s in enumerate(mask.shape):
        shape[i] = s
    bias = np.where(mask.reshape(shape) > 0, 0.0, -1e30)
    return (x + Tensor(bias)).max(axis=axis)
