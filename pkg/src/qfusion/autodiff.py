"""Small reverse-mode automatic differentiation engine over float64 arrays.

Covers exactly the operations the diffusion model needs: broadcasting
add/mul, matmul, fused affine maps, tanh, reductions, row gathers for
embeddings, and a fused cross-entropy. Gradients accumulate into
``Tensor.grad`` after calling ``backward()`` on a scalar.
"""
from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    _grad_enabled = True

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _wrap(other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor(other)

    def __add__(self, other):
        other = self._wrap(other)
        out = _node(self.data + other.data, (self, other))
        if out._parents:
            def backward(g):
                if self.requires_grad:
                    _add_grad(self, _unbroadcast(g, self.data.shape))
                if other.requires_grad:
                    _add_grad(other, _unbroadcast(g, other.data.shape))
            out._backward = backward
        return out

    __radd__ = __add__

    def __neg__(self):
        out = _node(-self.data, (self,))
        if out._parents:
            out._backward = lambda g: _add_grad(self, -g)
        return out

    def __sub__(self, other):
        return self + (-self._wrap(other))

    def __rsub__(self, other):
        return self._wrap(other) + (-self)

    def __mul__(self, other):
        other = self._wrap(other)
        out = _node(self.data * other.data, (self, other))
        if out._parents:
            def backward(g):
                if self.requires_grad:
                    _add_grad(self, _unbroadcast(g * other.data, self.data.shape))
                if other.requires_grad:
                    _add_grad(other, _unbroadcast(g * self.data, other.data.shape))
            out._backward = backward
        return out

    __rmul__ = __mul__

    def __truediv__(self, scalar: float):
        return self * (1.0 / float(scalar))

    def __matmul__(self, other):
        other = self._wrap(other)
        out = _node(self.data @ other.data, (self, other))
        if out._parents:
            def backward(g):
                if self.requires_grad:
                    _add_grad(self, g @ other.data.T)
                if other.requires_grad:
                    _add_grad(other, self.data.T @ g)
            out._backward = backward
        return out

    def sum(self):
        out = _node(np.array(self.data.sum()), (self,))
        if out._parents:
            out._backward = lambda g: _add_grad(self, np.broadcast_to(g, self.data.shape))
        return out

    def mean(self):
        return self.sum() / self.data.size

    def tanh(self):
        y = np.tanh(self.data)
        out = _node(y, (self,))
        if out._parents:
            out._backward = lambda g: _add_grad(self, g * (1.0 - y * y))
        return out

    # -- autograd driver -----------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent._parents or parent.requires_grad:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)


def _node(data, parents: tuple[Tensor, ...]) -> Tensor:
    track = Tensor._grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=track)
    if track:
        out._parents = parents
    return out


def _add_grad(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class no_grad:
    def __enter__(self):
        self._prev = Tensor._grad_enabled
        Tensor._grad_enabled = False
        return self

    def __exit__(self, *exc):
        Tensor._grad_enabled = self._prev
        return False


def take_rows(table: Tensor, indices) -> Tensor:
    """Row gather (embedding lookup) with scatter-add backward."""
    idx = np.asarray(indices, dtype=np.intp)
    out = _node(table.data[idx], (table,))
    if out._parents:
        def backward(g):
            acc = np.zeros_like(table.data)
            np.add.at(acc, idx, g)
            _add_grad(table, acc)
        out._backward = backward
    return out


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    datas = [t.data for t in tensors]
    out = _node(np.concatenate(datas, axis=axis), tuple(tensors))
    if out._parents:
        sizes = [d.shape[axis] for d in datas]
        offsets = np.cumsum([0] + sizes)
        def backward(g):
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    sl = [slice(None)] * g.ndim
                    sl[axis] = slice(lo, hi)
                    _add_grad(t, g[tuple(sl)])
        out._backward = backward
    return out


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Fused x @ w + b for 2D x."""
    out = _node(x.data @ w.data + b.data, (x, w, b))
    if out._parents:
        def backward(g):
            if x.requires_grad:
                _add_grad(x, g @ w.data.T)
            if w.requires_grad:
                _add_grad(w, x.data.T @ g)
            if b.requires_grad:
                _add_grad(b, g.sum(axis=0))
        out._backward = backward
    return out


def linear_combination(pairs: list[tuple[Tensor, Tensor]], b: Tensor) -> Tensor:
    """Fused sum_i x_i @ w_i + b."""
    data = b.data.copy()
    for x, w in pairs:
        data = data + x.data @ w.data
    parents = tuple(t for pair in pairs for t in pair) + (b,)
    out = _node(data, parents)
    if out._parents:
        def backward(g):
            for x, w in pairs:
                if x.requires_grad:
                    _add_grad(x, g @ w.data.T)
                if w.requires_grad:
                    _add_grad(w, x.data.T @ g)
            if b.requires_grad:
                _add_grad(b, g.sum(axis=0))
        out._backward = backward
    return out


def log_softmax(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    y = shifted - logz
    out = _node(y, (x,))
    if out._parents:
        softmax = np.exp(y)
        def backward(g):
            _add_grad(x, g - softmax * g.sum(axis=-1, keepdims=True))
        out._backward = backward
    return out


def pick(x: Tensor, indices) -> Tensor:
    """Select x[i, indices[i]] for each row i."""
    idx = np.asarray(indices, dtype=np.intp)
    rows = np.arange(x.data.shape[0])
    out = _node(x.data[rows, idx], (x,))
    if out._parents:
        def backward(g):
            acc = np.zeros_like(x.data)
            acc[rows, idx] = g
            _add_grad(x, acc)
        out._backward = backward
    return out


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Fused mean categorical cross-entropy over rows of (B, K) logits."""
    idx = np.asarray(targets, dtype=np.intp)
    rows = np.arange(logits.data.shape[0])
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - logz
    value = -log_probs[rows, idx].mean()
    out = _node(np.array(value), (logits,))
    if out._parents:
        def backward(g):
            grad = np.exp(log_probs)
            grad[rows, idx] -= 1.0
            _add_grad(logits, grad * (g / rows.size))
        out._backward = backward
    return out


class Adam:
    """Standard Adam with bias correction; skips parameters without grads."""

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self._v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, p in self.params.items():
            if p.grad is None:
                continue
            m = self._m[name] = b1 * self._m[name] + (1 - b1) * p.grad
            v = self._v[name] = b2 * self._v[name] + (1 - b2) * p.grad * p.grad
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None
