"""Dense float64 tensors with reverse-mode differentiation.

Each op records a backward closure on its output; ``backward(loss)`` then
walks the recorded graph once in reverse topological order and accumulates
gradients into every tensor with ``track_grad=True``. All arithmetic is
double precision and deterministic given operand order, which the
experiment pipeline relies on for bit-reproducible runs.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, ShapeError

Array = np.ndarray


class Tensor:
    """A numpy array plus the bookkeeping needed for reverse-mode autodiff."""

    __slots__ = ("data", "grad", "track_grad", "_parents", "_backward")

    def __init__(self, data, track_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.track_grad = bool(track_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, track_grad={self.track_grad})"

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)


def _result(data: Array, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(data, track_grad=any(p.track_grad for p in parents))
    if out.track_grad:
        out._parents = parents
        out._backward = backward_fn
    return out


def _accumulate(t: Tensor, g: Array):
    if not t.track_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def detach(x: Tensor) -> Tensor:
    """Copy of ``x`` cut off from the recorded graph (no gradient flows back)."""
    return Tensor(x.data.copy())


def topo_order(loss: Tensor) -> list[Tensor]:
    """Nodes of the recorded graph reachable from ``loss``, parents first."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
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
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor):
    """Populate ``.grad`` on every tracked tensor reachable from ``loss``."""
    if loss.data.size != 1:
        raise ContractError(f"backward requires a scalar loss, got shape {loss.shape}")
    if not loss.track_grad:
        raise ContractError("backward on a tensor that does not track gradients")
    order = topo_order(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# primitive ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out_data = a.data @ b.data

    def bwd(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _result(out_data, (a, b), bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"add: shape mismatch {a.shape} vs {b.shape}")

    def bwd(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _result(a.data + b.data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"sub: shape mismatch {a.shape} vs {b.shape}")

    def bwd(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    return _result(a.data - b.data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mul: shape mismatch {a.shape} vs {b.shape}")

    def bwd(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return _result(a.data * b.data, (a, b), bwd)


def mul_scalar(x: Tensor, c: float) -> Tensor:
    x = as_tensor(x)
    c = float(c)

    def bwd(g):
        _accumulate(x, g * c)

    return _result(x.data * c, (x,), bwd)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """x[m,q] + b[q], broadcast over rows."""
    x, b = as_tensor(x), as_tensor(b)
    if x.data.ndim != 2 or b.data.ndim != 1 or x.shape[1] != b.shape[0]:
        raise ShapeError(f"add_bias: incompatible shapes {x.shape} and {b.shape}")

    def bwd(g):
        _accumulate(x, g)
        _accumulate(b, g.sum(axis=0))

    return _result(x.data + b.data, (x, b), bwd)


def sub_bias(x: Tensor, b: Tensor) -> Tensor:
    """x[m,q] - b[q], broadcast over rows."""
    x, b = as_tensor(x), as_tensor(b)
    if x.data.ndim != 2 or b.data.ndim != 1 or x.shape[1] != b.shape[0]:
        raise ShapeError(f"sub_bias: incompatible shapes {x.shape} and {b.shape}")

    def bwd(g):
        _accumulate(x, g)
        _accumulate(b, -g.sum(axis=0))

    return _result(x.data - b.data, (x, b), bwd)


def scale_cols(x: Tensor, s: Tensor) -> Tensor:
    """x[m,q] * s[q], each column scaled by one factor."""
    x, s = as_tensor(x), as_tensor(s)
    if x.data.ndim != 2 or s.data.ndim != 1 or x.shape[1] != s.shape[0]:
        raise ShapeError(f"scale_cols: incompatible shapes {x.shape} and {s.shape}")

    def bwd(g):
        _accumulate(x, g * s.data)
        _accumulate(s, (g * x.data).sum(axis=0))

    return _result(x.data * s.data, (x, s), bwd)


def scale_rows(x: Tensor, s: Tensor) -> Tensor:
    """x[m,q] * s[m], each row scaled by one factor."""
    x, s = as_tensor(x), as_tensor(s)
    if x.data.ndim != 2 or s.data.ndim != 1 or x.shape[0] != s.shape[0]:
        raise ShapeError(f"scale_rows: incompatible shapes {x.shape} and {s.shape}")

    def bwd(g):
        _accumulate(x, g * s.data[:, None])
        _accumulate(s, (g * x.data).sum(axis=1))

    return _result(x.data * s.data[:, None], (x, s), bwd)


def row_sumsq(x: Tensor) -> Tensor:
    """Per-row sum of squares: x[m,q] -> [m]."""
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeError(f"row_sumsq expects a matrix, got shape {x.shape}")

    def bwd(g):
        _accumulate(x, 2.0 * x.data * g[:, None])

    return _result((x.data * x.data).sum(axis=1), (x,), bwd)


def col_mean(x: Tensor) -> Tensor:
    """Per-column mean: x[m,q] -> [q]."""
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeError(f"col_mean expects a matrix, got shape {x.shape}")
    m = x.shape[0]

    def bwd(g):
        _accumulate(x, np.broadcast_to(g / m, x.data.shape).copy())

    return _result(x.data.mean(axis=0), (x,), bwd)


def pow_const(x: Tensor, p: float) -> Tensor:
    x = as_tensor(x)
    p = float(p)
    out_data = x.data**p

    def bwd(g):
        _accumulate(x, g * p * x.data ** (p - 1.0))

    return _result(out_data, (x,), bwd)


def log(x: Tensor) -> Tensor:
    x = as_tensor(x)

    def bwd(g):
        _accumulate(x, g / x.data)

    return _result(np.log(x.data), (x,), bwd)


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    # split by sign to avoid overflow in exp
    pos = x.data >= 0
    z = np.empty_like(x.data)
    z[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ex = np.exp(x.data[~pos])
    z[~pos] = ex / (1.0 + ex)

    def bwd(g):
        _accumulate(x, g * z * (1.0 - z))

    return _result(z, (x,), bwd)


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """x where x>=0, slope*x where x<0; slope is a scalar or per-last-axis."""
    x, slope = as_tensor(x), as_tensor(slope)
    if slope.size != 1 and slope.shape != (x.shape[-1],):
        raise ShapeError(f"prelu: slope shape {slope.shape} incompatible with {x.shape}")
    neg = x.data < 0
    s = slope.data if slope.size == 1 else slope.data.reshape((1,) * (x.data.ndim - 1) + (-1,))
    out_data = np.where(neg, x.data * s, x.data)

    def bwd(g):
        _accumulate(x, np.where(neg, g * s, g))
        gs = g * x.data * neg
        if slope.size == 1:
            _accumulate(slope, gs.sum().reshape(slope.shape))
        else:
            _accumulate(slope, gs.reshape(-1, x.shape[-1]).sum(axis=0))

    return _result(out_data, (x, slope), bwd)


def softmax_last(x: Tensor) -> Tensor:
    """Softmax over the last axis, max-subtracted for stability."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        _accumulate(x, y * (g - (g * y).sum(axis=-1, keepdims=True)))

    return _result(y, (x,), bwd)


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax of a matrix."""
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeError(f"softmax_rows expects a matrix, got shape {x.shape}")
    return softmax_last(x)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under row softmax."""
    logits = as_tensor(logits)
    if logits.data.ndim != 2:
        raise ShapeError(f"cross_entropy expects [m,K] logits, got {logits.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    m, k = logits.shape
    if labels.shape != (m,):
        raise ShapeError(f"cross_entropy: labels shape {labels.shape} != ({m},)")
    if labels.min() < 0 or labels.max() >= k:
        raise IndexError(f"label out of range [0,{k})")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    logp = shifted[np.arange(m), labels] - lse
    loss = -logp.mean()
    probs = np.exp(shifted - lse[:, None])

    def bwd(g):
        gl = probs.copy()
        gl[np.arange(m), labels] -= 1.0
        _accumulate(logits, gl * (g / m))

    return _result(np.asarray(loss), (logits,), bwd)


def mse(x: Tensor, y: Tensor) -> Tensor:
    """Mean squared element difference."""
    x, y = as_tensor(x), as_tensor(y)
    if x.shape != y.shape:
        raise ShapeError(f"mse: shape mismatch {x.shape} vs {y.shape}")
    diff = x.data - y.data
    n = diff.size

    def bwd(g):
        _accumulate(x, g * 2.0 * diff / n)
        _accumulate(y, g * (-2.0) * diff / n)

    return _result(np.asarray((diff * diff).mean()), (x, y), bwd)


def sum_sq(x: Tensor) -> Tensor:
    """Sum of squared elements."""
    x = as_tensor(x)

    def bwd(g):
        _accumulate(x, g * 2.0 * x.data)

    return _result(np.asarray((x.data * x.data).sum()), (x,), bwd)


def tsum(x: Tensor) -> Tensor:
    """Sum of all elements."""
    x = as_tensor(x)

    def bwd(g):
        _accumulate(x, np.broadcast_to(g, x.data.shape).copy())

    return _result(np.asarray(x.data.sum()), (x,), bwd)


def reshape(x: Tensor, shape) -> Tensor:
    x = as_tensor(x)
    shape = tuple(int(s) for s in shape)
    try:
        out_data = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot view {x.shape} as {shape}") from exc

    def bwd(g):
        _accumulate(x, g.reshape(x.data.shape))

    return _result(out_data, (x,), bwd)


def straight_through_onehot(soft: Tensor) -> Tensor:
    """One-hot argmax of the last axis on the forward pass, identity gradient.

    Discretizes a relaxed categorical sample while leaving the backward path
    of the relaxed values intact.
    """
    soft = as_tensor(soft)
    idx = soft.data.argmax(axis=-1)
    hard = np.zeros_like(soft.data)
    np.put_along_axis(hard, idx[..., None], 1.0, axis=-1)

    def bwd(g):
        _accumulate(soft, g)

    return _result(hard, (soft,), bwd)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x[m,p] @ w[p,q] + b[q]."""
    return add_bias(matmul(x, w), b)
