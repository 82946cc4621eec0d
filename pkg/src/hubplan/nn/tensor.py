"""Reverse-mode automatic differentiation over float64 numpy arrays.

A small tape-based engine. While a Tape is active, every operation records
its output node; backprop walks the tape once in reverse creation order
(creation order is already topological). With no active tape, operations
just compute values, which is what inference paths use.

Everything is float64. Shapes are at most rank 2; broadcasting is limited
to the usual (B, n) + (n,) bias pattern.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ShapeError",
    "NonFiniteError",
    "Tape",
    "Tensor",
    "parameter",
    "backprop",
    "matmul",
    "relu",
    "sigmoid",
    "tanh",
    "scale",
    "sum_all",
    "gather_rows",
    "softmax_cross_entropy",
    "bce_with_logits",
    "softmax_np",
]


class ShapeError(ValueError):
    """Operands with inconsistent shapes were rejected."""


class NonFiniteError(ValueError):
    """A value or gradient that must be finite was not."""


_ACTIVE: list["Tape"] = []


class Tape:
    """Ordered record of one forward computation.

    Nodes appear in creation order, so a single reverse sweep visits each
    node exactly once with all downstream gradients already accumulated.
    """

    def __init__(self) -> None:
        self.nodes: list[Tensor] = []

    def __enter__(self) -> "Tape":
        if _ACTIVE:
            raise RuntimeError("nested tapes are not supported")
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc) -> bool:
        _ACTIVE.pop()
        return False

    def replay(self) -> bool:
        """Recompute every recorded node from its parents.

        Returns True when every recomputed value is bit-identical to the
        stored one. Used to validate determinism of a forward pass.
        """
        for node in self.nodes:
            if node._recompute is None:
                continue
            fresh = node._recompute()
            if fresh.shape != node.data.shape or not np.array_equal(
                fresh, node.data, equal_nan=True
            ):
                return False
        return True


def _tape() -> Tape | None:
    return _ACTIVE[-1] if _ACTIVE else None


class Tensor:
    __slots__ = ("data", "grad", "parents", "requires_grad", "name", "_backward", "_recompute")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"tensor {name or ''} contains non-finite values")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.parents: tuple[Tensor, ...] = ()
        self.requires_grad = requires_grad
        self.name = name
        self._backward = None
        self._recompute = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(name={self.name!r}, shape={self.data.shape})"

    # arithmetic sugar; everything funnels into the recorded ops below
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def parameter(data, name: str) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def _wrap(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    t = Tensor.__new__(Tensor)
    t.data = np.asarray(x, dtype=np.float64)
    t.grad = None
    t.parents = ()
    t.requires_grad = False
    t.name = None
    t._backward = None
    t._recompute = None
    return t


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward, recompute) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.parents = parents
    out.requires_grad = any(p.requires_grad for p in parents)
    out.name = None
    out._backward = backward
    out._recompute = recompute
    tape = _tape()
    if tape is not None:
        tape.nodes.append(out)
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    # never mutate in place: upstream grads may alias pass-through buffers
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad = t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g, b.data.shape))

    return _node(data, (a, b), backward, lambda: a.data + b.data)


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = a.data - b.data

    def backward(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-g, b.data.shape))

    return _node(data, (a, b), backward, lambda: a.data - b.data)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(data, (a, b), backward, lambda: a.data * b.data)


def scale(a, c: float) -> Tensor:
    a = _wrap(a)
    c = float(c)
    data = a.data * c

    def backward(g):
        if a.requires_grad:
            _accum(a, g * c)

    return _node(data, (a,), backward, lambda: a.data * c)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul shapes {a.data.shape} x {b.data.shape}")
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ g)

    return _node(data, (a, b), backward, lambda: a.data @ b.data)


def relu(a) -> Tensor:
    a = _wrap(a)
    data = np.maximum(a.data, 0.0)

    def backward(g):
        if a.requires_grad:
            _accum(a, g * (a.data > 0.0))

    return _node(data, (a,), backward, lambda: np.maximum(a.data, 0.0))


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    with np.errstate(over="ignore"):
        data = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        if a.requires_grad:
            _accum(a, g * data * (1.0 - data))

    def recompute():
        with np.errstate(over="ignore"):
            return 1.0 / (1.0 + np.exp(-a.data))

    return _node(data, (a,), backward, recompute)


def tanh(a) -> Tensor:
    a = _wrap(a)
    data = np.tanh(a.data)

    def backward(g):
        if a.requires_grad:
            _accum(a, g * (1.0 - data * data))

    return _node(data, (a,), backward, lambda: np.tanh(a.data))


def sum_all(a) -> Tensor:
    a = _wrap(a)
    data = np.asarray(a.data.sum())

    def backward(g):
        if a.requires_grad:
            _accum(a, np.broadcast_to(g, a.data.shape))

    return _node(data, (a,), backward, lambda: np.asarray(a.data.sum()))


def gather_rows(table: Tensor, idx) -> Tensor:
    """Row lookup table[idx] for an int index vector; scatter-add backward."""
    idx = np.asarray(idx, dtype=np.intp)
    data = table.data[idx]

    def backward(g):
        if table.requires_grad:
            acc = np.zeros_like(table.data)
            np.add.at(acc, idx, g)
            _accum(table, acc)

    return _node(data, (table,), backward, lambda: table.data[idx])


def _masked_log_softmax_parts(x: np.ndarray):
    # rows with at least one finite entry assumed; exp(-inf) is an exact 0
    m = x.max(axis=1, keepdims=True)
    shifted = x - m
    shifted[~np.isfinite(x)] = -np.inf
    e = np.exp(shifted)
    z = e.sum(axis=1, keepdims=True)
    log_z = m + np.log(z)
    return e / z, log_z


def softmax_np(logits: np.ndarray, additive_mask: np.ndarray | None = None) -> np.ndarray:
    """Plain-numpy masked softmax for inference paths. Masked entries get exact 0."""
    x = np.asarray(logits, dtype=np.float64)
    if additive_mask is not None:
        x = x + additive_mask
    probs, _ = _masked_log_softmax_parts(x)
    return probs


def softmax_cross_entropy(
    logits: Tensor,
    target_idx,
    additive_mask: np.ndarray | None = None,
    sample_weight: np.ndarray | None = None,
    label_smoothing: float = 0.0,
) -> Tensor:
    """Weighted-mean cross-entropy of softmax(logits [+ mask]) against class ids.

    `additive_mask` holds 0 for allowed classes and -inf for disallowed ones;
    masked classes receive exactly zero probability. Label smoothing spreads
    mass only over allowed classes. `sample_weight` (per row, nonnegative)
    lets callers mask padded timesteps; loss is normalized by the weight sum.
    """
    target_idx = np.asarray(target_idx, dtype=np.intp)
    n, k = logits.data.shape
    x = logits.data if additive_mask is None else logits.data + additive_mask
    valid = np.isfinite(x)
    if not valid.any(axis=1).all():
        raise ShapeError("softmax row with every class masked")
    probs, log_z = _masked_log_softmax_parts(x)

    q = np.zeros((n, k), dtype=np.float64)
    q[np.arange(n), target_idx] = 1.0 - label_smoothing
    if label_smoothing > 0.0:
        q += valid * (label_smoothing / valid.sum(axis=1, keepdims=True))
    if not valid[np.arange(n), target_idx].all():
        raise ShapeError("target class is masked out")

    w = np.ones(n, dtype=np.float64) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    total = w.sum()
    if total <= 0.0:
        return _node(np.asarray(0.0), (logits,), lambda g: None, lambda: np.asarray(0.0))

    per_row = log_z[:, 0] - (q * np.where(valid, logits.data, 0.0)).sum(axis=1)
    data = np.asarray((per_row * w).sum() / total)

    def backward(g):
        if logits.requires_grad:
            _accum(logits, (probs - q) * (w / total)[:, None] * g)

    def recompute():
        p2, lz2 = _masked_log_softmax_parts(x)
        pr = lz2[:, 0] - (q * np.where(valid, logits.data, 0.0)).sum(axis=1)
        return np.asarray((pr * w).sum() / total)

    return _node(data, (logits,), backward, recompute)


def bce_with_logits(logits: Tensor, targets, sample_weight: np.ndarray | None = None) -> Tensor:
    """Stable elementwise binary cross-entropy, weighted-mean over rows."""
    t = np.asarray(targets, dtype=np.float64)
    x = logits.data
    n = x.shape[0]
    w = np.ones(n, dtype=np.float64) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    total = w.sum() * x.shape[1]
    if total <= 0.0:
        return _node(np.asarray(0.0), (logits,), lambda g: None, lambda: np.asarray(0.0))

    per = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
    data = np.asarray((per * w[:, None]).sum() / total)
    with np.errstate(over="ignore"):  # saturates to exactly 0 or 1
        sig = 1.0 / (1.0 + np.exp(-x))

    def backward(g):
        if logits.requires_grad:
            _accum(logits, (sig - t) * (w[:, None] / total) * g)

    def recompute():
        pr = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
        return np.asarray((pr * w[:, None]).sum() / total)

    return _node(data, (logits,), backward, recompute)


def backprop(tape: Tape, loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Gradient of a scalar loss w.r.t. every parameter reachable on the tape.

    Returns a map keyed by the parameter Tensor objects. Grad buffers on the
    tape are cleared afterwards so repeated calls never leak accumulation.
    """
    if loss.data.shape != ():
        raise ShapeError(f"loss must be scalar, got shape {loss.data.shape}")
    for node in tape.nodes:
        node.grad = None

    params: list[Tensor] = []
    seen: set[int] = set()
    for node in tape.nodes:
        for p in node.parents:
            if p.requires_grad and p._backward is None and id(p) not in seen:
                seen.add(id(p))
                params.append(p)
                p.grad = None

    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(tape.nodes):
        if node.grad is None or node._backward is None:
            continue
        node._backward(node.grad)

    grads = {p: p.grad for p in params if p.grad is not None}
    for node in tape.nodes:
        node.grad = None
    for p in params:
        p.grad = None
    return grads
