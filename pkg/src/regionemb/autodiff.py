"""Dense float64 tensors with a minimal reverse-mode gradient tape.

Every differentiable operation in the pipeline (graph denoising, attention,
fusion, losses) is composed from the primitives in this module, so each
primitive carries its own backward rule and the whole stack can be checked
against central finite differences.

The tape is a flat list of recorded operations in execution order; backward
walks it exactly once in reverse, accumulating gradients additively wherever
a tensor fans out. Tensors recorded on a tape are treated as immutable;
parameter data is only mutated between tape lifetimes (by the optimizer).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "Gradients",
    "as_tensor",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "transpose",
    "tensor_sum",
    "exp",
    "log",
    "sigmoid",
    "clamp_min",
    "softmax",
    "soft_threshold",
    "normalize_rows",
    "concat",
    "cosine_sim",
]

_ACTIVE_TAPE: "Tape | None" = None


class Tensor:
    """A dense float64 array plus a flag marking it as a gradient target."""

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tensor_sum(self, axis=axis, keepdims=keepdims)

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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad}{tag})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Gradients:
    """Gradient lookup keyed by tensor identity."""

    def __init__(self, table: dict[int, np.ndarray], owners: list[Tensor]):
        self._table = table
        self._owners = owners  # keeps ids stable while this object lives

    def __contains__(self, t: Tensor) -> bool:
        return id(t) in self._table

    def __getitem__(self, t: Tensor) -> np.ndarray:
        return self._table[id(t)]

    def get(self, t: Tensor, default=None):
        return self._table.get(id(t), default)


class Tape:
    """Records operations so their gradients can be replayed in reverse."""

    def __init__(self):
        self._nodes: list[tuple[tuple[Tensor, ...], Tensor, object]] = []

    def __enter__(self) -> "Tape":
        global _ACTIVE_TAPE
        self._prev = _ACTIVE_TAPE
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = self._prev
        return False

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, loss: Tensor) -> Gradients:
        """Accumulate d(loss)/d(tensor) for everything reachable from loss.

        Visits each recorded operation exactly once, in reverse execution
        order; fan-out gradients accumulate additively.
        """
        if loss.data.size != 1:
            raise ValueError("backward requires a scalar loss")
        table: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        owners: list[Tensor] = [loss]
        for parents, out, backward_fn in reversed(self._nodes):
            g_out = table.get(id(out))
            if g_out is None:
                continue
            parent_grads = backward_fn(g_out)
            for parent, g in zip(parents, parent_grads):
                if g is None or not parent.requires_grad:
                    continue
                g = np.asarray(g, dtype=np.float64).reshape(parent.data.shape)
                key = id(parent)
                if key in table:
                    table[key] = table[key] + g
                else:
                    table[key] = g
                    owners.append(parent)
        return Gradients(table, owners)


def _record(out_data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    needs = _ACTIVE_TAPE is not None and any(p.requires_grad for p in parents)
    out = Tensor(out_data, requires_grad=needs)
    if needs:
        _ACTIVE_TAPE._nodes.append((parents, out, backward_fn))
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcasted gradient back down to the operand's shape."""
    for _ in range(grad.ndim - len(shape)):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def backward(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape))

    return _record(out, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def backward(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape))

    return _record(out, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def backward(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _record(out, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def backward(g):
        return (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        )

    return _record(out, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        return (-g,)

    return _record(-a.data, (a,), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(
            f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def backward(g):
        return (g @ b.data.T, a.data.T @ g)

    return _record(out, (a, b), backward)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ValueError("transpose expects a 2-D tensor")

    def backward(g):
        return (g.T,)

    return _record(a.data.T, (a,), backward)


def tensor_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape),)

    return _record(out, (a,), backward)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)

    def backward(g):
        return (g * out,)

    return _record(out, (a,), backward)


def log(a) -> Tensor:
    a = as_tensor(a)
    if not (a.data > 0).all():
        raise ValueError("log requires strictly positive input")
    out = np.log(a.data)

    def backward(g):
        return (g / a.data,)

    return _record(out, (a,), backward)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # exp(-|x|) keeps both branches overflow-free
    e = np.exp(-np.abs(a.data))
    out = np.where(a.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def backward(g):
        return (g * out * (1.0 - out),)

    return _record(out, (a,), backward)


def clamp_min(a, floor: float) -> Tensor:
    """Elementwise max(a, floor); gradient passes only where a >= floor."""
    a = as_tensor(a)
    out = np.maximum(a.data, floor)
    mask = a.data >= floor

    def backward(g):
        return (g * mask,)

    return _record(out, (a,), backward)


def softmax(a, axis: int = -1) -> Tensor:
    """Max-shifted softmax along one axis; rows sum to 1."""
    a = as_tensor(a)
    d = a.data
    if d.size == 0:
        raise ValueError("softmax of an empty input")
    if np.isnan(d).any():
        raise ValueError("softmax of NaN input")
    shifted = d - d.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _record(out, (a,), backward)


def soft_threshold(x, threshold) -> Tensor:
    """Shrink toward zero: x-t above t, x+t below -t, 0 inside the band.

    The input gradient is 1 outside the band and 0 inside; the threshold
    gradient is -sign(x) outside the band and 0 inside. The threshold must be
    a non-negative scalar.
    """
    x, t = as_tensor(x), as_tensor(threshold)
    if t.data.size != 1:
        raise ValueError("soft_threshold expects a scalar threshold")
    tv = float(t.data)
    if tv < 0:
        raise ValueError(f"soft_threshold requires a non-negative threshold, got {tv}")
    d = x.data
    out = np.where(d > tv, d - tv, np.where(d < -tv, d + tv, 0.0))
    outside = np.abs(d) > tv
    sgn = np.sign(d)

    def backward(g):
        gx = g * outside
        gt = -(g * sgn * outside).sum()
        return (gx, np.asarray(gt))

    return _record(out, (x, t), backward)


def normalize_rows(a) -> Tensor:
    """Scale each row to unit l2 norm; all-zero rows stay zero."""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ValueError("normalize_rows expects a 2-D tensor")
    norms = np.sqrt((a.data * a.data).sum(axis=1, keepdims=True))
    safe = np.where(norms > 0, norms, 1.0)
    u = np.where(norms > 0, a.data / safe, 0.0)

    def backward(g):
        inner = (g * u).sum(axis=1, keepdims=True)
        gx = (g - inner * u) / safe
        return (np.where(norms > 0, gx, 0.0),)

    return _record(u, (a,), backward)


def concat(tensors, axis: int = 1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("concat of an empty list")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    offsets = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, offsets, axis=axis))

    return _record(out, tuple(tensors), backward)


def cosine_sim(a, b) -> float:
    """Cosine similarity of two equal-length vectors; 0 if either is zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("cosine_sim expects 1-D vectors")
    if a.shape != b.shape:
        raise ValueError(f"cosine_sim length mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = np.sqrt(a @ a)
    nb = np.sqrt(b @ b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float((a @ b) / (na * nb))
