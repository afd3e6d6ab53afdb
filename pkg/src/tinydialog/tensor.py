"""Minimal reverse-mode automatic differentiation on float64 numpy buffers.

Everything the dialog models need and nothing more: a `Tensor` wrapping a
row-major float64 array, a dynamic `Tape` rebuilt on every forward pass, and
a closed set of differentiable operations.  Gradients are checked against
central finite differences via `check_gradients`.

Design notes:
  * 64-bit floats throughout; desk scale favors testability over speed.
  * The tape records operations in execution order, which is already a
    topological order (parents are computed before children), so the
    backward pass is a single reversed sweep visiting each node once.
  * No broadcasting beyond the specialized ops that need it
    (`add_rowvec`, `mul_rowvec`, `scale_rows`).
"""

from __future__ import annotations

import json
from typing import Callable, Iterable, Sequence

import numpy as np

CHECKPOINT_FORMAT = "tinydialog-params"
CHECKPOINT_VERSION = 1


class ShapeError(ValueError):
    """Raised when operand shapes do not fit an operation's contract."""


class Tensor:
    """Dense multi-dimensional float64 value, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @classmethod
    def _wrap(cls, arr: np.ndarray, requires_grad: bool = False) -> "Tensor":
        # Fast path for op outputs: arr is already a fresh float64 array.
        t = object.__new__(cls)
        t.data = arr
        t.requires_grad = requires_grad
        t.grad = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def tolist(self):
        return self.data.tolist()

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # Operator sugar; the named functions below are the primary API.
    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return add_scalar(self, float(other))

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return sub(self, other)
        return add_scalar(self, -float(other))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    def __rmul__(self, other):
        return scale(self, float(other))

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Ordered record of one forward pass.

    Each entry is ``(out, backward_fn)`` where ``backward_fn(out_grad)``
    accumulates gradients into the parents.  Entries appear in execution
    order, so every node comes after all of its parents.
    """

    __slots__ = ("entries",)

    def __init__(self):
        self.entries: list[tuple[Tensor, Callable[[np.ndarray], None]]] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self
        return False

    def __len__(self) -> int:
        return len(self.entries)


_TAPE_STACK: list[Tape] = []


def _record(out: Tensor, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    if _TAPE_STACK:
        for p in parents:
            if p.requires_grad:
                out.requires_grad = True
                _TAPE_STACK[-1].entries.append((out, backward_fn))
                break
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        # Always copy: `g` may be the consumer's grad buffer or a view,
        # and two parents must never share one accumulator.
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad += g


def backward(root: Tensor, tape: Tape | None = None) -> None:
    """Run the reverse sweep from a scalar root over the active tape."""
    if tape is None:
        if not _TAPE_STACK:
            raise RuntimeError("backward() called with no active tape")
        tape = _TAPE_STACK[-1]
    if root.data.size != 1:
        raise ValueError(f"backward root must be scalar, got shape {root.data.shape}")
    root.grad = np.ones_like(root.data)
    for out, fn in reversed(tape.entries):
        g = out.grad
        if g is None:
            continue
        fn(g)


# ---------------------------------------------------------------------------
# elementwise and structural ops
# ---------------------------------------------------------------------------


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{op}: shapes {a.data.shape} and {b.data.shape} differ")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    out = Tensor._wrap(a.data + b.data)

    def bw(g):
        _accum(a, g)
        _accum(b, g)

    return _record(out, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    out = Tensor._wrap(a.data - b.data)

    def bw(g):
        _accum(a, g)
        _accum(b, -g)

    return _record(out, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    out = Tensor._wrap(a.data * b.data)

    def bw(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _record(out, (a, b), bw)


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor._wrap(a.data * c)

    def bw(g):
        _accum(a, g * c)

    return _record(out, (a,), bw)


def add_scalar(a: Tensor, c: float) -> Tensor:
    out = Tensor._wrap(a.data + c)

    def bw(g):
        _accum(a, g)

    return _record(out, (a,), bw)


def add_rowvec(m: Tensor, v: Tensor) -> Tensor:
    """[r x c] + [c], the bias-add broadcast over rows."""
    if m.data.ndim != 2 or v.data.ndim != 1 or m.data.shape[1] != v.data.shape[0]:
        raise ShapeError(f"add_rowvec: shapes {m.data.shape} and {v.data.shape}")
    out = Tensor._wrap(m.data + v.data[None, :])

    def bw(g):
        _accum(m, g)
        _accum(v, g.sum(axis=0))

    return _record(out, (m, v), bw)


def mul_rowvec(m: Tensor, v: Tensor) -> Tensor:
    """[r x c] * [c], per-column gain applied to every row."""
    if m.data.ndim != 2 or v.data.ndim != 1 or m.data.shape[1] != v.data.shape[0]:
        raise ShapeError(f"mul_rowvec: shapes {m.data.shape} and {v.data.shape}")
    out = Tensor._wrap(m.data * v.data[None, :])

    def bw(g):
        _accum(m, g * v.data[None, :])
        _accum(v, (g * m.data).sum(axis=0))

    return _record(out, (m, v), bw)


def scale_rows(m: Tensor, col: Tensor) -> Tensor:
    """[r x c] * [r], per-row scalar gain (used for sequence masking)."""
    if m.data.ndim != 2 or col.data.ndim != 1 or m.data.shape[0] != col.data.shape[0]:
        raise ShapeError(f"scale_rows: shapes {m.data.shape} and {col.data.shape}")
    out = Tensor._wrap(m.data * col.data[:, None])

    def bw(g):
        _accum(m, g * col.data[:, None])
        _accum(col, (g * m.data).sum(axis=1))

    return _record(out, (m, col), bw)


def mul_by_scalar_tensor(a: Tensor, s: Tensor) -> Tensor:
    """Scale `a` by a scalar-shaped tensor (the scalar keeps its gradient)."""
    if s.data.size != 1:
        raise ShapeError(f"mul_by_scalar_tensor: scalar operand has shape {s.data.shape}")
    sv = float(s.data.reshape(-1)[0])
    out = Tensor._wrap(a.data * sv)

    def bw(g):
        _accum(a, g * sv)
        _accum(s, np.asarray((g * a.data).sum()).reshape(s.data.shape))

    return _record(out, (a, s), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for 2-D x 2-D, 1-D x 2-D and 2-D x 1-D operands."""
    ad, bd = a.data, b.data
    if ad.ndim == 2 and bd.ndim == 2:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: shapes {ad.shape} and {bd.shape} do not align")
        out = Tensor._wrap(ad @ bd)

        def bw(g):
            _accum(a, g @ bd.T)
            _accum(b, ad.T @ g)

    elif ad.ndim == 1 and bd.ndim == 2:
        if ad.shape[0] != bd.shape[0]:
            raise ShapeError(f"matmul: shapes {ad.shape} and {bd.shape} do not align")
        out = Tensor._wrap(ad @ bd)

        def bw(g):
            _accum(a, bd @ g)
            _accum(b, np.outer(ad, g))

    elif ad.ndim == 2 and bd.ndim == 1:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: shapes {ad.shape} and {bd.shape} do not align")
        out = Tensor._wrap(ad @ bd)

        def bw(g):
            _accum(a, np.outer(g, bd))
            _accum(b, ad.T @ g)

    else:
        raise ShapeError(f"matmul: unsupported ranks {ad.shape} x {bd.shape}")
    return _record(out, (a, b), bw)


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 1 or b.data.ndim != 1 or a.data.shape != b.data.shape:
        raise ShapeError(f"dot: shapes {a.data.shape} and {b.data.shape}")
    out = Tensor._wrap(np.asarray(a.data @ b.data))

    def bw(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _record(out, (a, b), bw)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ShapeError("concat: empty input list")
    datas = [p.data for p in parts]
    out = Tensor._wrap(np.concatenate(datas, axis=axis))
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                _accum(p, g[tuple(idx)])

    return _record(out, tuple(parts), bw)


def slice_last(t: Tensor, start: int, stop: int) -> Tensor:
    """Slice along the last axis (columns of a matrix, entries of a vector)."""
    out = Tensor._wrap(np.ascontiguousarray(t.data[..., start:stop]))

    def bw(g):
        if t.requires_grad:
            full = np.zeros_like(t.data)
            full[..., start:stop] = g
            _accum(t, full)

    return _record(out, (t,), bw)


def slice_rows(m: Tensor, start: int, stop: int) -> Tensor:
    if m.data.ndim != 2:
        raise ShapeError(f"slice_rows: expected matrix, got shape {m.data.shape}")
    out = Tensor._wrap(np.ascontiguousarray(m.data[start:stop]))

    def bw(g):
        if m.requires_grad:
            full = np.zeros_like(m.data)
            full[start:stop] = g
            _accum(m, full)

    return _record(out, (m,), bw)


def transpose(t: Tensor) -> Tensor:
    """Matrix transpose: [r x c] -> [c x r]."""
    if t.data.ndim != 2:
        raise ShapeError(f"transpose: expected matrix, got {t.data.shape}")
    out = Tensor._wrap(t.data.T.copy())

    def bw(g):
        _accum(t, g.T)

    return _record(out, (t,), bw)


def reshape(t: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor._wrap(t.data.reshape(shape))

    def bw(g):
        _accum(t, g.reshape(t.data.shape))

    return _record(out, (t,), bw)


def row(m: Tensor, i: int) -> Tensor:
    """Embedding-row lookup: row `i` of a matrix as a 1-D tensor."""
    if m.data.ndim != 2:
        raise ShapeError(f"row: expected matrix, got shape {m.data.shape}")
    out = Tensor._wrap(m.data[i].copy())

    def bw(g):
        if m.requires_grad:
            full = np.zeros_like(m.data)
            full[i] = g
            _accum(m, full)

    return _record(out, (m,), bw)


def rows(m: Tensor, idx: Sequence[int]) -> Tensor:
    """Gather rows of a matrix; repeated indices sum their gradients."""
    if m.data.ndim != 2:
        raise ShapeError(f"rows: expected matrix, got shape {m.data.shape}")
    index = np.asarray(idx, dtype=np.intp)
    out = Tensor._wrap(m.data[index])

    def bw(g):
        if m.requires_grad:
            full = np.zeros_like(m.data)
            np.add.at(full, index, g)
            _accum(m, full)

    return _record(out, (m,), bw)


def stack_rows(parts: Sequence[Tensor]) -> Tensor:
    """Stack 1-D tensors of equal length into a matrix, one per row."""
    if not parts:
        raise ShapeError("stack_rows: empty input list")
    for p in parts:
        if p.data.ndim != 1:
            raise ShapeError(f"stack_rows: expected vectors, got shape {p.data.shape}")
    out = Tensor._wrap(np.stack([p.data for p in parts]))

    def bw(g):
        for i, p in enumerate(parts):
            _accum(p, g[i])

    return _record(out, tuple(parts), bw)


# ---------------------------------------------------------------------------
# nonlinearities and reductions
# ---------------------------------------------------------------------------


def sigmoid(t: Tensor) -> Tensor:
    x = t.data
    out_data = np.empty_like(x)
    np.exp(-np.abs(x), out=out_data)
    pos = x >= 0
    out_data[pos] = 1.0 / (1.0 + out_data[pos])
    neg = ~pos
    out_data[neg] = out_data[neg] / (1.0 + out_data[neg])
    out = Tensor._wrap(out_data)

    def bw(g):
        _accum(t, g * out_data * (1.0 - out_data))

    return _record(out, (t,), bw)


def tanh(t: Tensor) -> Tensor:
    out_data = np.tanh(t.data)
    out = Tensor._wrap(out_data)

    def bw(g):
        _accum(t, g * (1.0 - out_data * out_data))

    return _record(out, (t,), bw)


def relu(t: Tensor) -> Tensor:
    out_data = np.maximum(t.data, 0.0)
    out = Tensor._wrap(out_data)

    def bw(g):
        # Subgradient 0 at the kink: a satisfied hinge contributes nothing.
        _accum(t, g * (t.data > 0.0))

    return _record(out, (t,), bw)


def power(t: Tensor, p: float) -> Tensor:
    """Elementwise power for non-negative inputs (attention sharpening)."""
    out_data = np.power(t.data, p)
    out = Tensor._wrap(out_data)

    def bw(g):
        _accum(t, g * p * np.power(t.data, p - 1.0))

    return _record(out, (t,), bw)


def normalize_sum(t: Tensor) -> Tensor:
    """Divide a non-negative vector by its sum (no-op gradient-safe renorm)."""
    s = float(t.data.sum())
    if s <= 0.0:
        raise ValueError("normalize_sum: entries must sum to a positive value")
    out_data = t.data / s
    out = Tensor._wrap(out_data)

    def bw(g):
        _accum(t, (g - (g * out_data).sum()) / s)

    return _record(out, (t,), bw)


def softmax(t: Tensor) -> Tensor:
    """Stable softmax of a 1-D tensor (max-subtraction before exp)."""
    if t.data.ndim != 1 or t.data.size == 0:
        raise ValueError(f"softmax: expected non-empty vector, got shape {t.data.shape}")
    z = t.data - t.data.max()
    e = np.exp(z)
    out_data = e / e.sum()
    out = Tensor._wrap(out_data)

    def bw(g):
        _accum(t, out_data * (g - (g * out_data).sum()))

    return _record(out, (t,), bw)


def softmax_rows(m: Tensor) -> Tensor:
    """Row-wise stable softmax of a matrix."""
    if m.data.ndim != 2 or m.data.shape[1] == 0:
        raise ValueError(f"softmax_rows: expected matrix with columns, got {m.data.shape}")
    z = m.data - m.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    out_data = e / e.sum(axis=1, keepdims=True)
    out = Tensor._wrap(out_data)

    def bw(g):
        _accum(m, out_data * (g - (g * out_data).sum(axis=1, keepdims=True)))

    return _record(out, (m,), bw)


def sum_all(t: Tensor) -> Tensor:
    out = Tensor._wrap(np.asarray(t.data.sum()))

    def bw(g):
        _accum(t, np.broadcast_to(g, t.data.shape))

    return _record(out, (t,), bw)


def mean(t: Tensor) -> Tensor:
    n = t.data.size
    out = Tensor._wrap(np.asarray(t.data.mean()))

    def bw(g):
        _accum(t, np.broadcast_to(g / n, t.data.shape))

    return _record(out, (t,), bw)


def mean_rows(m: Tensor) -> Tensor:
    """Column means of a matrix: [r x c] -> [c]."""
    if m.data.ndim != 2 or m.data.shape[0] == 0:
        raise ShapeError(f"mean_rows: expected non-empty matrix, got {m.data.shape}")
    r = m.data.shape[0]
    out = Tensor._wrap(m.data.mean(axis=0))

    def bw(g):
        _accum(m, np.broadcast_to(g / r, m.data.shape))

    return _record(out, (m,), bw)


def layer_norm_rows(m: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each row to zero mean and unit variance."""
    if m.data.ndim != 2:
        raise ShapeError(f"layer_norm_rows: expected matrix, got {m.data.shape}")
    mu = m.data.mean(axis=1, keepdims=True)
    var = m.data.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = (m.data - mu) * inv
    out = Tensor._wrap(y)

    def bw(g):
        gm = g.mean(axis=1, keepdims=True)
        gy = (g * y).mean(axis=1, keepdims=True)
        _accum(m, inv * (g - gm - y * gy))

    return _record(out, (m,), bw)


# ---------------------------------------------------------------------------
# similarity and fusion ops
# ---------------------------------------------------------------------------


def outer(u: Tensor, s: Tensor) -> Tensor:
    """All pairwise products of two vectors: result[i][j] = u[i] * s[j]."""
    if u.data.ndim != 1 or s.data.ndim != 1:
        raise ShapeError(f"outer: expected vectors, got {u.data.shape} and {s.data.shape}")
    if u.data.size == 0 or s.data.size == 0:
        raise ShapeError("outer: vectors must be non-empty")
    out = Tensor._wrap(np.outer(u.data, s.data))

    def bw(g):
        _accum(u, g @ s.data)
        _accum(s, g.T @ u.data)

    return _record(out, (u, s), bw)


def rowwise_outer(u: Tensor, s: Tensor) -> Tensor:
    """Per-row outer products, flattened row-major: [t x p],[t x q] -> [t x p*q].

    Row i is ``flatten(u[i] (x) s[i])`` with the (u index, s index) pair in
    row-major order, i.e. entry (i, a*q + b) = u[i,a] * s[i,b].  This order
    is frozen; checkpoints depend on it.
    """
    ud, sd = u.data, s.data
    if ud.ndim != 2 or sd.ndim != 2 or ud.shape[0] != sd.shape[0]:
        raise ShapeError(f"rowwise_outer: shapes {ud.shape} and {sd.shape}")
    t, p = ud.shape
    q = sd.shape[1]
    out = Tensor._wrap((ud[:, :, None] * sd[:, None, :]).reshape(t, p * q))

    def bw(g):
        g3 = g.reshape(t, p, q)
        _accum(u, np.einsum("tpq,tq->tp", g3, sd))
        _accum(s, np.einsum("tpq,tp->tq", g3, ud))

    return _record(out, (u, s), bw)


def append_ones_col(m: Tensor) -> Tensor:
    """[t x d] -> [t x d+1] with a constant 1 appended to every row."""
    if m.data.ndim != 2:
        raise ShapeError(f"append_ones_col: expected matrix, got {m.data.shape}")
    t = m.data.shape[0]
    out = Tensor._wrap(np.concatenate([m.data, np.ones((t, 1))], axis=1))

    def bw(g):
        _accum(m, g[:, :-1])

    return _record(out, (m,), bw)


def cosine_similarity(a: Tensor, b: Tensor) -> Tensor:
    """Cosine of two vectors in [-1, 1]; zero-norm operands yield 0.0.

    The zero-norm convention avoids NaN propagation in early training; the
    gradient there is taken as zero.
    """
    if a.data.ndim != 1 or b.data.ndim != 1 or a.data.shape != b.data.shape:
        raise ShapeError(f"cosine_similarity: shapes {a.data.shape} and {b.data.shape}")
    na = float(np.linalg.norm(a.data))
    nb = float(np.linalg.norm(b.data))
    if na == 0.0 or nb == 0.0:
        return Tensor._wrap(np.asarray(0.0))
    denom = na * nb
    cos = float(a.data @ b.data) / denom
    out = Tensor._wrap(np.asarray(cos))

    def bw(g):
        gg = float(g)
        _accum(a, gg * (b.data / denom - cos * a.data / (na * na)))
        _accum(b, gg * (a.data / denom - cos * b.data / (nb * nb)))

    return _record(out, (a, b), bw)


def cosine_rows(v: Tensor, m: Tensor) -> Tensor:
    """Cosine of a vector against every row of a matrix: [d],[r x d] -> [r]."""
    if v.data.ndim != 1 or m.data.ndim != 2 or m.data.shape[1] != v.data.shape[0]:
        raise ShapeError(f"cosine_rows: shapes {v.data.shape} and {m.data.shape}")
    nv = float(np.linalg.norm(v.data))
    rn = np.linalg.norm(m.data, axis=1)
    denom = nv * rn
    ok = denom > 0.0
    sims = np.zeros(m.data.shape[0])
    np.divide(m.data @ v.data, denom, out=sims, where=ok)
    out = Tensor._wrap(sims)

    def bw(g):
        ge = np.where(ok, g / np.where(ok, denom, 1.0), 0.0)
        if v.requires_grad:
            dv = m.data.T @ ge
            if nv > 0.0:
                dv -= (np.where(ok, g * sims, 0.0).sum() / (nv * nv)) * v.data
            _accum(v, dv)
        if m.requires_grad:
            dm = ge[:, None] * v.data[None, :]
            rn2 = np.where(rn > 0.0, rn * rn, 1.0)
            dm -= (np.where(ok, g * sims, 0.0) / rn2)[:, None] * m.data
            _accum(m, dm)

    return _record(out, (v, m), bw)


def cosine_matrix(a: Tensor, b: Tensor) -> Tensor:
    """All-pairs row cosines: [r x d], [s x d] -> [r x s].

    Zero-norm rows on either side produce 0.0 similarities with zero
    gradient, like the vector case.
    """
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[1]:
        raise ShapeError(f"cosine_matrix: shapes {a.data.shape} and {b.data.shape}")
    na = np.linalg.norm(a.data, axis=1)
    nb = np.linalg.norm(b.data, axis=1)
    denom = na[:, None] * nb[None, :]
    ok = denom > 0.0
    sims = np.zeros((a.data.shape[0], b.data.shape[0]))
    np.divide(a.data @ b.data.T, denom, out=sims, where=ok)
    out = Tensor._wrap(sims)

    def bw(g):
        ge = np.where(ok, g / np.where(ok, denom, 1.0), 0.0)
        gs = np.where(ok, g * sims, 0.0)
        if a.requires_grad:
            na2 = np.where(na > 0.0, na * na, 1.0)
            _accum(a, ge @ b.data - (gs.sum(axis=1) / na2)[:, None] * a.data)
        if b.requires_grad:
            nb2 = np.where(nb > 0.0, nb * nb, 1.0)
            _accum(b, ge.T @ a.data - (gs.sum(axis=0) / nb2)[:, None] * b.data)

    return _record(out, (a, b), bw)


def cosine_pairs(a: Tensor, b: Tensor) -> Tensor:
    """Row-paired cosines of two equally shaped matrices: [r x d] x2 -> [r]."""
    if a.data.ndim != 2 or a.data.shape != b.data.shape:
        raise ShapeError(f"cosine_pairs: shapes {a.data.shape} and {b.data.shape}")
    na = np.linalg.norm(a.data, axis=1)
    nb = np.linalg.norm(b.data, axis=1)
    denom = na * nb
    ok = denom > 0.0
    sims = np.zeros(a.data.shape[0])
    np.divide((a.data * b.data).sum(axis=1), denom, out=sims, where=ok)
    out = Tensor._wrap(sims)

    def bw(g):
        ge = np.where(ok, g / np.where(ok, denom, 1.0), 0.0)
        gs = np.where(ok, g * sims, 0.0)
        if a.requires_grad:
            na2 = np.where(na > 0.0, na * na, 1.0)
            _accum(a, ge[:, None] * b.data - (gs / na2)[:, None] * a.data)
        if b.requires_grad:
            nb2 = np.where(nb > 0.0, nb * nb, 1.0)
            _accum(b, ge[:, None] * a.data - (gs / nb2)[:, None] * b.data)

    return _record(out, (a, b), bw)


# ---------------------------------------------------------------------------
# initialization, optimizer, gradient checking, checkpoints
# ---------------------------------------------------------------------------


def xavier_uniform(rng: np.random.Generator, rows: int, cols: int) -> Tensor:
    """Xavier-uniform parameter matrix; the caller threads the seeded rng."""
    limit = np.sqrt(6.0 / (rows + cols))
    return Tensor(rng.uniform(-limit, limit, size=(rows, cols)), requires_grad=True)


def zeros_param(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


class Adam:
    """Adam optimizer over a named parameter dict (insertion order is fixed)."""

    def __init__(self, params: dict[str, Tensor], lr: float = 0.01,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self._v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for k, p in self.params.items():
            if p.grad is None:
                continue
            m = self._m[k]
            v = self._v[k]
            m *= b1
            m += (1.0 - b1) * p.grad
            v *= b2
            v += (1.0 - b2) * (p.grad * p.grad)
            p.data -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def check_gradients(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-3) -> float:
    """Max relative error between analytic and central-difference gradients.

    Error per coordinate is |analytic - numeric| / max(1, |analytic|).  `f`
    must be scalar-valued; other tensors captured by `f` are left untouched
    except for possibly stale `.grad` buffers.
    """
    if eps <= 0:
        raise ValueError("check_gradients: eps must be positive")
    was = x.requires_grad
    x.requires_grad = True
    x.grad = None
    try:
        with Tape() as tape:
            out = f(x)
            if out.data.size != 1:
                raise ValueError(f"check_gradients: f must be scalar-valued, got {out.data.shape}")
            backward(out, tape)
        analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()
        numeric = np.zeros_like(x.data)
        flat = x.data.reshape(-1)
        nflat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(f(x).data.reshape(-1)[0])
            flat[i] = orig - eps
            lo = float(f(x).data.reshape(-1)[0])
            flat[i] = orig
            nflat[i] = (hi - lo) / (2.0 * eps)
        rel = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
        return float(rel.max()) if rel.size else 0.0
    finally:
        x.requires_grad = was
        x.grad = None


def save_checkpoint(path, params: dict[str, Tensor], meta: dict | None = None) -> None:
    """Write a versioned JSON container of named (shape, row-major data) arrays.

    Float round-tripping through repr is bit-exact, and the serialization is
    fully deterministic (sorted keys, fixed separators, no timestamps).
    """
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "meta": meta or {},
        "params": {
            name: {"shape": list(p.data.shape), "data": p.data.reshape(-1).tolist()}
            for name, p in params.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path) -> tuple[dict[str, Tensor], dict]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a parameter checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    params = {}
    for name, entry in doc["params"].items():
        arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        params[name] = Tensor(arr, requires_grad=True)
    return params, doc.get("meta", {})
