"""Array-valued reverse-mode differentiation on an explicit tape.

Every primitive appends one node holding its parents and a vector-Jacobian
product closure. Values are float64 numpy arrays; operands that are not
:class:`Var` are lifted to constants, which never receive gradients.

>>> tape = Tape()
>>> u = tape.var(np.array([1.0, 2.0]))
>>> g, = tape.backward(dot(u, np.array([3.0, 4.0])), [u])
>>> g
array([3., 4.])
"""
from __future__ import annotations

import numpy as np

from ..errors import DomainError, UsageError

ARCTANH_EPS = 1e-12


class _Node:
    __slots__ = ("parents", "vjp", "requires_grad")

    def __init__(self, parents, vjp, requires_grad):
        self.parents = parents
        self.vjp = vjp
        self.requires_grad = requires_grad


class Tape:
    """Append-only record of primitive applications."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self.last_visits = 0

    def __len__(self):
        return len(self.nodes)

    def var(self, value) -> "Var":
        """Register a differentiable leaf."""
        return self._push(value, (), None, True)

    def const(self, value) -> "Var":
        return self._push(value, (), None, False)

    def _push(self, value, parents, vjp, requires_grad) -> "Var":
        value = np.asarray(value, dtype=np.float64)
        node_id = len(self.nodes)
        self.nodes.append(_Node(tuple(p.node_id for p in parents), vjp, requires_grad))
        return Var(value, self, node_id, requires_grad)

    def backward(self, out: "Var", wrt) -> list[np.ndarray]:
        """Gradients of scalar ``out`` with respect to each Var in ``wrt``.

        The tape is not mutated, so repeated calls return identical arrays.
        """
        if out.tape is not self:
            raise UsageError("output does not belong to this tape")
        if out.value.size != 1:
            raise UsageError(f"backward needs a scalar output, got shape {out.value.shape}")
        grads: dict[int, np.ndarray] = {out.node_id: np.ones_like(out.value)}
        visits = 0
        for node_id in range(out.node_id, -1, -1):
            g = grads.get(node_id)
            if g is None:
                continue
            node = self.nodes[node_id]
            visits += 1
            if node.vjp is None:
                continue
            # constant parents are skipped so their subgraphs get exactly zero
            for parent_id, pg in zip(node.parents, node.vjp(g)):
                if pg is None or not self.nodes[parent_id].requires_grad:
                    continue
                if parent_id in grads:
                    grads[parent_id] = grads[parent_id] + pg
                else:
                    grads[parent_id] = pg
        self.last_visits = visits
        result = []
        for v in wrt:
            g = grads.get(v.node_id)
            result.append(np.zeros_like(v.value) if g is None else np.array(g, dtype=np.float64))
        return result


class Var:
    """A value recorded on a tape."""

    __array_priority__ = 1000

    def __init__(self, value, tape, node_id, requires_grad):
        self.value = value
        self.tape = tape
        self.node_id = node_id
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Var(shape={self.value.shape}, id={self.node_id})"

    def __float__(self):
        return float(self.value)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return take(self, index)

    @property
    def T(self):
        return transpose(self)


def value_of(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _tape_of(*xs):
    tape = None
    for x in xs:
        if isinstance(x, Var):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise UsageError("operands live on different tapes")
    return tape


def _record(value, parents, vjp):
    """Push a node if any operand is a Var, otherwise return the bare array."""
    tape = _tape_of(*parents)
    if tape is None:
        return np.asarray(value, dtype=np.float64)
    lifted = tuple(p if isinstance(p, Var) else tape.const(p) for p in parents)
    req = any(p.requires_grad for p in lifted)
    return tape._push(value, lifted, vjp if req else None, req)


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# --- elementwise arithmetic -------------------------------------------------

def add(a, b):
    av, bv = value_of(a), value_of(b)
    return _record(av + bv, (a, b),
                   lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)))


def sub(a, b):
    av, bv = value_of(a), value_of(b)
    return _record(av - bv, (a, b),
                   lambda g: (_unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)))


def mul(a, b):
    av, bv = value_of(a), value_of(b)
    return _record(av * bv, (a, b),
                   lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def div(a, b):
    av, bv = value_of(a), value_of(b)
    out = av / bv
    return _record(out, (a, b),
                   lambda g: (_unbroadcast(g / bv, av.shape),
                              _unbroadcast(-g * out / bv, bv.shape)))


def scale(a, s: float):
    """Multiply by a fixed scalar."""
    s = float(s)
    return _record(value_of(a) * s, (a,), lambda g: (g * s,))


# --- unary ------------------------------------------------------------------

def tanh(a):
    out = np.tanh(value_of(a))
    return _record(out, (a,), lambda g: (g * (1.0 - out * out),))


def arctanh(a):
    av = value_of(a)
    if np.any(np.abs(av) > 1.0 - ARCTANH_EPS):
        raise DomainError("arctanh operand outside (-1 + eps, 1 - eps)")
    return _record(np.arctanh(av), (a,), lambda g: (g / (1.0 - av * av),))


def exp(a):
    out = np.exp(value_of(a))
    return _record(out, (a,), lambda g: (g * out,))


def log(a):
    av = value_of(a)
    if np.any(av <= 0):
        raise DomainError("log of a non-positive value")
    return _record(np.log(av), (a,), lambda g: (g / av,))


def sqrt(a):
    av = value_of(a)
    if np.any(av < 0):
        raise DomainError("sqrt of a negative value")
    out = np.sqrt(av)

    def vjp(g):
        if np.any(out == 0):
            raise DomainError("sqrt is not differentiable at 0")
        return (g / (2.0 * out),)

    return _record(out, (a,), vjp)


def relu(a):
    av = value_of(a)
    return _record(np.maximum(av, 0.0), (a,), lambda g: (g * (av > 0),))


def maximum(a, b):
    """Elementwise max of two operands; ties route the gradient to ``a``."""
    av, bv = value_of(a), value_of(b)
    first = av >= bv
    return _record(np.where(first, av, bv), (a, b),
                   lambda g: (_unbroadcast(g * first, av.shape),
                              _unbroadcast(g * ~first, bv.shape)))


max2 = maximum


def clip(a, lo=None, hi=None):
    """Clamp into ``[lo, hi]``; clamped entries pass no gradient."""
    av = value_of(a)
    out = np.clip(av, lo, hi)
    inside = out == av
    return _record(out, (a,), lambda g: (g * inside,))


# --- reductions and products ------------------------------------------------

def sum(a, axis=None, keepdims=False):  # noqa: A001
    av = value_of(a)
    out = np.sum(av, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, av.shape).copy(),)

    return _record(out, (a,), vjp)


def mean(a, axis=None, keepdims=False):
    av = value_of(a)
    n = av.size if axis is None else av.shape[axis]
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def dot(a, b, keepdims=False):
    """Inner product along the last axis."""
    av, bv = value_of(a), value_of(b)
    out = np.sum(av * bv, axis=-1, keepdims=keepdims)

    def vjp(g):
        ge = g if keepdims else g[..., None]
        return (_unbroadcast(ge * bv, av.shape), _unbroadcast(ge * av, bv.shape))

    return _record(out, (a, b), vjp)


def norm(a, keepdims=False):
    """Euclidean norm along the last axis."""
    av = value_of(a)
    out = np.sqrt(np.sum(av * av, axis=-1, keepdims=True))

    def vjp(g):
        if np.any(out == 0):
            raise DomainError("norm is not differentiable at the zero vector")
        ge = g if keepdims else g[..., None]
        return (ge * av / out,)

    return _record(out if keepdims else out[..., 0], (a,), vjp)


def matmul(a, b):
    av, bv = value_of(a), value_of(b)
    if av.ndim != 2 or bv.ndim != 2:
        raise UsageError("matmul expects two matrices")
    return _record(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def cosine_similarity(a, b):
    """Pairwise cosine between rows: ``(n, d) x (m, d) -> (n, m)``."""
    an = div(a, norm(a, keepdims=True))
    bn = div(b, norm(b, keepdims=True))
    return matmul(an, transpose(bn))


# --- shape manipulation -----------------------------------------------------

def transpose(a):
    return _record(value_of(a).T, (a,), lambda g: (g.T,))


def reshape(a, shape):
    av = value_of(a)
    return _record(av.reshape(shape), (a,), lambda g: (g.reshape(av.shape),))


def expand_dims(a, axis):
    av = value_of(a)
    return _record(np.expand_dims(av, axis), (a,), lambda g: (g.reshape(av.shape),))


def take(a, index):
    """Numpy indexing (basic or advanced); repeated indices accumulate."""
    av = value_of(a)

    def vjp(g):
        out = np.zeros_like(av)
        np.add.at(out, index, g)
        return (out,)

    return _record(av[index], (a,), vjp)


def concat(parts, axis=0):
    values = [value_of(p) for p in parts]
    sizes = np.cumsum([v.shape[axis] for v in values])[:-1]

    def vjp(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _record(np.concatenate(values, axis=axis), tuple(parts), vjp)


def logsumexp(a, axis=-1):
    """Stable ``log(sum(exp(a)))`` built from primitives; the shift is detached."""
    m = np.max(value_of(a), axis=axis, keepdims=True)
    lse = log(sum(exp(sub(a, m)), axis=axis, keepdims=True))
    return reshape(add(lse, m), np.squeeze(m, axis=axis).shape)
