"""Minimal dense-tensor engine with reverse-mode differentiation.

A Tensor wraps a numpy array plus an optional gradient buffer and a record
of the op that produced it. backward() walks the tape in reverse
topological order. Only first-order derivatives are supported; the tape is
per-step and single-threaded.
"""

import functools
import struct

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=np.float64):
        self.data = np.asarray(data, dtype=dtype)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, scale(as_tensor(other), -1.0))

    def __rsub__(self, other):
        return add(as_tensor(other), scale(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __getitem__(self, key):
        return getitem(self, key)

    def reshape(self, *shape):
        return reshape(self, shape)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def tensor(data, requires_grad=False):
    return Tensor(data, requires_grad=requires_grad)


def _make(data, parents, backward_fn):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def _accumulate(t, g):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g, shape):
    """Sum g down to the given shape, undoing numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(x, y):
    x, y = as_tensor(x), as_tensor(y)

    def bwd(g):
        if x.requires_grad:
            _accumulate(x, _unbroadcast(g, x.shape))
        if y.requires_grad:
            _accumulate(y, _unbroadcast(g, y.shape))

    return _make(x.data + y.data, (x, y), bwd)


def mul(x, y):
    x, y = as_tensor(x), as_tensor(y)

    def bwd(g):
        if x.requires_grad:
            _accumulate(x, _unbroadcast(g * y.data, x.shape))
        if y.requires_grad:
            _accumulate(y, _unbroadcast(g * x.data, y.shape))

    return _make(x.data * y.data, (x, y), bwd)


def scale(x, c):
    x = as_tensor(x)
    c = float(c)

    def bwd(g):
        if x.requires_grad:
            _accumulate(x, g * c)

    return _make(x.data * c, (x,), bwd)


class ContractionError(ValueError):
    """Shape/index mismatch in a tensor contraction."""


def _split_spec(spec):
    lhs, rhs = spec.split("->")
    return lhs.split(","), rhs


@functools.lru_cache(maxsize=512)
def _contraction_path(spec, shapes):
    path, _ = np.einsum_path(spec, *[np.empty(s) for s in shapes], optimize=True)
    return path


def _einsum(spec, *arrays):
    """np.einsum with the contraction path cached per (spec, shapes)."""
    key = tuple(a.shape for a in arrays)
    return np.einsum(spec, *arrays, optimize=_contraction_path(spec, key))


def einsum(spec, *operands):
    """Generalized contraction; differentiable w.r.t. Tensor operands.

    Non-Tensor operands are treated as constants. Each operand's index
    string must consist of indices that also appear in the output or in
    another operand (true for every contraction used in this package).
    """
    in_specs, out_spec = _split_spec(spec)
    if len(in_specs) != len(operands):
        raise ContractionError(
            f"spec {spec!r} names {len(in_specs)} operands, got {len(operands)}"
        )
    tensors = [as_tensor(op) for op in operands]
    arrays = [t.data for t in tensors]
    for sub, arr in zip(in_specs, arrays):
        named = sub.replace("...", "")
        if len(named) > arr.ndim:
            raise ContractionError(
                f"operand with shape {arr.shape} too small for indices {sub!r}"
            )
    try:
        out = _einsum(spec, *arrays)
    except ValueError as e:
        raise ContractionError(str(e)) from e

    def bwd(g):
        for m, t in enumerate(tensors):
            if not t.requires_grad:
                continue
            others_specs = [out_spec] + [s for k, s in enumerate(in_specs) if k != m]
            others = [g] + [a for k, a in enumerate(arrays) if k != m]
            gspec = ",".join(others_specs) + "->" + in_specs[m]
            gm = _einsum(gspec, *others)
            # ellipsis batch dims may have been broadcast
            if gm.shape != t.data.shape:
                gm = _unbroadcast(gm, t.data.shape)
            _accumulate(t, gm)

    return _make(out, tuple(tensors), bwd)


def contract(x, y, spec):
    """Two-operand contraction, spec as an einsum descriptor."""
    return einsum(spec, x, y)


def relu(x):
    x = as_tensor(x)
    out = np.maximum(x.data, 0.0)

    def bwd(g):
        if x.requires_grad:
            _accumulate(x, g * (x.data > 0.0))

    return _make(out, (x,), bwd)


def sigmoid(x):
    x = as_tensor(x)
    out = np.empty_like(x.data)
    pos = x.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ex = np.exp(x.data[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bwd(g):
        if x.requires_grad:
            _accumulate(x, g * out * (1.0 - out))

    return _make(out, (x,), bwd)


class MaskedSoftmaxError(ValueError):
    """A softmax row had every position masked out."""


def softmax_masked(scores, mask, axis=-1):
    """Softmax over the unmasked positions; masked slots get exactly zero.

    mask is boolean, broadcastable to scores; a fully-masked row raises
    rather than silently returning uniform weights.
    """
    scores = as_tensor(scores)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), scores.shape)
    if not mask.any(axis=axis).all():
        raise MaskedSoftmaxError("softmax row with no allowed positions")
    neg = np.where(mask, scores.data, -np.inf)
    shifted = neg - neg.max(axis=axis, keepdims=True)
    ex = np.exp(shifted, where=mask, out=np.zeros_like(scores.data))
    out = ex / ex.sum(axis=axis, keepdims=True)

    def bwd(g):
        if scores.requires_grad:
            dot = (g * out).sum(axis=axis, keepdims=True)
            _accumulate(scores, out * (g - dot))

    return _make(out, (scores,), bwd)


def reshape(x, shape):
    x = as_tensor(x)

    def bwd(g):
        if x.requires_grad:
            _accumulate(x, g.reshape(x.shape))

    return _make(x.data.reshape(shape), (x,), bwd)


def transpose(x, axes):
    x = as_tensor(x)
    inv = np.argsort(axes)

    def bwd(g):
        if x.requires_grad:
            _accumulate(x, g.transpose(inv))

    return _make(x.data.transpose(axes), (x,), bwd)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        pieces = np.split(g, splits, axis=axis)
        for t, piece in zip(tensors, pieces):
            if t.requires_grad:
                _accumulate(t, piece)

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), bwd)


def getitem(x, key):
    x = as_tensor(x)

    def bwd(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            np.add.at(full, key, g)
            _accumulate(x, full)

    return _make(x.data[key], (x,), bwd)


def tsum(x, axis=None):
    x = as_tensor(x)

    def bwd(g):
        if x.requires_grad:
            if axis is None:
                _accumulate(x, np.broadcast_to(g, x.shape).copy())
            else:
                _accumulate(x, np.broadcast_to(np.expand_dims(g, axis), x.shape).copy())

    return _make(x.data.sum(axis=axis), (x,), bwd)


def tmean(x, axis=None):
    n = x.data.size if axis is None else x.data.shape[axis]
    return scale(tsum(x, axis=axis), 1.0 / n)


def l2_loss(pred, target):
    """Mean of squared differences, as a scalar Tensor."""
    diff = pred - as_tensor(target)
    return tmean(mul(diff, diff))


def backward(loss):
    """Populate grads of every reachable requires_grad tensor.

    Repeated calls without zeroing accumulate into existing grad buffers.
    """
    if loss.data.shape != ():
        raise ValueError("backward needs a scalar loss")
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    _accumulate(loss, np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)


class ParamStore:
    """Named parameters with Adam moment buffers and a shared step counter."""

    def __init__(self):
        self.params = {}
        self._m = {}
        self._v = {}
        self.step_count = 0

    def add(self, name, value):
        if name in self.params:
            raise ValueError(f"duplicate parameter {name!r}")
        t = Tensor(value, requires_grad=True)
        self.params[name] = t
        self._m[name] = np.zeros_like(t.data)
        self._v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name):
        return self.params[name]

    def names(self):
        return list(self.params)

    def zero_grads(self):
        for t in self.params.values():
            t.grad = None

    def count(self):
        return sum(t.data.size for t in self.params.values())


def adamw_step(store, lr, weight_decay=0.0, beta1=0.9, beta2=0.999, eps=1e-8):
    """Decoupled-weight-decay AdamW update with bias correction.

    Parameters with no gradient this step receive only the decay term.
    """
    store.step_count += 1
    t = store.step_count
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in store.params.items():
        g = p.grad
        if g is not None:
            m = store._m[name]
            v = store._v[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        p.data -= lr * weight_decay * p.data


CHECKPOINT_MAGIC = b"PGCK"
CHECKPOINT_VERSION = 1


def save_checkpoint(store, path):
    """Named-tensor container: header with names and shapes, then
    little-endian float64 buffers in declaration order."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<HI", CHECKPOINT_VERSION, len(store.params)))
        for name, p in store.params.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", p.data.ndim))
            for n in p.data.shape:
                fh.write(struct.pack("<I", n))
        for p in store.params.values():
            fh.write(p.data.astype("<f8").tobytes())


def load_checkpoint(path):
    """Read a checkpoint back into a fresh ParamStore."""
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a parameter checkpoint")
        version, count = struct.unpack("<HI", fh.read(6))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        entries = []
        for _ in range(count):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(ndim))
            entries.append((name, shape))
        store = ParamStore()
        for name, shape in entries:
            size = int(np.prod(shape)) if shape else 1
            buf = fh.read(size * 8)
            if len(buf) != size * 8:
                raise ValueError(f"{path}: truncated buffer for {name!r}")
            store.add(name, np.frombuffer(buf, dtype="<f8").reshape(shape).copy())
        return store
