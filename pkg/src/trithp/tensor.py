"""Dense f64 tensors with reverse-mode automatic differentiation.

Micrograd-style eager tape: every op builds a node holding its parents and
a closure that pushes adjoints backwards. Everything is float64; numpy does
the heavy lifting. Broadcasting follows numpy rules, with gradients summed
back down to the original shapes.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph construction (forward values only); speeds up finite
    differencing and inference."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class ShapeError(ValueError):
    pass


class InvalidMaskError(ValueError):
    pass


def _sigmoid(x):
    # tanh form is stable for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A dense float64 array participating in a gradient graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        out = Tensor(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    @staticmethod
    def as_tensor(x):
        return x if isinstance(x, Tensor) else Tensor(x)

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

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = Tensor.as_tensor(other)
        out_data = self.data + other.data

        def backward(g, a=self, b=other):
            if a.requires_grad:
                a._accum(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g, b.data.shape))

        return Tensor._make(out_data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        def backward(g, a=self):
            if a.requires_grad:
                a._accum(-g)

        return Tensor._make(-self.data, (self,), backward)

    def __sub__(self, other):
        return self + (-Tensor.as_tensor(other))

    def __rsub__(self, other):
        return Tensor.as_tensor(other) + (-self)

    def __mul__(self, other):
        other = Tensor.as_tensor(other)
        out_data = self.data * other.data

        def backward(g, a=self, b=other):
            if a.requires_grad:
                a._accum(_unbroadcast(g * b.data, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(g * a.data, b.data.shape))

        return Tensor._make(out_data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor.as_tensor(other)
        out_data = self.data / other.data

        def backward(g, a=self, b=other):
            if a.requires_grad:
                a._accum(_unbroadcast(g / b.data, a.data.shape))
            if b.requires_grad:
                b._accum(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

        return Tensor._make(out_data, (self, other), backward)

    def __rtruediv__(self, other):
        return Tensor.as_tensor(other) / self

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("only scalar exponents are supported")

        def backward(g, a=self):
            if a.requires_grad:
                a._accum(g * p * a.data ** (p - 1))

        return Tensor._make(self.data ** p, (self,), backward)

    def __matmul__(self, other):
        other = Tensor.as_tensor(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ShapeError(
                f"matmul expects 2-d operands, got {self.data.shape} and {other.data.shape}"
            )
        if self.data.shape[1] != other.data.shape[0]:
            raise ShapeError(
                f"matmul inner dimensions disagree: {self.data.shape} x {other.data.shape}"
            )
        out_data = self.data @ other.data

        def backward(g, a=self, b=other):
            if a.requires_grad:
                a._accum(g @ b.data.T)
            if b.requires_grad:
                b._accum(a.data.T @ g)

        return Tensor._make(out_data, (self, other), backward)

    @property
    def T(self):
        def backward(g, a=self):
            if a.requires_grad:
                a._accum(g.T)

        return Tensor._make(self.data.T, (self,), backward)

    def reshape(self, *shape):
        old = self.data.shape

        def backward(g, a=self):
            if a.requires_grad:
                a._accum(g.reshape(old))

        return Tensor._make(self.data.reshape(*shape), (self,), backward)

    def __getitem__(self, key):
        out_data = self.data[key]

        def backward(g, a=self, key=key):
            if a.requires_grad:
                buf = np.zeros_like(a.data)
                np.add.at(buf, key, g)
                a._accum(buf)

        return Tensor._make(out_data, (self,), backward)

    def sum(self, axis=None, keepdims=False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)

        def backward(g, a=self):
            if not a.requires_grad:
                return
            if axis is None:
                a._accum(np.full_like(a.data, g))
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                a._accum(np.broadcast_to(gg, a.data.shape).copy())

        return Tensor._make(out_data, (self,), backward)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- elementwise nonlinearities -------------------------------------------

    def log(self):
        def backward(g, a=self):
            if a.requires_grad:
                a._accum(g / a.data)

        return Tensor._make(np.log(self.data), (self,), backward)

    def exp(self):
        out_data = np.exp(self.data)

        def backward(g, a=self):
            if a.requires_grad:
                a._accum(g * out_data)

        return Tensor._make(out_data, (self,), backward)

    def relu(self):
        mask = self.data > 0  # subgradient at 0 is 0

        def backward(g, a=self):
            if a.requires_grad:
                a._accum(g * mask)

        return Tensor._make(np.where(mask, self.data, 0.0), (self,), backward)

    def softplus(self):
        out_data = np.logaddexp(0.0, self.data)

        def backward(g, a=self):
            if a.requires_grad:
                a._accum(g * _sigmoid(a.data))

        return Tensor._make(out_data, (self,), backward)

    def clip_min(self, floor):
        mask = self.data >= floor

        def backward(g, a=self):
            if a.requires_grad:
                a._accum(g * mask)

        return Tensor._make(np.where(mask, self.data, floor), (self,), backward)

    # -- backward pass --------------------------------------------------------

    def backward(self):
        if self.data.ndim != 0 and self.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {self.data.shape}")
        topo = []
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
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)


# -- structured ops -----------------------------------------------------------


def matmul(a, b):
    return Tensor.as_tensor(a) @ Tensor.as_tensor(b)


def softmax_rows(x, mask=None):
    """Row-wise softmax over unmasked entries; masked entries come out exactly 0.

    `mask` is boolean with True marking entries that participate. Each row
    must keep at least one entry.
    """
    x = Tensor.as_tensor(x)
    if mask is None:
        mask = np.ones(x.data.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.data.shape:
            raise ShapeError(f"mask shape {mask.shape} != input shape {x.data.shape}")
    if not mask.any(axis=-1).all():
        raise InvalidMaskError("softmax_rows: some row is fully masked")

    shifted = np.where(mask, x.data, -np.inf)
    row_max = shifted.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(shifted - row_max), 0.0)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def backward(g, a=x):
        if a.requires_grad:
            gy = g * out_data
            a._accum(gy - out_data * gy.sum(axis=-1, keepdims=True))

    return Tensor._make(out_data, (x,), backward)


def layer_norm(x, gain, bias, eps=1e-6):
    """Per-row standardization followed by elementwise affine."""
    x = Tensor.as_tensor(x)
    gain = Tensor.as_tensor(gain)
    bias = Tensor.as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = xhat * gain.data + bias.data

    def backward(g, a=x, gn=gain, bs=bias):
        n = a.data.shape[-1]
        if gn.requires_grad:
            gn._accum(_unbroadcast(g * xhat, gn.data.shape))
        if bs.requires_grad:
            bs._accum(_unbroadcast(g, bs.data.shape))
        if a.requires_grad:
            gx = g * gn.data
            term = gx - gx.mean(axis=-1, keepdims=True) \
                - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
            a._accum(term * inv)

    return Tensor._make(out_data, (x, gain, bias), backward)


def dropout(x, rate, rng, training):
    """Inverted dropout: survivors scaled by 1/(1-rate); identity at inference."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    x = Tensor.as_tensor(x)
    if not training or rate == 0.0:
        return x
    keep = rng.random(x.data.shape) >= rate
    scale = keep / (1.0 - rate)

    def backward(g, a=x):
        if a.requires_grad:
            a._accum(g * scale)

    return Tensor._make(x.data * scale, (x,), backward)


def concat_cols(tensors):
    """Concatenate 2-d tensors along columns."""
    tensors = [Tensor.as_tensor(t) for t in tensors]
    widths = [t.data.shape[1] for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=1)
    offsets = np.cumsum([0] + widths)

    def backward(g, ts=tensors):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                t._accum(g[:, lo:hi])

    return Tensor._make(out_data, tuple(tensors), backward)


def gather_rows(x, idx):
    """Select rows of a 2-d tensor by integer index (with repetition)."""
    x = Tensor.as_tensor(x)
    idx = np.asarray(idx, dtype=np.intp)
    out_data = x.data[idx]

    def backward(g, a=x):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            np.add.at(buf, idx, g)
            a._accum(buf)

    return Tensor._make(out_data, (x,), backward)


def take_per_row(x, cols):
    """x[i, cols[i]] for each row i of a 2-d tensor; returns a 1-d tensor."""
    x = Tensor.as_tensor(x)
    cols = np.asarray(cols, dtype=np.intp)
    rows = np.arange(x.data.shape[0])
    out_data = x.data[rows, cols]

    def backward(g, a=x):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            np.add.at(buf, (rows, cols), g)
            a._accum(buf)

    return Tensor._make(out_data, (x,), backward)


# -- gradient checking --------------------------------------------------------


def grad_check(f, params, h=1e-5, tol=1e-4, floor=1e-3):
    """Compare reverse-mode gradients of scalar f() against central differences.

    `params` is a dict name -> Tensor; f must be deterministic and close over
    them. Returns (passed, report) where report maps each name to its max
    relative error. The denominator is floored at `floor`: central differences
    at f64 carry ~eps*|f|/h of absolute noise, so gradients below the floor are
    effectively compared absolutely.
    """
    for p in params.values():
        p.zero_grad()
    loss = f()
    if not np.isfinite(loss.data):
        raise FloatingPointError("grad_check: objective is not finite")
    loss.backward()
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }

    report = {}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        ag = analytic[name].reshape(-1)
        max_err = 0.0
        for i in range(flat.size):
            orig = flat[i]
            with no_grad():
                flat[i] = orig + h
                f_plus = float(f().data)
                flat[i] = orig - h
                f_minus = float(f().data)
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * h)
            denom = max(abs(fd), abs(ag[i]), floor)
            max_err = max(max_err, abs(fd - ag[i]) / denom)
        report[name] = max_err
    passed = all(e <= tol for e in report.values())
    return passed, report
