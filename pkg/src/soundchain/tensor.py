"""Reverse-mode automatic differentiation over numpy arrays.

Only the operators a 1D convolutional GAN needs are provided. Every operator
is differentiable in all of its tensor arguments, so graphs that themselves
contain weight tensors (such as the critic's input-gradient network used by
the gradient penalty) can be differentiated once more.

A graph may be walked by :func:`backward` exactly once.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import GraphConsumed, NotScalar, ShapeError

CHECKPOINT_FORMAT = "soundchain-tensors"
CHECKPOINT_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


class Tensor:
    """An array plus the bookkeeping needed to backpropagate into it."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind not in "fc":
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._parents = ()
        self._backward = None
        self._consumed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag}, requires_grad={self.requires_grad})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_lift(other, self), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _lift(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.full(like.shape, x, dtype=like.dtype))


def _node(data, parents, backward) -> Tensor:
    """Wrap an op result; ``backward(g)`` returns one gradient (or None) per parent."""
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _same_shape(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


# ---- elementwise ------------------------------------------------------------

def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = _lift(b, a)
    _same_shape(a, b, "add")
    return _node(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    a = as_tensor(a)
    b = _lift(b, a)
    _same_shape(a, b, "sub")
    return _node(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b) -> Tensor:
    """Elementwise product; a Python scalar ``b`` scales ``a``."""
    a = as_tensor(a)
    if not isinstance(b, Tensor) and np.ndim(b) == 0:
        return scale(a, float(b))
    b = as_tensor(b)
    _same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return _node(ad * bd, (a, b), lambda g: (g * bd, g * ad))


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    return _node(a.data * c, (a,), lambda g: (g * c,))


def square(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _node(ad * ad, (a,), lambda g: (2.0 * g * ad,))


def sqrt(a) -> Tensor:
    """Square root whose derivative at 0 is taken as 0 rather than infinity.

    A zero argument only arises here as a sum of squares whose every term is
    zero, where 0 is the correct subgradient of the resulting norm.
    """
    a = as_tensor(a)
    if np.any(a.data < 0):
        raise ValueError("sqrt of a negative value")
    out = np.sqrt(a.data)

    def back(g):
        d = np.zeros_like(out)
        np.divide(0.5 * g, out, out=d, where=out > 0)
        return (d,)

    return _node(out, (a,), back)


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return _node(np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,))


def leaky_relu(x, slope=0.2) -> Tensor:
    x = as_tensor(x)
    factor = leaky_relu_slopes(x.data, slope)
    return _node(x.data * factor, (x,), lambda g: (g * factor,))


def leaky_relu_slopes(data, slope=0.2):
    """Local derivative of leaky ReLU: 1 where ``data > 0`` else ``slope``."""
    return np.where(data > 0, 1.0, slope).astype(data.dtype)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return _node(out, (x,), lambda g: (g * (1.0 - out * out),))


def mul_const(x, arr) -> Tensor:
    """Multiply by a fixed (non-differentiable) array of the same shape."""
    x = as_tensor(x)
    arr = np.asarray(arr, dtype=x.dtype)
    if arr.shape != x.shape:
        raise ShapeError(f"mul_const: shapes {x.shape} and {arr.shape} differ")
    return _node(x.data * arr, (x,), lambda g: (g * arr,))


# ---- reductions and reshaping -----------------------------------------------

def sum(x, axis=None) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    shape = x.shape

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, shape).astype(x.dtype, copy=True),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).astype(x.dtype, copy=True),)

    return _node(np.sum(x.data, axis=axis), (x,), back)


def mean(x, axis=None) -> Tensor:
    x = as_tensor(x)
    n = x.data.size if axis is None else x.shape[axis]
    return scale(sum(x, axis), 1.0 / n)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    old = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    return _node(out, (x,), lambda g: (g.reshape(old),))


def transpose(x) -> Tensor:
    """Swap the two axes of a matrix."""
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeError("transpose expects a matrix")
    return _node(x.data.T.copy(), (x,), lambda g: (g.T.copy(),))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    ad, bd = a.data, b.data
    return _node(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def add_bias(x, b) -> Tensor:
    """Add ``b[c]`` along axis 1 of ``x`` (``[batch, c]`` or ``[batch, c, len]``)."""
    x, b = as_tensor(x), as_tensor(b)
    if b.ndim != 1 or x.ndim < 2 or x.shape[1] != b.shape[0]:
        raise ShapeError(f"add_bias: bias {b.shape} does not match {x.shape}")
    expand = (None, slice(None)) + (None,) * (x.ndim - 2)
    red = (0,) + tuple(range(2, x.ndim))
    return _node(x.data + b.data[expand], (x, b), lambda g: (g, g.sum(axis=red)))


def dense(x, w, b=None) -> Tensor:
    """Affine map ``x @ w + b`` with ``w`` of shape ``[in, out]``."""
    y = matmul(x, w)
    return y if b is None else add_bias(y, b)


# ---- 1D convolution -----------------------------------------------------------

def conv1d_out_len(length, k, stride, pad):
    return (length + 2 * pad - k) // stride + 1


def conv1d_transpose_out_len(length, k, stride, pad, output_padding=0):
    return (length - 1) * stride + k - 2 * pad + output_padding


def _windows(x, k, stride, pad, n_out):
    """``[batch, ch, n_out, k]`` view of the zero-padded input."""
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    return sliding_window_view(x, k, axis=2)[:, :, : (n_out - 1) * stride + 1: stride, :]


def _corr(x, w, stride, pad):
    """Cross-correlation ``y[b,o,t] = sum_{c,j} w[o,c,j] x[b,c,t*stride+j-pad]``."""
    k = w.shape[2]
    n_out = conv1d_out_len(x.shape[2], k, stride, pad)
    cols = _windows(x, k, stride, pad, n_out)
    y = np.tensordot(cols, w, axes=([1, 3], [1, 2]))  # [b, t, o]
    return np.ascontiguousarray(y.transpose(0, 2, 1))


def _corr_adjoint(y, w, stride, pad, length):
    """Adjoint of :func:`_corr` for an input of ``length`` samples.

    Works phase by phase: tap ``j`` lands on output positions congruent to
    ``j mod stride``, so each tap becomes one contiguous add into that
    phase's buffer.
    """
    batch, _, n = y.shape
    k = w.shape[2]
    ch = w.shape[1]
    cols = np.tensordot(w.transpose(2, 1, 0), y, axes=([2], [1]))  # [k, c, b, t]
    m = n + (k - 1) // stride
    phases = np.zeros((stride, ch, batch, m), dtype=np.result_type(y, w))
    for j in range(k):
        q = j // stride
        phases[j % stride, :, :, q: q + n] += cols[j]
    full = phases.transpose(2, 1, 3, 0).reshape(batch, ch, m * stride)
    if full.shape[2] < pad + length:
        full = np.concatenate([full, np.zeros((batch, ch, pad + length - full.shape[2]), full.dtype)], axis=2)
    return np.ascontiguousarray(full[:, :, pad: pad + length])


def _weight_grad(x, gy, k, stride, pad):
    """``dL/dw`` of :func:`_corr` given input ``x`` and output gradient ``gy``."""
    cols = _windows(x, k, stride, pad, gy.shape[2])
    return np.tensordot(gy, cols, axes=([0, 2], [0, 2]))  # [o, c, k]


def _check_conv(x, w, stride, pad):
    if x.ndim != 3 or w.ndim != 3:
        raise ShapeError(f"expected x [batch, ch, len] and w [out, in, k], got {x.shape}, {w.shape}")
    if stride < 1 or pad < 0:
        raise ShapeError("stride must be >= 1 and pad >= 0")


def conv1d(x, w, stride=1, pad=0) -> Tensor:
    """Strided, zero-padded 1D cross-correlation.

    ``x`` is ``[batch, ch_in, len]`` and ``w`` is ``[ch_out, ch_in, k]``; the
    output has ``(len + 2*pad - k) // stride + 1`` samples.
    """
    x, w = as_tensor(x), as_tensor(w)
    _check_conv(x, w, stride, pad)
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv1d: x has {x.shape[1]} channels, w expects {w.shape[1]}")
    k = w.shape[2]
    if k > x.shape[2] + 2 * pad:
        raise ShapeError(f"conv1d: kernel {k} longer than padded input {x.shape[2] + 2 * pad}")
    xd, wd = x.data, w.data
    length = xd.shape[2]

    def back(g):
        return _corr_adjoint(g, wd, stride, pad, length), _weight_grad(xd, g, k, stride, pad)

    return _node(_corr(xd, wd, stride, pad), (x, w), back)


def conv1d_transpose(y, w, stride=1, pad=0, output_padding=0) -> Tensor:
    """Adjoint of :func:`conv1d` with the same weight layout.

    ``y`` is ``[batch, ch_out_of_conv, len]`` and ``w`` is the conv weight
    ``[ch_out_of_conv, ch_in_of_conv, k]``. The output length is
    ``(len - 1)*stride + k - 2*pad + output_padding``; ``output_padding``
    (less than ``stride``) picks among the input lengths that the forward
    convolution maps to ``len``.
    """
    y, w = as_tensor(y), as_tensor(w)
    _check_conv(y, w, stride, pad)
    if y.shape[1] != w.shape[0]:
        raise ShapeError(f"conv1d_transpose: y has {y.shape[1]} channels, w expects {w.shape[0]}")
    if not 0 <= output_padding < max(stride, 1):
        raise ShapeError("output_padding must be in [0, stride)")
    k = w.shape[2]
    length = conv1d_transpose_out_len(y.shape[2], k, stride, pad, output_padding)
    if length <= 0:
        raise ShapeError("conv1d_transpose: non-positive output length")
    yd, wd = y.data, w.data

    def back(g):
        return _corr(g, wd, stride, pad), _weight_grad(g, yd, k, stride, pad)

    return _node(_corr_adjoint(yd, wd, stride, pad, length), (y, w), back)


# ---- phase shuffle ------------------------------------------------------------

def _shift_reflect(x, shifts):
    """``out[b,:,t] = x[b,:,t-k_b]`` with reflection at the edges (no edge repeat)."""
    out = np.empty_like(x)
    length = x.shape[2]
    for b, k in enumerate(shifts):
        k = int(k)
        if k == 0:
            out[b] = x[b]
        elif k > 0:
            out[b, :, k:] = x[b, :, : length - k]
            out[b, :, :k] = x[b, :, k:0:-1]
        else:
            m = -k
            out[b, :, : length - m] = x[b, :, m:]
            out[b, :, length - m:] = x[b, :, length - 2: length - 2 - m: -1]
    return out


def _shift_reflect_adjoint(g, shifts):
    out = np.zeros_like(g)
    length = g.shape[2]
    for b, k in enumerate(shifts):
        k = int(k)
        if k == 0:
            out[b] += g[b]
        elif k > 0:
            out[b, :, : length - k] += g[b, :, k:]
            out[b, :, 1: k + 1] += g[b, :, :k][:, ::-1]
        else:
            m = -k
            out[b, :, m:] += g[b, :, : length - m]
            out[b, :, length - 1 - m: length - 1] += g[b, :, length - m:][:, ::-1]
    return out


def phase_shift(x, shifts) -> Tensor:
    """Shift each batch item in time by ``shifts[b]`` samples, reflect-padding the gap."""
    x = as_tensor(x)
    shifts = np.asarray(shifts, dtype=int)
    if x.ndim != 3 or shifts.shape != (x.shape[0],):
        raise ShapeError("phase_shift expects [batch, ch, len] and one shift per item")
    if np.any(np.abs(shifts) >= x.shape[2]):
        raise ShapeError("shift must be shorter than the signal")
    return _node(_shift_reflect(x.data, shifts), (x,),
                 lambda g: (_shift_reflect_adjoint(g, shifts),))


def phase_shift_adjoint(g, shifts) -> Tensor:
    """Adjoint of :func:`phase_shift` for the same shifts."""
    g = as_tensor(g)
    shifts = np.asarray(shifts, dtype=int)
    if g.ndim != 3 or shifts.shape != (g.shape[0],):
        raise ShapeError("phase_shift_adjoint expects [batch, ch, len] and one shift per item")
    return _node(_shift_reflect_adjoint(g.data, shifts), (g,),
                 lambda h: (_shift_reflect(h, shifts),))


# ---- backward -----------------------------------------------------------------

def _topo_order(root: Tensor):
    order, seen = [], set()
    stack = [(root, False)]
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
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order[::-1]


def backward(loss: Tensor) -> None:
    """Accumulate ``d loss / d leaf`` into ``leaf.grad`` for every leaf requiring grad.

    The graph is released afterwards; walking it again raises GraphConsumed.
    """
    if not isinstance(loss, Tensor) or loss.data.size != 1 or loss.ndim > 1:
        raise NotScalar(f"backward needs a scalar loss, got shape {getattr(loss, 'shape', None)}")
    if loss._consumed:
        raise GraphConsumed("this graph was already used by backward; rebuild it")
    if not loss.requires_grad:
        raise ValueError("loss does not depend on any tensor requiring grad")
    order = _topo_order(loss)
    if any(n._consumed for n in order):
        raise GraphConsumed("part of this graph was already used by backward; rebuild it")
    grads = {id(loss): np.ones_like(loss.data)}
    for node in order:
        g = grads.pop(id(node), None)
        if node._backward is None:
            if g is not None:
                g = g.astype(node.dtype, copy=False)
                node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        if g is not None:
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.shape:
                    raise ShapeError(f"internal: gradient {pg.shape} for tensor {parent.shape}")
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg
        node._backward = None
        node._parents = ()
        node._consumed = True


# ---- optimizer ----------------------------------------------------------------

@dataclass
class AdamState:
    alpha: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    epsilon: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """One bias-corrected Adam update of ``params`` (name -> Tensor) in place."""
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.shape:
            raise ShapeError(f"adam: gradient {g.shape} for parameter {name} {p.shape}")
        if name in state.m and state.m[name].shape != p.shape:
            raise ShapeError(f"adam: state for {name} has shape {state.m[name].shape}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[name], state.v[name] = m.astype(p.dtype), v.astype(p.dtype)
        update = state.alpha * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
        p.data = (p.data - update).astype(p.dtype)


# ---- gradient checking --------------------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_error: float
    worst: str
    tolerance: float
    n_checked: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def grad_check(fn, params: dict, tolerance=1e-4, h=1e-4, max_entries=None, rng=None) -> GradCheckReport:
    """Compare analytic gradients with central differences.

    ``fn()`` must build and return a scalar loss from ``params`` (name ->
    float64 Tensor). The relative error of one entry is
    ``|a - n| / max(|a|, |n|, 1e-8)`` where a small absolute floor avoids
    dividing by near-zero gradients. With ``max_entries`` a random subset
    of each parameter is probed.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    for p in params.values():
        p.grad = None
    backward(fn())
    worst, worst_name, n = 0.0, "", 0
    for name, p in params.items():
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = rng.choice(flat.size, max_entries, replace=False)
        for i in idx:
            old = flat[i]
            flat[i] = old + h
            up = float(fn().data)
            flat[i] = old - h
            down = float(fn().data)
            flat[i] = old
            num = (up - down) / (2.0 * h)
            a = float(analytic.reshape(-1)[i])
            err = abs(a - num) / max(abs(a), abs(num), 1e-8)
            n += 1
            if err > worst:
                worst, worst_name = err, f"{name}[{i}]"
    return GradCheckReport(worst, worst_name, tolerance, n)


# ---- parameter files ----------------------------------------------------------

def save_arrays(path, arrays: dict, meta: dict | None = None) -> None:
    """Write named arrays as a zip of ``.npy`` members plus ``meta.json``.

    ``meta.json`` records the format name and version, and for each array its
    dtype and shape; the ``.npy`` members hold the row-major values.
    """
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "arrays": {k: {"dtype": str(np.asarray(v).dtype), "shape": list(np.shape(v))}
                   for k, v in sorted(arrays.items())},
        "meta": meta or {},
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        # fixed timestamps keep identical contents byte-identical on disk
        zf.writestr(zipfile.ZipInfo("meta.json", date_time=_EPOCH),
                    json.dumps(header, sort_keys=True, indent=1))
        for k in sorted(arrays):
            buf = io.BytesIO()
            np.save(buf, np.ascontiguousarray(arrays[k]), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(f"{k}.npy", date_time=_EPOCH), buf.getvalue())


def load_arrays(path):
    """Inverse of :func:`save_arrays`; returns ``(arrays, meta)``."""
    with zipfile.ZipFile(path) as zf:
        header = json.loads(zf.read("meta.json"))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported version {header.get('version')}")
        arrays = {}
        for k, spec in header["arrays"].items():
            arr = np.load(io.BytesIO(zf.read(f"{k}.npy")), allow_pickle=False)
            if list(arr.shape) != spec["shape"] or str(arr.dtype) != spec["dtype"]:
                raise ValueError(f"{path}: array {k} does not match its header")
            arrays[k] = arr
    return arrays, header.get("meta", {})
