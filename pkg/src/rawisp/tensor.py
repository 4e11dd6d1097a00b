"""Minimal dense-tensor library with reverse-mode automatic differentiation.

Covers exactly the ops the ISP model needs: 2-D convolution, instance
normalization, leaky ReLU, bilinear resize, pooling, affine layers,
elementwise arithmetic and channel reductions.  Images are channels-first
(C, H, W).  All loops have a fixed order so repeated backward passes over
the same graph produce bit-identical gradients.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Tensor:
    """A numpy array plus an optional gradient slot and a backward closure.

    Tensors are immutable after construction except through ops; building an
    op records its parents so that ``backward`` can traverse the implicit
    tape in reverse execution order.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data)
        if self.data.dtype not in (np.float32, np.float64):
            self.data = self.data.astype(np.float32)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = _parents
        self._backward = _backward
        if not np.all(np.isfinite(self.data)):
            raise ValueError("non-finite values in tensor")

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- graph plumbing ----------------------------------------------------

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Populate grads of every requires_grad leaf reachable from self.

        Only valid on scalar (single-element) tensors.
        """
        if self.data.size != 1:
            raise ValueError(
                f"backward() requires a scalar tensor, got shape {self.shape}"
            )
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))

        for node in topo:
            if node is not self:
                node.grad = None
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad = self.grad + g

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, -other if isinstance(other, Tensor) else -float(other))

    def __rsub__(self, other):
        return add(-self, float(other))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division not supported")
        return mul(self, 1.0 / float(other))

    def __pow__(self, e):
        return power(self, e)

    def sum(self):
        return tsum(self)

    def mean(self):
        return tsum(self) * (1.0 / self.data.size)

    def abs(self):
        return tabs(self)

    def reshape(self, *shape):
        return reshape(self, shape)


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    a = np.asarray(x, dtype=dtype if dtype is not None else np.float32)
    return Tensor(a)


def constant(x, dtype=np.float32):
    return Tensor(np.asarray(x, dtype=dtype))


def _make(data, parents, backward):
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req,
                  _parents=tuple(p for p in parents if p.requires_grad) if req else (),
                  _backward=backward if req else None)


# -- elementwise ops -------------------------------------------------------

def add(a: Tensor, b) -> Tensor:
    if isinstance(b, Tensor):
        if a.shape != b.shape:
            raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")

        def bwd(g):
            a._accumulate(g)
            b._accumulate(g)

        return _make(a.data + b.data, (a, b), bwd)

    c = float(b)

    def bwd(g):
        a._accumulate(g)

    return _make(a.data + c, (a,), bwd)


def mul(a: Tensor, b) -> Tensor:
    if isinstance(b, Tensor):
        if a.shape != b.shape:
            raise ValueError(f"mul shape mismatch: {a.shape} vs {b.shape}")

        def bwd(g):
            a._accumulate(g * b.data)
            b._accumulate(g * a.data)

        return _make(a.data * b.data, (a, b), bwd)

    c = float(b)

    def bwd(g):
        a._accumulate(g * c)

    return _make(a.data * c, (a,), bwd)


def power(a: Tensor, e: float) -> Tensor:
    e = float(e)
    out = a.data ** e

    def bwd(g):
        a._accumulate(g * e * a.data ** (e - 1.0))

    return _make(out, (a,), bwd)


def tabs(a: Tensor) -> Tensor:
    s = np.sign(a.data)

    def bwd(g):
        a._accumulate(g * s)

    return _make(np.abs(a.data), (a,), bwd)


def tlog(a: Tensor) -> Tensor:
    def bwd(g):
        a._accumulate(g / a.data)

    return _make(np.log(a.data), (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-a.data))

    def bwd(g):
        a._accumulate(g * s * (1.0 - s))

    return _make(s, (a,), bwd)


def leaky_relu(a: Tensor, slope: float = 0.01) -> Tensor:
    mask = a.data > 0
    scale = np.where(mask, 1.0, slope).astype(a.dtype)

    def bwd(g):
        a._accumulate(g * scale)

    return _make(a.data * scale, (a,), bwd)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    out = np.clip(a.data, lo, hi)
    inside = ((a.data > lo) & (a.data < hi)).astype(a.dtype)

    def bwd(g):
        a._accumulate(g * inside)

    return _make(out, (a,), bwd)


def where(cond: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Select elementwise by a constant boolean mask (not differentiated)."""
    cond = np.asarray(cond, dtype=bool)
    if cond.shape != a.shape or a.shape != b.shape:
        raise ValueError("where shape mismatch")

    def bwd(g):
        a._accumulate(np.where(cond, g, 0.0))
        b._accumulate(np.where(cond, 0.0, g))

    return _make(np.where(cond, a.data, b.data), (a, b), bwd)


def tsum(a: Tensor) -> Tensor:
    def bwd(g):
        a._accumulate(np.full_like(a.data, float(g)))

    return _make(np.asarray(a.data.sum(), dtype=a.dtype), (a,), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape

    def bwd(g):
        a._accumulate(g.reshape(old))

    return _make(a.data.reshape(shape), (a,), bwd)


def slice_axis0(a: Tensor, start: int, stop: int) -> Tensor:
    def bwd(g):
        buf = np.zeros_like(a.data)
        buf[start:stop] = g
        a._accumulate(buf)

    return _make(a.data[start:stop].copy(), (a,), bwd)


# -- image ops -------------------------------------------------------------

def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1,
           padding: int = 0) -> Tensor:
    """Cross-correlation of a (C_in,H,W) image with (C_out,C_in,k,k) weights."""
    if x.data.ndim != 3 or w.data.ndim != 4:
        raise ValueError("conv2d expects (C,H,W) input and (Co,Ci,k,k) weight")
    cin, h, wd = x.shape
    cout, wcin, kh, kw = w.shape
    if kh != kw:
        raise ValueError("only square kernels supported")
    k, s, p = kh, int(stride), int(padding)
    if wcin != cin:
        raise ValueError(
            f"conv2d channel mismatch: input has {cin}, weight expects {wcin}"
        )
    if b.shape != (cout,):
        raise ValueError(f"conv2d bias must have shape ({cout},)")
    if k > h + 2 * p or k > wd + 2 * p:
        raise ValueError("kernel larger than padded input")
    if s < 1:
        raise ValueError("stride must be positive")

    xp = np.pad(x.data, ((0, 0), (p, p), (p, p))) if p else x.data
    ho = (h + 2 * p - k) // s + 1
    wo = (wd + 2 * p - k) // s + 1
    view = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::s, ::s]
    # view: (cin, ho, wo, k, k); contract over cin and the kernel window
    out = np.tensordot(w.data, view, axes=([1, 2, 3], [0, 3, 4])) \
        + b.data[:, None, None]

    def bwd(g):
        w._accumulate(np.tensordot(g, view, axes=([1, 2], [1, 2])))
        b._accumulate(g.sum(axis=(1, 2)))
        if x.requires_grad:
            # (cin, k, k, ho, wo)
            gcols = np.tensordot(w.data, g, axes=([0], [0]))
            gxp = np.zeros((cin, h + 2 * p, wd + 2 * p), dtype=x.dtype)
            for i in range(k):
                for j in range(k):
                    gxp[:, i:i + s * ho:s, j:j + s * wo:s] += gcols[:, i, j]
            x._accumulate(gxp[:, p:p + h, p:p + wd] if p else gxp)

    return _make(out, (x, w, b), bwd)


def instance_norm(x: Tensor, gamma: Tensor, beta: Tensor,
                  eps: float = 1e-5) -> Tensor:
    """Per-channel standardization over H*W with biased variance."""
    if x.data.ndim != 3:
        raise ValueError("instance_norm expects (C,H,W)")
    c = x.shape[0]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError("gamma/beta must have shape (C,)")
    n = x.shape[1] * x.shape[2]
    mean = x.data.mean(axis=(1, 2), keepdims=True)
    var = x.data.var(axis=(1, 2), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv
    out = gamma.data[:, None, None] * xhat + beta.data[:, None, None]

    def bwd(g):
        gamma._accumulate((g * xhat).sum(axis=(1, 2)))
        beta._accumulate(g.sum(axis=(1, 2)))
        if x.requires_grad:
            dxh = g * gamma.data[:, None, None]
            t1 = dxh.sum(axis=(1, 2), keepdims=True)
            t2 = (dxh * xhat).sum(axis=(1, 2), keepdims=True)
            x._accumulate((inv / n) * (n * dxh - t1 - xhat * t2))

    return _make(out, (x, gamma, beta), bwd)


def _resize_coords(n_in: int, n_out: int, dtype):
    scale = n_in / n_out
    src = (np.arange(n_out, dtype=dtype) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = src - i0
    return i0, i1, frac


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Bilinear resampling with half-pixel-center coordinate mapping."""
    if x.data.ndim != 3:
        raise ValueError("bilinear_resize expects (C,H,W)")
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be positive")
    c, h, w = x.shape
    if out_h == h and out_w == w:
        def bwd_id(g):
            x._accumulate(g)
        return _make(x.data.copy(), (x,), bwd_id)

    y0, y1, fy = _resize_coords(h, out_h, x.dtype)
    x0, x1, fx = _resize_coords(w, out_w, x.dtype)
    wy = fy[:, None]
    wx = fx[None, :]
    w00 = (1 - wy) * (1 - wx)
    w01 = (1 - wy) * wx
    w10 = wy * (1 - wx)
    w11 = wy * wx
    d = x.data
    out = (d[:, y0[:, None], x0[None, :]] * w00
           + d[:, y0[:, None], x1[None, :]] * w01
           + d[:, y1[:, None], x0[None, :]] * w10
           + d[:, y1[:, None], x1[None, :]] * w11)

    def bwd(g):
        gx = np.zeros(c * h * w)
        base = (np.arange(c) * (h * w))[:, None, None]
        for yy, xx, ww in ((y0, x0, w00), (y0, x1, w01),
                           (y1, x0, w10), (y1, x1, w11)):
            flat = (base + (yy[:, None] * w + xx[None, :])[None]).reshape(-1)
            gx += np.bincount(flat, weights=(g * ww).reshape(-1).astype(np.float64),
                              minlength=c * h * w)
        x._accumulate(gx.reshape(x.shape).astype(x.dtype))

    return _make(out, (x,), bwd)


def max_pool(x: Tensor, k: int = 2) -> Tensor:
    """Non-overlapping k*k max pooling; remainder rows/cols are dropped."""
    c, h, w = x.shape
    ho, wo = h // k, w // k
    win = x.data[:, :ho * k, :wo * k].reshape(c, ho, k, wo, k)
    flat = win.transpose(0, 1, 3, 2, 4).reshape(c, ho, wo, k * k)
    idx = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]

    def bwd(g):
        gflat = np.zeros((c, ho, wo, k * k), dtype=x.dtype)
        np.put_along_axis(gflat, idx[..., None], g[..., None], axis=-1)
        gwin = gflat.reshape(c, ho, wo, k, k).transpose(0, 1, 3, 2, 4)
        gx = np.zeros_like(x.data)
        gx[:, :ho * k, :wo * k] = gwin.reshape(c, ho * k, wo * k)
        x._accumulate(gx)

    return _make(out, (x,), bwd)


def avg_pool(x: Tensor, k: int) -> Tensor:
    """Non-overlapping k*k mean pooling; remainder rows/cols are dropped."""
    c, h, w = x.shape
    ho, wo = h // k, w // k
    win = x.data[:, :ho * k, :wo * k].reshape(c, ho, k, wo, k)
    out = win.mean(axis=(2, 4))

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[:, :ho * k, :wo * k] = np.repeat(
            np.repeat(g, k, axis=1), k, axis=2) / (k * k)
        x._accumulate(gx)

    return _make(out, (x,), bwd)


def global_avg_pool(x: Tensor) -> Tensor:
    """Adaptive average pool to 1x1, returned as a (C,) vector."""
    c, h, w = x.shape
    out = x.data.mean(axis=(1, 2))

    def bwd(g):
        x._accumulate(np.broadcast_to(
            g[:, None, None] / (h * w), x.shape).astype(x.dtype))

    return _make(out, (x,), bwd)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map of a flat vector: w @ x + b."""
    if x.data.ndim != 1 or w.data.ndim != 2:
        raise ValueError("linear expects a vector input and 2-D weight")
    if w.shape[1] != x.shape[0] or b.shape != (w.shape[0],):
        raise ValueError("linear shape mismatch")

    def bwd(g):
        w._accumulate(np.outer(g, x.data))
        b._accumulate(g)
        if x.requires_grad:
            x._accumulate(w.data.T @ g)

    return _make(w.data @ x.data + b.data, (x, w, b), bwd)


def channel_scale(img: Tensor, gains: Tensor) -> Tensor:
    """Multiply each channel of a (C,H,W) image by a per-channel gain."""
    if img.data.ndim != 3 or gains.shape != (img.shape[0],):
        raise ValueError("channel_scale expects (C,H,W) image and (C,) gains")
    g3 = gains.data[:, None, None]

    def bwd(g):
        gains._accumulate((g * img.data).sum(axis=(1, 2)))
        if img.requires_grad:
            img._accumulate(g * g3)

    return _make(img.data * g3, (img, gains), bwd)


def color_transform(img: Tensor, m: Tensor) -> Tensor:
    """Left-multiply every pixel's color vector of a (3,H,W) image by m (3x3)."""
    if img.shape[0] != 3 or m.shape != (3, 3):
        raise ValueError("color_transform expects a 3-channel image and 3x3 matrix")
    out = np.einsum("ij,jhw->ihw", m.data, img.data)

    def bwd(g):
        m._accumulate(np.einsum("ihw,jhw->ij", g, img.data))
        if img.requires_grad:
            img._accumulate(np.einsum("ij,ihw->jhw", m.data, g))

    return _make(out, (img, m), bwd)


# -- gradient checking -----------------------------------------------------

def grad_check(fn, point: Tensor, step: float = 1e-4, indices=None) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``fn`` maps a tensor to a scalar Tensor.  ``indices`` optionally restricts
    the check to a subset of flat component indices (for large points).
    """
    pt = Tensor(point.data.astype(np.float64), requires_grad=True)
    out = fn(pt)
    out.backward()
    analytic = np.zeros(pt.data.size) if pt.grad is None else pt.grad.reshape(-1)

    flat = pt.data.reshape(-1)
    if indices is None:
        indices = range(flat.size)
    worst = 0.0
    for i in indices:
        orig = flat[i]
        flat[i] = orig + step
        hi = float(fn(Tensor(pt.data.copy())).data)
        flat[i] = orig - step
        lo = float(fn(Tensor(pt.data.copy())).data)
        flat[i] = orig
        numeric = (hi - lo) / (2.0 * step)
        a = analytic[i]
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst
