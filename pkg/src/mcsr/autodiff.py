"""Minimal reverse-mode automatic differentiation over numpy arrays.

A :class:`Tensor` wraps an ndarray and records the operations producing
it; calling :meth:`Tensor.backward` on a scalar result accumulates
gradients into every upstream tensor that requires them. Only the
operations needed by the network blocks are implemented. Training runs in
float32; gradient checking builds the same graphs in float64.

Convolutions are stride-1 with zero-filled same padding. ``conv2d`` goes
through an im2col expansion so the heavy lifting lands in BLAS matmuls.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ShapeError

_DEBUG_FINITE = False


def set_debug_checks(enabled: bool) -> None:
    """Globally enable NaN/Inf checking after every operation (slow)."""
    global _DEBUG_FINITE
    _DEBUG_FINITE = bool(enabled)


class Tensor:
    """Array node in the computation graph.

    `vjps` is a tuple of (parent, fn) pairs where fn maps the output
    gradient to the parent's gradient contribution.
    """

    __slots__ = ("data", "grad", "requires_grad", "_vjps", "op")

    def __init__(self, data, requires_grad=False, vjps=(), op="leaf"):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._vjps = vjps if self.requires_grad else ()
        self.op = op
        if _DEBUG_FINITE and not np.all(np.isfinite(self.data)):
            raise NumericError(f"non-finite values produced by op {op!r}")

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self) -> np.ndarray:
        return self.data.copy()

    def backward(self) -> None:
        """Accumulate gradients of this scalar into all upstream tensors."""
        if self.data.size != 1:
            raise ShapeError("backward() requires a scalar output")
        order = toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            g = node.grad
            if g is None:
                continue
            for parent, vjp in node._vjps:
                contrib = vjp(g)
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += contrib

    # -- operator sugar ----------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def __add__(self, other):
        return add(self, self._coerce(other))

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, self._coerce(other))

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, self._coerce(other))

    def __rsub__(self, other):
        return sub(self._coerce(other), self)

    def __neg__(self):
        return Tensor(
            -self.data,
            self.requires_grad,
            vjps=((self, lambda g: -g),),
            op="neg",
        )

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self.op!r}, grad={self.requires_grad})"


def toposort(root: Tensor):
    """Iterative topological order of the graph below `root`."""
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent, _ in node._vjps:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum `g` down to `shape` (reverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# --- elementwise and reduction ops -----------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data
    return Tensor(
        out_data,
        a.requires_grad or b.requires_grad,
        vjps=(
            (a, lambda g: _unbroadcast(g, a.data.shape)),
            (b, lambda g: _unbroadcast(g, b.data.shape)),
        ),
        op="add",
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    return Tensor(
        a.data - b.data,
        a.requires_grad or b.requires_grad,
        vjps=(
            (a, lambda g: _unbroadcast(g, a.data.shape)),
            (b, lambda g: _unbroadcast(-g, b.data.shape)),
        ),
        op="sub",
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    return Tensor(
        a.data * b.data,
        a.requires_grad or b.requires_grad,
        vjps=(
            (a, lambda g: _unbroadcast(g * b.data, a.data.shape)),
            (b, lambda g: _unbroadcast(g * a.data, b.data.shape)),
        ),
        op="mul",
    )


def absolute(a: Tensor) -> Tensor:
    return Tensor(
        np.abs(a.data),
        a.requires_grad,
        vjps=((a, lambda g: g * np.sign(a.data)),),
        op="abs",
    )


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return Tensor(
        np.where(mask, a.data, 0),
        a.requires_grad,
        vjps=((a, lambda g: g * mask),),
        op="relu",
    )


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return Tensor(
        out,
        a.requires_grad,
        vjps=((a, lambda g: g * out * (1.0 - out)),),
        op="sigmoid",
    )


def tsum(a: Tensor) -> Tensor:
    return Tensor(
        np.asarray(a.data.sum()),
        a.requires_grad,
        vjps=((a, lambda g: np.broadcast_to(g, a.data.shape).astype(a.data.dtype)),),
        op="sum",
    )


def tmean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out_data = a.data.mean(axis=axis, dtype=a.data.dtype, keepdims=keepdims)
    count = a.data.size if axis is None else a.data.size // out_data.size

    def vjp(g):
        if not keepdims and axis is not None:
            g = np.expand_dims(g, axis)
        elif axis is None and g.ndim == 0:
            g = g.reshape((1,) * a.data.ndim)
        return (np.broadcast_to(g, a.data.shape) / count).astype(a.data.dtype)

    return Tensor(np.asarray(out_data), a.requires_grad, vjps=((a, vjp),), op="mean")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return out * (g - (g * out).sum(axis=axis, keepdims=True))

    return Tensor(out, a.requires_grad, vjps=((a, vjp),), op="softmax")


# --- shape ops --------------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    return Tensor(
        a.data.reshape(shape),
        a.requires_grad,
        vjps=((a, lambda g: g.reshape(a.data.shape)),),
        op="reshape",
    )


def transpose_last2(a: Tensor) -> Tensor:
    return Tensor(
        np.swapaxes(a.data, -1, -2),
        a.requires_grad,
        vjps=((a, lambda g: np.swapaxes(g, -1, -2)),),
        op="transpose",
    )


def concat(tensors, axis: int = 1) -> Tensor:
    datas = [t.data for t in tensors]
    out = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def make_vjp(i):
        lo, hi = offsets[i], offsets[i + 1]

        def vjp(g):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            return g[tuple(index)]

        return vjp

    vjps = tuple((t, make_vjp(i)) for i, t in enumerate(tensors))
    return Tensor(out, any(t.requires_grad for t in tensors), vjps=vjps, op="concat")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with identical leading batch dims (no batch broadcast)."""
    if a.data.shape[:-2] != b.data.shape[:-2]:
        raise ShapeError(
            f"matmul batch dims differ: {a.data.shape} vs {b.data.shape}"
        )
    out = np.matmul(a.data, b.data)
    return Tensor(
        out,
        a.requires_grad or b.requires_grad,
        vjps=(
            (a, lambda g: np.matmul(g, np.swapaxes(b.data, -1, -2))),
            (b, lambda g: np.matmul(np.swapaxes(a.data, -1, -2), g)),
        ),
        op="matmul",
    )


# --- structured ops ---------------------------------------------------------


def _im2col(x: np.ndarray, k: int):
    """(N, C, Hp, Wp) padded input -> (N, C*k*k, H*W) patch matrix."""
    n, c, hp, wp = x.shape
    h, w = hp - k + 1, wp - k + 1
    win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(2, 3))
    # (N, C, H, W, k, k) -> (N, C, k, k, H, W) -> (N, C*k*k, H*W)
    return win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * k * k, h * w), h, w


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Stride-1 same-padded 2D convolution (cross-correlation).

    x: (N, C_in, H, W); w: (C_out, C_in, k, k) with odd k; b: (C_out,).
    """
    if x.data.ndim != 4:
        raise ShapeError(f"conv2d input must be 4D, got {x.data.shape}")
    c_out, c_in, k, k2 = w.data.shape
    if k != k2 or k % 2 == 0:
        raise ShapeError(f"conv2d kernel must be square with odd size, got {w.data.shape}")
    if x.data.shape[1] != c_in:
        raise ShapeError(
            f"conv2d channel mismatch: input has {x.data.shape[1]}, kernel expects {c_in}"
        )
    n, _, h, wd = x.data.shape
    pad = k // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols, oh, ow = _im2col(xp, k)
    wmat = w.data.reshape(c_out, c_in * k * k)
    out = np.matmul(wmat, cols)  # (N, C_out, H*W) via broadcasting wmat
    out = out.reshape(n, c_out, oh, ow)
    if b is not None:
        out = out + b.data.reshape(1, c_out, 1, 1)

    def vjp_x(g):
        gm = g.reshape(n, c_out, oh * ow)
        dcols = np.matmul(wmat.T, gm)  # (N, C_in*k*k, H*W)
        dcols = dcols.reshape(n, c_in, k, k, oh, ow)
        dxp = np.zeros_like(xp)
        for i in range(k):
            for j in range(k):
                dxp[:, :, i : i + oh, j : j + ow] += dcols[:, :, i, j]
        return dxp[:, :, pad : pad + h, pad : pad + wd]

    def vjp_w(g):
        gm = g.reshape(n, c_out, oh * ow)
        dw = np.matmul(gm, cols.transpose(0, 2, 1)).sum(axis=0)
        return dw.reshape(c_out, c_in, k, k)

    vjps = [(x, vjp_x), (w, vjp_w)]
    if b is not None:
        vjps.append((b, lambda g: g.sum(axis=(0, 2, 3))))
    req = x.requires_grad or w.requires_grad or (b is not None and b.requires_grad)
    return Tensor(out, req, vjps=tuple(vjps), op="conv2d")


def conv3d_volume(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Single-channel 3D convolution over the (C, H, W) volume of each item.

    x: (N, C, H, W) treated as one 3D grid per batch item; w: (k, k, k)
    with odd k; b: scalar shaped (1,). Same padding on all three axes.
    """
    if x.data.ndim != 4:
        raise ShapeError(f"conv3d input must be 4D, got {x.data.shape}")
    k = w.data.shape[0]
    if w.data.shape != (k, k, k) or k % 2 == 0:
        raise ShapeError(f"conv3d kernel must be cubic with odd size, got {w.data.shape}")
    n, c, h, wd = x.data.shape
    pad = k // 2
    xp = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k, k), axis=(1, 2, 3))
    out = np.einsum("nchwijl,ijl->nchw", win, w.data, optimize=True)
    if b is not None:
        out = out + b.data.reshape(())

    def vjp_x(g):
        dxp = np.zeros_like(xp)
        for i in range(k):
            for j in range(k):
                for l in range(k):
                    dxp[:, i : i + c, j : j + h, l : l + wd] += g * w.data[i, j, l]
        return dxp[:, pad : pad + c, pad : pad + h, pad : pad + wd]

    def vjp_w(g):
        return np.einsum("nchwijl,nchw->ijl", win, g, optimize=True)

    vjps = [(x, vjp_x), (w, vjp_w)]
    if b is not None:
        vjps.append((b, lambda g: np.asarray([g.sum()], dtype=b.data.dtype)))
    req = x.requires_grad or w.requires_grad or (b is not None and b.requires_grad)
    return Tensor(out, req, vjps=tuple(vjps), op="conv3d")


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Rearrange (N, C*r^2, H, W) -> (N, C, rH, rW); bijective, no arithmetic."""
    n, c, h, w = x.data.shape
    if r < 1:
        raise ShapeError(f"upscale factor must be >= 1, got {r}")
    if c % (r * r) != 0:
        raise ShapeError(f"channels {c} not divisible by {r}^2")
    if r == 1:
        return Tensor(x.data, x.requires_grad, vjps=((x, lambda g: g),), op="pixel_shuffle")
    c_out = c // (r * r)
    out = (
        x.data.reshape(n, c_out, r, r, h, w)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(n, c_out, h * r, w * r)
    )

    def vjp(g):
        return (
            g.reshape(n, c_out, h, r, w, r)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(n, c, h, w)
        )

    return Tensor(out, x.requires_grad, vjps=((x, vjp),), op="pixel_shuffle")


# --- parameters -------------------------------------------------------------


class ParamStore:
    """Named learnable parameters with paired gradient buffers."""

    def __init__(self):
        self._entries = {}  # name -> (Tensor, trainable)

    def add(self, name: str, data: np.ndarray, trainable: bool = True) -> Tensor:
        if name in self._entries:
            raise ShapeError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(data), requires_grad=True, op="param")
        t.grad = np.zeros_like(t.data)
        self._entries[name] = (t, trainable)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name][0]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self):
        return list(self._entries)

    def items(self):
        for name, (t, trainable) in self._entries.items():
            yield name, t, trainable

    def trainable(self):
        for name, (t, tr) in self._entries.items():
            if tr:
                yield name, t

    def is_trainable(self, name: str) -> bool:
        return self._entries[name][1]

    def zero_grads(self) -> None:
        for t, _ in self._entries.values():
            t.grad.fill(0)

    def n_elements(self) -> int:
        return sum(t.data.size for t, _ in self._entries.values())

    # checkpointing ---------------------------------------------------------
    def save(self, dirpath) -> None:
        import json
        from pathlib import Path

        from . import tensorio

        dirpath = Path(dirpath)
        dirpath.mkdir(parents=True, exist_ok=True)
        index = {}
        for name in sorted(self._entries):
            t, trainable = self._entries[name]
            fname = name + ".msrt"
            tensorio.save_tensor(dirpath / fname, t.data)
            index[name] = {
                "file": fname,
                "shape": list(t.data.shape),
                "trainable": trainable,
            }
        (dirpath / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True))

    def load(self, dirpath) -> None:
        """Load a checkpoint into this store, validating names and shapes."""
        import json
        from pathlib import Path

        from . import tensorio
        from .errors import ConfigError, DataError

        dirpath = Path(dirpath)
        index_path = dirpath / "index.json"
        if not index_path.exists():
            raise DataError(f"{dirpath}: missing checkpoint index.json")
        index = json.loads(index_path.read_text())
        if set(index) != set(self._entries):
            missing = set(self._entries) - set(index)
            extra = set(index) - set(self._entries)
            raise ConfigError(
                f"checkpoint/config mismatch: missing={sorted(missing)} extra={sorted(extra)}"
            )
        for name, meta in index.items():
            t, _ = self._entries[name]
            loaded = tensorio.load_tensor(dirpath / meta["file"])
            if tuple(loaded.shape) != t.data.shape:
                raise ConfigError(
                    f"checkpoint/config mismatch for {name!r}: "
                    f"stored {loaded.shape}, expected {t.data.shape}"
                )
            t.data = loaded.astype(t.data.dtype)
            t.grad = np.zeros_like(t.data)
