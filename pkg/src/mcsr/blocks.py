"""Differentiable building blocks of the two-branch super-resolution net.

Every block registers its parameters in a shared :class:`ParamStore` under
a dotted name prefix, so checkpoints and the optimizer see one flat
namespace. Weights start uniform in +-1/sqrt(fan_in), biases at zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .errors import ConfigError, ShapeError


def _init_weight(rng, shape, fan_in, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv2d:
    """Stride-1 same-padded convolution with learned weight and bias."""

    def __init__(self, store, name, c_in, c_out, k, rng, dtype=np.float32):
        fan_in = c_in * k * k
        self.w = store.add(f"{name}.w", _init_weight(rng, (c_out, c_in, k, k), fan_in, dtype))
        self.b = store.add(f"{name}.b", np.zeros(c_out, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.conv2d(x, self.w, self.b)


class ChannelAttention:
    """Squeeze-and-excitation gate: pooled stats -> bottleneck -> sigmoid scale."""

    def __init__(self, store, name, channels, rng, reduction=4, dtype=np.float32):
        hidden = max(1, channels // reduction)
        self.down = Conv2d(store, f"{name}.down", channels, hidden, 1, rng, dtype)
        self.up = Conv2d(store, f"{name}.up", hidden, channels, 1, rng, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        pooled = ad.tmean(x, axis=(2, 3), keepdims=True)
        gate = ad.sigmoid(self.up(ad.relu(self.down(pooled))))
        return ad.mul(x, gate)


class ResidualChannelBlock:
    """conv -> ReLU -> conv -> channel-attention gate -> residual add."""

    def __init__(self, store, name, channels, rng, dtype=np.float32):
        self.conv1 = Conv2d(store, f"{name}.conv1", channels, channels, 3, rng, dtype)
        self.conv2 = Conv2d(store, f"{name}.conv2", channels, channels, 3, rng, dtype)
        self.ca = ChannelAttention(store, f"{name}.ca", channels, rng, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        body = self.ca(self.conv2(ad.relu(self.conv1(x))))
        return ad.add(x, body)


class ResidualGroup:
    """A cascade of residual channel-attention blocks with a group skip."""

    def __init__(self, store, name, channels, rng, blocks=2, dtype=np.float32):
        self.blocks = [
            ResidualChannelBlock(store, f"{name}.block{i}", channels, rng, dtype)
            for i in range(blocks)
        ]
        self.tail = Conv2d(store, f"{name}.tail", channels, channels, 3, rng, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        h = x
        for block in self.blocks:
            h = block(h)
        return ad.add(x, self.tail(h))


class ChannelSpatialAttention:
    """Joint channel-spatial gate from a single 3x3x3 convolution.

    The (C, H, W) feature volume of each batch item is treated as one 3D
    grid; the resulting map is squashed by a sigmoid and applied
    multiplicatively with a residual add, so zero parameters give 1.5x.
    """

    def __init__(self, store, name, rng, k=3, dtype=np.float32):
        self.w = store.add(f"{name}.w", _init_weight(rng, (k, k, k), k**3, dtype))
        self.b = store.add(f"{name}.b", np.zeros(1, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        att = ad.conv3d_volume(x, self.w, self.b)
        return ad.add(ad.mul(ad.sigmoid(att), x), x)


@dataclass
class AttentionPair:
    """Complementary gates: a_h + a_l is exactly all-ones by construction."""

    a_h: Tensor
    a_l: Tensor


def attention_maps(f_aux: Tensor) -> AttentionPair:
    """High-intensity gate sigmoid(f_aux) and its complement 1 - sigmoid(f_aux)."""
    a_h = ad.sigmoid(f_aux)
    a_l = 1.0 - a_h
    return AttentionPair(a_h=a_h, a_l=a_l)


class SeparableAttention:
    """Fuse auxiliary and target features through complementary intensity gates.

    The auxiliary feature drives a bright-structure gate and its
    complement (dark regions and edges); both gates weight a 1x1-reduced
    joint feature, the two gated branches are refined by a shared 3x3
    conv+ReLU, concatenated, projected back to C channels and added to the
    target feature as a residual.
    """

    def __init__(self, store, name, channels, rng, dtype=np.float32):
        self.reduce = Conv2d(store, f"{name}.reduce", 2 * channels, channels, 1, rng, dtype)
        self.branch = Conv2d(store, f"{name}.branch", channels, channels, 3, rng, dtype)
        self.project = Conv2d(store, f"{name}.project", 2 * channels, channels, 3, rng, dtype)

    def __call__(self, f_aux: Tensor, f_tar: Tensor, capture=None):
        if f_aux.shape != f_tar.shape:
            raise ShapeError(
                f"separable attention branch shapes differ: {f_aux.shape} vs {f_tar.shape}"
            )
        pair = attention_maps(f_aux)
        fused = self.reduce(ad.concat([f_aux, f_tar], axis=1))
        high = ad.relu(self.branch(ad.mul(fused, pair.a_h)))
        low = ad.relu(self.branch(ad.mul(fused, pair.a_l)))
        out = ad.relu(self.project(ad.concat([high, low], axis=1)))
        if capture is not None:
            capture.append(AttentionPair(a_h=Tensor(pair.a_h.detach()), a_l=Tensor(pair.a_l.detach())))
        return ad.add(out, f_tar)


def multi_stage_integration(stack: Tensor) -> Tensor:
    """Blend stage features through a row-softmax affinity over flat vectors.

    stack: (N, K, C, H, W) with K >= 2 stage features per batch item.
    Each stage is flattened, pairwise dot products form a K x K affinity,
    each row is softmax-normalized, and the affinity-weighted stage
    summaries are added back. Output: (N, K*C, H, W), stages stacked along
    channels in their input order.
    """
    if stack.data.ndim != 5:
        raise ShapeError(f"expected (N, K, C, H, W) stack, got {stack.shape}")
    n, k, c, h, w = stack.shape
    if k < 2:
        raise ConfigError(f"multi-stage integration needs at least 2 stages, got {k}")
    flat = ad.reshape(stack, (n, k, c * h * w))
    affinity = ad.softmax(ad.matmul(flat, ad.transpose_last2(flat)), axis=-1)
    blended = ad.add(ad.matmul(affinity, flat), flat)
    return ad.reshape(blended, (n, k * c, h, w)), affinity
