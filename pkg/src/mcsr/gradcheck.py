"""Finite-difference verification of every differentiable block.

Each registered block builds a small 64-bit case (leaf tensors plus a
scalar sum-of-outputs loss) and compares reverse-mode gradients against
central differences. Piecewise-linear ops (ReLU, abs) make a finite
difference invalid whenever the +-h evaluations land on different linear
pieces, so the checker records the activation-sign signature of each
evaluation and shrinks the step for exactly those coordinates where a
piece boundary was crossed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import blocks
from .autodiff import Tensor, toposort
from .errors import ConfigError
from .model import ModelConfig, MultiContrastSRNet

DEFAULT_STEP = 1e-3
DEFAULT_TOL = 1e-4


@dataclass
class GradCase:
    """Leaves to perturb plus a forward closure producing the scalar loss."""

    leaves: dict
    forward: callable
    max_per_leaf: int | None = None


@dataclass
class GradReport:
    block: str
    max_rel_err: float
    n_checked: int
    n_refined: int
    tol: float
    step: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol

    def to_dict(self):
        return {
            "block": self.block,
            "max_rel_err": self.max_rel_err,
            "n_checked": self.n_checked,
            "n_refined": self.n_refined,
            "tol": self.tol,
            "step": self.step,
            "passed": self.passed,
        }


# --- case builders ----------------------------------------------------------


def _case_conv(seed):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.standard_normal((1, 4, 6, 6)), requires_grad=True)
    w = Tensor(rng.standard_normal((3, 4, 3, 3)) * 0.4, requires_grad=True)
    b = Tensor(rng.standard_normal(3) * 0.1, requires_grad=True)
    probe = Tensor(rng.standard_normal((1, 3, 6, 6)))
    leaves = {"x": x, "w": w, "b": b}
    return GradCase(leaves, lambda: ad.tsum(ad.mul(ad.conv2d(x, w, b), probe)))


def _case_pixel_shuffle(seed):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.standard_normal((1, 4, 6, 6)), requires_grad=True)
    probe = Tensor(rng.standard_normal((1, 1, 12, 12)))
    return GradCase({"x": x}, lambda: ad.tsum(ad.mul(ad.pixel_shuffle(x, 2), probe)))


def _case_residual_group(seed):
    rng = np.random.default_rng(seed)
    store = ad.ParamStore()
    rg = blocks.ResidualGroup(store, "rg", 4, rng, blocks=2, dtype=np.float64)
    x = Tensor(rng.standard_normal((1, 4, 6, 6)), requires_grad=True)
    leaves = {"x": x, **{name: t for name, t, _ in store.items()}}
    return GradCase(leaves, lambda: ad.tsum(rg(x)))


def _case_m_att(seed):
    rng = np.random.default_rng(seed)
    store = ad.ParamStore()
    att = blocks.ChannelSpatialAttention(store, "att", rng, dtype=np.float64)
    x = Tensor(rng.standard_normal((1, 4, 6, 6)), requires_grad=True)
    leaves = {"x": x, **{name: t for name, t, _ in store.items()}}
    return GradCase(leaves, lambda: ad.tsum(att(x)))


def _case_separable_attention(seed):
    rng = np.random.default_rng(seed)
    store = ad.ParamStore()
    sep = blocks.SeparableAttention(store, "sep", 4, rng, dtype=np.float64)
    f_aux = Tensor(rng.standard_normal((1, 4, 6, 6)), requires_grad=True)
    f_tar = Tensor(rng.standard_normal((1, 4, 6, 6)), requires_grad=True)
    leaves = {"f_aux": f_aux, "f_tar": f_tar, **{name: t for name, t, _ in store.items()}}
    return GradCase(leaves, lambda: ad.tsum(sep(f_aux, f_tar)))


def _case_m_int(seed):
    rng = np.random.default_rng(seed)
    k, c, h, w = 4, 4, 6, 6
    # 0.15 keeps affinity logits at a few units: softmax well away from
    # saturation, gradients large enough for the finite-difference step
    stack = Tensor(rng.standard_normal((1, k, c, h, w)) * 0.15, requires_grad=True)
    probe = Tensor(rng.standard_normal((1, k * c, h, w)))

    def forward():
        out, _ = blocks.multi_stage_integration(stack)
        return ad.tsum(ad.mul(out, probe))

    return GradCase({"stack": stack}, forward)


def _case_full_forward(seed):
    cfg = ModelConfig(s=2, L=2, C=8, B=1)
    net = MultiContrastSRNet(cfg, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 1)
    x_aux = Tensor(rng.random((1, 1, 16, 16)), requires_grad=True)
    y_tar = Tensor(rng.random((1, 1, 8, 8)), requires_grad=True)
    leaves = {"x_aux": x_aux, "y_tar": y_tar,
              **{name: t for name, t, _ in net.store.items()}}

    def forward():
        out = net.forward(x_aux, y_tar)
        return ad.add(ad.tsum(out.sr_tar), ad.tsum(out.sr_aux))

    return GradCase(leaves, forward, max_per_leaf=12)


BLOCK_BUILDERS = {
    "conv": _case_conv,
    "pixel_shuffle": _case_pixel_shuffle,
    "residual_group": _case_residual_group,
    "m_att": _case_m_att,
    "separable_attention": _case_separable_attention,
    "m_int": _case_m_int,
    "full_forward": _case_full_forward,
}


def register_block(name, builder) -> None:
    """Add or replace a gradient-check case (used by tests for negative controls)."""
    BLOCK_BUILDERS[name] = builder


def list_blocks():
    return sorted(BLOCK_BUILDERS)


# --- checker ----------------------------------------------------------------


def _piece_signature(loss: Tensor):
    """Sign pattern of every piecewise-linear op in the graph below `loss`."""
    signs = []
    for node in toposort(loss):
        if node.op in ("relu", "abs") and node._vjps:
            parent = node._vjps[0][0]
            signs.append(parent.data > 0)
    return signs


def _same_signature(a, b) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(name, step=DEFAULT_STEP, tol=DEFAULT_TOL, seed=0) -> GradReport:
    """Compare analytic and central-difference gradients for one block."""
    if name not in BLOCK_BUILDERS:
        raise ConfigError(f"unknown block {name!r}; registered: {list_blocks()}")
    case = BLOCK_BUILDERS[name](seed)
    for leaf in case.leaves.values():
        leaf.grad = None

    loss = case.forward()
    base_signature = _piece_signature(loss)
    loss.backward()
    analytic = {k: leaf.grad.copy() for k, leaf in case.leaves.items()}

    rng = np.random.default_rng(seed + 12345)
    max_rel = 0.0
    n_checked = 0
    n_refined = 0
    for key, leaf in case.leaves.items():
        flat = leaf.data.reshape(-1)
        aflat = analytic[key].reshape(-1)
        if case.max_per_leaf is not None and flat.size > case.max_per_leaf:
            coords = np.sort(rng.choice(flat.size, size=case.max_per_leaf, replace=False))
        else:
            coords = range(flat.size)
        for i in coords:
            orig = flat[i]
            h = step
            numeric = None
            for refinement in range(8):
                flat[i] = orig + h
                lp = case.forward()
                sig_p = _piece_signature(lp)
                flat[i] = orig - h
                lm = case.forward()
                sig_m = _piece_signature(lm)
                flat[i] = orig
                if _same_signature(sig_p, base_signature) and _same_signature(
                    sig_m, base_signature
                ):
                    numeric = (float(lp.data) - float(lm.data)) / (2.0 * h)
                    if refinement:
                        n_refined += 1
                    break
                h /= 10.0
            if numeric is None:
                # landed exactly on a piece boundary; use the smallest step
                flat[i] = orig + h
                lp = case.forward()
                flat[i] = orig - h
                lm = case.forward()
                flat[i] = orig
                numeric = (float(lp.data) - float(lm.data)) / (2.0 * h)
                n_refined += 1
            a = aflat[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            if rel > max_rel:
                max_rel = rel
            n_checked += 1

    return GradReport(
        block=name,
        max_rel_err=float(max_rel),
        n_checked=n_checked,
        n_refined=n_refined,
        tol=tol,
        step=step,
    )


def run_all(names=None, step=DEFAULT_STEP, tol=DEFAULT_TOL, seed=0):
    """Gradient-check every registered block (or the given subset)."""
    if names is None:
        names = list_blocks()
    return [grad_check(n, step=step, tol=tol, seed=seed) for n in names]
