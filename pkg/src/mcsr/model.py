"""Two-branch multi-contrast super-resolution network.

The target branch pre-upsamples the low-res input with a sub-pixel
convolution so both branches share spatial size, then runs a cascade of
residual groups. At each stage the auxiliary branch can feed the target
branch either through separable attention or through plain summation;
stage features can be blended by multi-stage integration, and the final
features can pass a channel-spatial attention gate. Each of these paths
is an independent config switch, giving the ablation lattice Ab1..Ab4
plus the full model.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import blocks
from .autodiff import ParamStore, Tensor
from .errors import ConfigError, ShapeError

ABLATION_FLAGS = {
    # name -> (use_aux, use_m_int, use_m_att, use_sep_attention)
    "Ab1": (False, False, False, False),
    "Ab2": (False, False, True, False),
    "Ab3": (True, False, True, False),
    "Ab4": (True, True, True, False),
    "full": (True, True, True, True),
}


@dataclass
class ModelConfig:
    """Architecture hyperparameters and ablation switches."""

    s: int = 2
    L: int = 6
    C: int = 32
    B: int = 2
    use_aux: bool = True
    use_sep_attention: bool = True
    use_m_int: bool = True
    use_m_att: bool = True
    alpha: float = 0.7

    def __post_init__(self):
        if self.L < 1:
            raise ConfigError(f"L must be >= 1, got {self.L}")
        if self.C < 4:
            raise ConfigError(f"C must be >= 4, got {self.C}")
        if self.B < 1:
            raise ConfigError(f"B must be >= 1, got {self.B}")
        if self.s < 1:
            raise ConfigError(f"s must be >= 1, got {self.s}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.use_sep_attention and not self.use_aux:
            raise ConfigError("use_sep_attention requires use_aux")
        if self.use_m_int and not self.use_aux and self.L < 2:
            raise ConfigError("multi-stage integration needs at least 2 stage features")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**doc)


def ablation_config(name: str, **overrides) -> ModelConfig:
    """Config for one ablation variant: Ab1..Ab4 or the full model."""
    if name not in ABLATION_FLAGS:
        raise ConfigError(f"unknown ablation variant {name!r}; choose from {sorted(ABLATION_FLAGS)}")
    use_aux, use_m_int, use_m_att, use_sep = ABLATION_FLAGS[name]
    return ModelConfig(
        use_aux=use_aux,
        use_m_int=use_m_int,
        use_m_att=use_m_att,
        use_sep_attention=use_sep,
        **overrides,
    )


@dataclass
class ForwardOutput:
    sr_tar: Tensor
    sr_aux: Tensor | None = None
    diagnostics: dict | None = None


class MultiContrastSRNet:
    """The assembled network over a flat parameter store."""

    def __init__(self, cfg: ModelConfig, seed: int = 0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        self.store = ParamStore()
        rng = np.random.default_rng(seed)
        c, s, k = cfg.C, cfg.s, 3

        if cfg.use_aux:
            self.head_aux = blocks.Conv2d(self.store, "head_aux", 1, c, k, rng, dtype)
        self.head_tar = blocks.Conv2d(self.store, "head_tar", 1, c * s * s, k, rng, dtype)

        self.rg_aux, self.sep, self.rg_tar = [], [], []
        for l in range(1, cfg.L + 1):
            if cfg.use_aux:
                self.rg_aux.append(
                    blocks.ResidualGroup(self.store, f"stage{l}.rg_aux", c, rng, cfg.B, dtype)
                )
            if cfg.use_sep_attention:
                self.sep.append(
                    blocks.SeparableAttention(self.store, f"stage{l}.sep", c, rng, dtype)
                )
            self.rg_tar.append(
                blocks.ResidualGroup(self.store, f"stage{l}.rg_tar", c, rng, cfg.B, dtype)
            )

        if cfg.use_m_att:
            self.att_tar = blocks.ChannelSpatialAttention(self.store, "att_tar", rng, dtype=dtype)
            if cfg.use_aux:
                self.att_aux = blocks.ChannelSpatialAttention(self.store, "att_aux", rng, dtype=dtype)

        if cfg.use_m_int:
            n_stages = 2 * cfg.L if cfg.use_aux else cfg.L
            self.blend_proj = blocks.Conv2d(
                self.store, "blend_proj", n_stages * c, c, 1, rng, dtype
            )

        self.tail_tar = blocks.Conv2d(self.store, "tail_tar", c, 1, k, rng, dtype)
        if cfg.use_aux:
            self.tail_aux = blocks.Conv2d(self.store, "tail_aux", c, 1, k, rng, dtype)

    # -----------------------------------------------------------------
    def _as_tensor(self, x) -> Tensor:
        if isinstance(x, Tensor):
            return x
        return Tensor(np.asarray(x, dtype=self.dtype))

    def extract_features(self, x_aux, y_tar):
        """Initial features: 3x3 conv per branch, sub-pixel upsampling on target."""
        cfg = self.cfg
        y_tar = self._as_tensor(y_tar)
        if y_tar.data.ndim != 4 or y_tar.shape[1] != 1:
            raise ShapeError(f"y_tar must be (N, 1, h, w), got {y_tar.shape}")
        f_tar0 = ad.pixel_shuffle(self.head_tar(y_tar), cfg.s)
        f_aux0 = None
        if cfg.use_aux:
            x_aux = self._as_tensor(x_aux)
            if x_aux.data.ndim != 4 or x_aux.shape[1] != 1:
                raise ShapeError(f"x_aux must be (N, 1, H, W), got {x_aux.shape}")
            if x_aux.shape[2:] != f_tar0.shape[2:]:
                raise ShapeError(
                    f"auxiliary size {x_aux.shape[2:]} does not match upsampled "
                    f"target size {f_tar0.shape[2:]}"
                )
            f_aux0 = self.head_aux(x_aux)
        return f_aux0, f_tar0

    def forward(self, x_aux, y_tar, capture_diagnostics: bool = False) -> ForwardOutput:
        cfg = self.cfg
        f_aux, f_tar0 = self.extract_features(x_aux, y_tar)
        f_tar = f_tar0

        stage_feats = []
        attention_pairs = [] if capture_diagnostics else None
        for l in range(cfg.L):
            if cfg.use_aux:
                f_aux = self.rg_aux[l](f_aux)
            if cfg.use_sep_attention:
                fused = self.sep[l](f_aux, f_tar, capture=attention_pairs)
                f_tar = self.rg_tar[l](fused)
            elif cfg.use_aux:
                f_tar = self.rg_tar[l](ad.add(f_aux, f_tar))
            else:
                f_tar = self.rg_tar[l](f_tar)
            if cfg.use_aux:
                stage_feats.append(f_aux)
            stage_feats.append(f_tar)

        g_tar = self.att_tar(f_tar) if cfg.use_m_att else f_tar
        recon = ad.add(f_tar0, g_tar)

        affinity = None
        if cfg.use_m_int:
            n, c = f_tar.shape[0], cfg.C
            h, w = f_tar.shape[2], f_tar.shape[3]
            stacked = ad.concat(
                [ad.reshape(f, (n, 1, c, h, w)) for f in stage_feats], axis=1
            )
            blended, affinity = blocks.multi_stage_integration(stacked)
            recon = ad.add(recon, self.blend_proj(blended))

        sr_tar = self.tail_tar(recon)

        sr_aux = None
        if cfg.use_aux:
            g_aux = self.att_aux(f_aux) if cfg.use_m_att else f_aux
            sr_aux = self.tail_aux(g_aux)

        diagnostics = None
        if capture_diagnostics:
            diagnostics = {
                "attention_pairs": attention_pairs,
                "affinity": affinity.detach() if affinity is not None else None,
            }
        return ForwardOutput(sr_tar=sr_tar, sr_aux=sr_aux, diagnostics=diagnostics)

    # checkpointing ----------------------------------------------------
    def save_checkpoint(self, dirpath) -> None:
        dirpath = Path(dirpath)
        dirpath.mkdir(parents=True, exist_ok=True)
        (dirpath / "model_config.json").write_text(
            json.dumps(self.cfg.to_dict(), indent=2, sort_keys=True)
        )
        self.store.save(dirpath / "params")

    @classmethod
    def load_checkpoint(cls, dirpath, dtype=np.float32) -> "MultiContrastSRNet":
        dirpath = Path(dirpath)
        cfg = ModelConfig.from_dict(json.loads((dirpath / "model_config.json").read_text()))
        model = cls(cfg, dtype=dtype)
        model.store.load(dirpath / "params")
        return model
