"""Multi-contrast MR super-resolution at desk scale.

A two-branch attention network that restores a low-resolution target
contrast under the guidance of an aligned high-resolution auxiliary
contrast, together with a physically faithful frequency-domain
degradation simulator, synthetic paired-contrast phantom data, a minimal
reverse-mode autodiff engine, and a training/evaluation harness.
"""

from .autodiff import ParamStore, Tensor
from .errors import ConfigError, DataError, McsrError, NumericError, ShapeError
from .fourier import degrade, fft2c, ifft2c, truncate_center, zero_fill_upsample
from .metrics import error_map, nmse, paired_t_test, psnr, ssim
from .model import ForwardOutput, ModelConfig, MultiContrastSRNet, ablation_config
from .phantom import DatasetManifest, SamplePair, build_dataset, generate_phantom
from .tensorio import load_tensor, save_tensor
from .train import Adam, TrainConfig, desk_model_config, desk_train_config, fit, joint_loss

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "ConfigError",
    "DataError",
    "DatasetManifest",
    "ForwardOutput",
    "McsrError",
    "ModelConfig",
    "MultiContrastSRNet",
    "NumericError",
    "ParamStore",
    "SamplePair",
    "ShapeError",
    "TrainConfig",
    "Tensor",
    "ablation_config",
    "build_dataset",
    "degrade",
    "desk_model_config",
    "desk_train_config",
    "error_map",
    "fft2c",
    "fit",
    "generate_phantom",
    "ifft2c",
    "joint_loss",
    "load_tensor",
    "nmse",
    "paired_t_test",
    "psnr",
    "save_tensor",
    "ssim",
    "truncate_center",
    "zero_fill_upsample",
]
