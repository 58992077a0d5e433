"""Command-line entry point.

Subcommands: gen-data, train, eval, ablate, gradcheck. All outputs are
JSON (reports, logs) or PNG (images). Exit codes: 0 success, 2 config
error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fourier, gradcheck, metrics, phantom, train
from .errors import ConfigError, DataError, NumericError
from .model import ModelConfig, MultiContrastSRNet, ablation_config
from .train import TrainConfig, desk_model_config, desk_train_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class RunConfig:
    """Model + training configuration parsed from one JSON document."""

    def __init__(self, model_cfg: ModelConfig, train_cfg: TrainConfig):
        self.model = model_cfg
        self.train = train_cfg

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        unknown = set(doc) - {"model", "train"}
        if unknown:
            raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
        return cls(
            ModelConfig.from_dict(doc.get("model", {})),
            TrainConfig.from_dict(doc.get("train", {})),
        )

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise DataError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config root must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "train": self.train.to_dict()}

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _aggregate(rows, keys=("psnr", "ssim", "nmse")):
    agg = {}
    for key in keys:
        values = [r[key] for r in rows if key in r]
        if values:
            with np.errstate(invalid="ignore"):  # std of +inf sentinels is nan
                agg[f"{key}_mean"] = float(np.mean(values))
                agg[f"{key}_std"] = float(np.std(values))
    return agg


# --- commands ----------------------------------------------------------------


def cmd_gen_data(args) -> int:
    size = (args.size[0], args.size[1])
    phantom.build_dataset(
        args.seed, args.count, size, args.scale, args.out, n_shapes=args.shapes
    )
    print(json.dumps({"out": str(args.out), "count": args.count, "scale": args.scale}))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = RunConfig.from_file(args.config)
    out_dir = Path(args.out)
    model = MultiContrastSRNet(cfg.model, seed=cfg.train.seed)
    train_samples = train.load_split(args.data, "train")
    val_samples = train.load_split(args.data, "val")
    result = train.fit(model, train_samples, val_samples, cfg.train, out_dir=out_dir)
    (out_dir / "run_config.json").write_text(cfg.canonical_json() + "\n")
    print(
        json.dumps(
            {
                "checkpoint": result.checkpoint_dir,
                "log": result.log_path,
                "best_val_psnr": result.best_val_psnr,
                "steps": len(result.step_losses),
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def _export_sample_images(out_dir, sample, sr, diagnostics=None):
    metrics.save_png(out_dir / f"{sample.id}_sr.png", sr)
    err = metrics.error_map(sr, sample.x_tar.astype(np.float64))
    metrics.save_png(out_dir / f"{sample.id}_error.png", err)
    if diagnostics is not None and diagnostics.get("attention_pairs"):
        for l, pair in enumerate(diagnostics["attention_pairs"], start=1):
            a_h = pair.a_h.data[0].mean(axis=0)
            a_l = pair.a_l.data[0].mean(axis=0)
            metrics.save_png(out_dir / f"{sample.id}_ah_stage{l}.png", a_h)
            metrics.save_png(out_dir / f"{sample.id}_al_stage{l}.png", a_l)


def cmd_eval(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = train.load_split(args.data, args.split)
    if args.predict_gt:
        model = None
    else:
        model = MultiContrastSRNet.load_checkpoint(args.checkpoint)

    rows = []
    for sample in samples:
        sr_aux = None
        if args.predict_gt:
            sr = sample.x_tar.astype(np.float64)
            diagnostics = None
        else:
            out = model.forward(
                sample.x_aux[None, None],
                sample.y_tar[None, None],
                capture_diagnostics=args.export_diagnostics,
            )
            sr = np.clip(out.sr_tar.data[0, 0].astype(np.float64), 0.0, 1.0)
            if out.sr_aux is not None:
                sr_aux = np.clip(out.sr_aux.data[0, 0].astype(np.float64), 0.0, 1.0)
            diagnostics = out.diagnostics
        gt = sample.x_tar.astype(np.float64)
        row = {
            "id": sample.id,
            "psnr": metrics.psnr(sr, gt),
            "ssim": metrics.ssim(sr, gt),
            "nmse": metrics.nmse(sr, gt),
        }
        if args.include_aux and sr_aux is not None:
            gt_aux = sample.x_aux.astype(np.float64)
            row["aux_psnr"] = metrics.psnr(sr_aux, gt_aux)
            row["aux_ssim"] = metrics.ssim(sr_aux, gt_aux)
        rows.append(row)
        _export_sample_images(out_dir, sample, sr, diagnostics)

    report = {"split": args.split, "samples": rows, "aggregate": _aggregate(rows)}
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    print(json.dumps(report["aggregate"], sort_keys=True))
    return EXIT_OK


def _profile_configs(profile, seed, variant):
    if profile == "desk":
        model_cfg = desk_model_config()
        train_cfg = desk_train_config(seed=seed)
    elif profile == "reference":
        model_cfg = ModelConfig()
        train_cfg = TrainConfig(seed=seed)
    else:
        raise ConfigError(f"unknown profile {profile!r}; choose desk or reference")
    flags = dict(
        s=model_cfg.s, L=model_cfg.L, C=model_cfg.C, B=model_cfg.B, alpha=model_cfg.alpha
    )
    return ablation_config(variant, **flags), train_cfg


VARIANTS = ("Ab1", "Ab2", "Ab3", "Ab4", "full")


def cmd_ablate(args) -> int:
    out_path = Path(args.out)
    train_samples = train.load_split(args.data, "train")
    val_samples = train.load_split(args.data, "val")
    test_samples = train.load_split(args.data, "test")

    rows = []
    per_sample = {}  # (variant) -> dict keyed by (seed, id)
    for variant in VARIANTS:
        per_sample[variant] = {}
        for seed in args.seeds:
            model_cfg, train_cfg = _profile_configs(args.profile, seed, variant)
            if args.steps is not None:
                train_cfg.max_steps = args.steps
            model = MultiContrastSRNet(model_cfg, seed=seed)
            train.fit(model, train_samples, val_samples, train_cfg)
            sample_rows = train.evaluate_samples(model, test_samples)
            for r in sample_rows:
                per_sample[variant][(seed, r["id"])] = r
            rows.append(
                {
                    "variant": variant,
                    "seed": seed,
                    **_aggregate(sample_rows),
                    "samples": sample_rows,
                }
            )

    # paired significance: full vs Ab1 over matched (seed, sample) pairs
    keys = sorted(per_sample["full"])
    t_tests = {}
    for metric_key in ("psnr", "ssim"):
        a = np.array([per_sample["full"][k][metric_key] for k in keys])
        b = np.array([per_sample["Ab1"][k][metric_key] for k in keys])
        t, p = metrics.paired_t_test(a, b)
        t_tests[metric_key] = {"t": t, "p": p}

    baseline_rows = []
    for sample in test_samples:
        up = np.clip(fourier.zero_fill_upsample(sample.y_tar.astype(np.float64), sample.s), 0.0, 1.0)
        gt = sample.x_tar.astype(np.float64)
        baseline_rows.append(
            {
                "id": sample.id,
                "psnr": metrics.psnr(up, gt),
                "ssim": metrics.ssim(up, gt),
                "nmse": metrics.nmse(up, gt),
            }
        )

    report = {
        "profile": args.profile,
        "seeds": list(args.seeds),
        "rows": rows,
        "t_tests_full_vs_Ab1": t_tests,
        "zero_fill_baseline": {
            "samples": baseline_rows,
            **_aggregate(baseline_rows),
        },
    }
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(report, indent=2, sort_keys=True))
    print(json.dumps([{k: r[k] for k in ("variant", "seed", "psnr_mean")} for r in rows]))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    names = gradcheck.list_blocks() if args.blocks == ["all"] else args.blocks
    reports = [gradcheck.grad_check(name, seed=args.seed) for name in names]
    for rep in reports:
        status = "pass" if rep.passed else "FAIL"
        print(f"{status} {rep.block}: max_rel_err={rep.max_rel_err:.3e} (tol {rep.tol:g})")
    if args.out:
        Path(args.out).write_text(
            json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True)
        )
    if not all(r.passed for r in reports):
        raise NumericError("gradient check failed for at least one block")
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcsr",
        description="Multi-contrast MR super-resolution: data, training, evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a phantom dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--size", type=int, nargs=2, default=[64, 64], metavar=("H", "W"))
    p.add_argument("--scale", type=int, default=2)
    p.add_argument("--shapes", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--export-diagnostics", action="store_true")
    p.add_argument(
        "--include-aux",
        action="store_true",
        help="also report auxiliary-branch restoration metrics (joint SR mode)",
    )
    p.add_argument(
        "--predict-gt",
        action="store_true",
        help="debug: score the ground truth against itself",
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and compare the ablation variants")
    p.add_argument("--data", required=True)
    p.add_argument("--profile", default="desk", choices=["desk", "reference"])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference checks of all blocks")
    p.add_argument("--blocks", nargs="+", default=["all"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(json.dumps({"error": "data", "message": str(exc)}), file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(json.dumps({"error": "numeric", "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
