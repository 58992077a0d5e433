"""Synthetic paired-contrast phantoms and on-disk dataset layout.

A phantom pair shares one random geometry (ellipses and rectangles over a
zero background) while each tissue gets an independent intensity per
contrast, mimicking two acquisitions of the same anatomy. The low-res
target is produced by the frequency-domain degradation in
:mod:`mcsr.fourier`, never by spatial resampling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fourier, tensorio
from .errors import ConfigError, DataError

MIN_TISSUE_INTENSITY = 0.2
MAX_TISSUE_INTENSITY = 1.0
CONTRAST_DIVERGENCE = 0.3


@dataclass
class SamplePair:
    """Aligned (auxiliary HR, target HR, target LR) triple."""

    id: str
    x_aux: np.ndarray
    x_tar: np.ndarray
    y_tar: np.ndarray
    s: int


@dataclass
class DatasetManifest:
    split: str
    seed: int
    s: int
    entries: list = field(default_factory=list)  # dicts {id, aux, tar, lr}

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "scale": self.s,
                "split": self.split,
                "entries": self.entries,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_file(cls, path) -> "DatasetManifest":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}: cannot parse manifest: {exc}") from exc
        for key in ("seed", "scale", "split", "entries"):
            if key not in doc:
                raise DataError(f"{path}: manifest missing key {key!r}")
        m = cls(split=doc["split"], seed=doc["seed"], s=doc["scale"], entries=doc["entries"])
        ids = [e["id"] for e in m.entries]
        if len(ids) != len(set(ids)):
            raise DataError(f"{path}: duplicate sample ids in manifest")
        return m

    def load_sample(self, entry, root) -> SamplePair:
        root = Path(root)
        return SamplePair(
            id=entry["id"],
            x_aux=tensorio.load_tensor(root / entry["aux"]),
            x_tar=tensorio.load_tensor(root / entry["tar"]),
            y_tar=tensorio.load_tensor(root / entry["lr"]),
            s=self.s,
        )

    def load_all(self, root) -> list:
        return [self.load_sample(e, root) for e in self.entries]


def generate_phantom(seed: int, size, n_shapes: int):
    """Deterministic paired-contrast phantom (x_aux, x_tar), both in [0, 1].

    Same shapes in both images; tissue k gets intensity a_k in the
    auxiliary contrast and an independent b_k in the target. At least one
    tissue is forced to diverge by >= 0.3 so the contrasts never collapse
    into each other.
    """
    h, w = size
    if h < 16 or w < 16:
        raise ConfigError(f"phantom size must be at least 16x16, got {h}x{w}")
    if n_shapes < 1:
        raise ConfigError(f"n_shapes must be >= 1, got {n_shapes}")
    rng = np.random.default_rng(seed)

    yy, xx = np.mgrid[:h, :w]
    masks = []
    for _ in range(n_shapes):
        kind = rng.integers(0, 2)
        cy = rng.uniform(0.2 * h, 0.8 * h)
        cx = rng.uniform(0.2 * w, 0.8 * w)
        ry = rng.uniform(0.08 * h, 0.28 * h)
        rx = rng.uniform(0.08 * w, 0.28 * w)
        if kind == 0:
            mask = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
        else:
            mask = (np.abs(xx - cx) <= rx) & (np.abs(yy - cy) <= ry)
        masks.append(mask)

    a = rng.uniform(MIN_TISSUE_INTENSITY, MAX_TISSUE_INTENSITY, size=n_shapes)
    b = rng.uniform(MIN_TISSUE_INTENSITY, MAX_TISSUE_INTENSITY, size=n_shapes)
    if not np.any(np.abs(a - b) >= CONTRAST_DIVERGENCE):
        k = int(rng.integers(0, n_shapes))
        b[k] = a[k] + 0.4 if a[k] <= 0.6 else a[k] - 0.4

    x_aux = np.zeros((h, w), dtype=np.float32)
    x_tar = np.zeros((h, w), dtype=np.float32)
    for mask, ak, bk in zip(masks, a, b):
        x_aux[mask] = ak
        x_tar[mask] = bk
    np.clip(x_aux, 0.0, 1.0, out=x_aux)
    np.clip(x_tar, 0.0, 1.0, out=x_tar)
    return x_aux, x_tar


def split_counts(count: int, ratios=(7, 1, 2)):
    """Floor for train/val, remainder to test."""
    total = sum(ratios)
    n_train = count * ratios[0] // total
    n_val = count * ratios[1] // total
    n_test = count - n_train - n_val
    return n_train, n_val, n_test


def build_dataset(seed, count, size, s, out_dir, ratios=(7, 1, 2), n_shapes=5):
    """Generate `count` phantom pairs, degrade targets, write splits to disk.

    Returns (train, val, test) manifests. Layout under `out_dir`:
    ``<split>.json`` manifests plus one ``.msrt`` tensor file per image.
    Deterministic in `seed`; re-running overwrites byte-identical files.
    """
    if count < 10:
        raise ConfigError(f"dataset needs at least 10 samples, got {count}")
    h, w = size
    fourier.validate_scale(h, w, s)
    out_dir = Path(out_dir)
    (out_dir / "tensors").mkdir(parents=True, exist_ok=True)

    sample_seeds = np.random.SeedSequence(seed).generate_state(count)
    n_train, n_val, n_test = split_counts(count, ratios)
    bounds = [(0, n_train, "train"), (n_train, n_train + n_val, "val"),
              (n_train + n_val, count, "test")]

    manifests = []
    for lo, hi, split in bounds:
        manifest = DatasetManifest(split=split, seed=seed, s=s)
        for i in range(lo, hi):
            sid = f"sample_{i:04d}"
            x_aux, x_tar = generate_phantom(int(sample_seeds[i]), size, n_shapes)
            y_tar = fourier.degrade(x_tar.astype(np.float64), s).astype(np.float32)
            paths = {}
            for tag, img in (("aux", x_aux), ("tar", x_tar), ("lr", y_tar)):
                rel = f"tensors/{sid}_{tag}.msrt"
                tensorio.save_tensor(out_dir / rel, img)
                paths[tag] = rel
            manifest.entries.append({"id": sid, **paths})
        (out_dir / f"{split}.json").write_text(manifest.to_json())
        manifests.append(manifest)
    return tuple(manifests)
