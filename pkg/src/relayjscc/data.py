"""Image datasets: tiny synthetic smooth random fields for desk-scale work
and CIFAR-10 for paper-scale runs.

Images are kept as in-memory tensors (uint8 for CIFAR, float32 for synthetic)
and served as float batches in [0, 1]. The CIFAR loader imports torchvision
lazily so the dependency stays optional.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import Tensor

DATA_ROOT_ENV = "RELAYJSCC_DATA_ROOT"


@dataclass
class ImageSet:
    """A fixed set of images addressed by integer index."""

    data: Tensor  # [N, C, H, W], uint8 or float in [0,1]

    def __post_init__(self) -> None:
        if self.data.ndim != 4:
            raise ValueError(f"expected [N,C,H,W], got {tuple(self.data.shape)}")

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.data.shape[1:])

    def batch(self, idx: Tensor | list[int]) -> Tensor:
        out = self.data[idx]
        if out.dtype == torch.uint8:
            return out.float() / 255.0
        return out

    def all(self) -> Tensor:
        return self.batch(torch.arange(len(self)))

    @property
    def pixel_variance(self) -> float:
        return float(self.all().var(correction=0))


def synthetic_images(n: int, shape: tuple[int, int, int] = (3, 8, 8), seed: int = 0) -> Tensor:
    """Smooth random fields in [0, 1]: coarse noise upsampled bilinearly with
    a little fine-grained texture, then min-max normalized per image. Smooth
    content gives small models something learnable at tiny resolutions."""
    c, h, w = shape
    g = torch.Generator().manual_seed(seed)
    coarse = torch.rand(n, c, max(2, h // 4), max(2, w // 4), generator=g)
    field = F.interpolate(coarse, size=(h, w), mode="bilinear", align_corners=False)
    field = field + 0.08 * torch.randn(n, c, h, w, generator=g)
    flat = field.reshape(n, -1)
    lo = flat.min(dim=1, keepdim=True).values
    hi = flat.max(dim=1, keepdim=True).values
    flat = (flat - lo) / (hi - lo).clamp_min(1e-8)
    return flat.reshape(n, c, h, w)


def synthetic_split(
    n_train: int = 512,
    n_val: int = 128,
    n_test: int = 128,
    shape: tuple[int, int, int] = (3, 8, 8),
    seed: int = 0,
) -> tuple[ImageSet, ImageSet, ImageSet]:
    """Disjoint train/val/test draws of the synthetic source."""
    return (
        ImageSet(synthetic_images(n_train, shape, seed=seed * 3 + 0)),
        ImageSet(synthetic_images(n_val, shape, seed=seed * 3 + 1)),
        ImageSet(synthetic_images(n_test, shape, seed=seed * 3 + 2)),
    )


def _data_root(root: str | None) -> str:
    root = root or os.environ.get(DATA_ROOT_ENV)
    if root is None:
        raise FileNotFoundError(
            f"no dataset root given; pass root= or set ${DATA_ROOT_ENV}"
        )
    return root


def cifar_split(
    root: str | None = None,
    val_size: int = 5000,
    seed: int = 0,
    download: bool = False,
) -> tuple[ImageSet, ImageSet, ImageSet]:
    """CIFAR-10 as (train, val, test) with a seed-fixed 45000/5000 split of
    the 50000 training images. Labels are discarded (source coding only)."""
    try:
        from torchvision.datasets import CIFAR10
    except ImportError as exc:
        raise ImportError(
            "CIFAR-10 needs torchvision; install the 'cifar' extra"
        ) from exc
    root = _data_root(root)
    train_raw = CIFAR10(root=root, train=True, download=download)
    test_raw = CIFAR10(root=root, train=False, download=download)
    # [N,H,W,C] uint8 -> [N,C,H,W]
    train_data = torch.from_numpy(train_raw.data).permute(0, 3, 1, 2).contiguous()
    test_data = torch.from_numpy(test_raw.data).permute(0, 3, 1, 2).contiguous()
    perm = torch.randperm(train_data.shape[0], generator=torch.Generator().manual_seed(seed))
    val_idx, train_idx = perm[:val_size], perm[val_size:]
    return ImageSet(train_data[train_idx]), ImageSet(train_data[val_idx]), ImageSet(test_data)


def load_dataset(spec: dict) -> tuple[ImageSet, ImageSet, ImageSet]:
    """Dataset from a config mapping: {"name": "synthetic", "n_train": ...,
    "shape": [C,H,W], "seed": ...} or {"name": "cifar10", "root": ...}."""
    spec = dict(spec)
    name = spec.pop("name")
    if name == "synthetic":
        if "shape" in spec:
            spec["shape"] = tuple(spec["shape"])
        return synthetic_split(**spec)
    if name == "cifar10":
        return cifar_split(**spec)
    raise ValueError(f"unknown dataset {name!r}")
