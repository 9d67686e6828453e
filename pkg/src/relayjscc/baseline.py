"""Digital transmission baseline: a conventional compressor sized to the bit
budget the analytic relay rates allow.

The channel contributes a capacity-achieving bit pipe of floor(2 k R*) bits
per image (see rates.bit_budget); a compressor is then binary-searched to the
largest encoding that fits. Any external codec with a CLI can be plugged in
through CompressorSpec command templates.
"""

from __future__ import annotations

import shlex
import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch import Tensor

from .evaluation import EvalReport, mean_ci
from .signals import psnr_per_image, ssim_per_image


@dataclass(frozen=True)
class CompressorSpec:
    """External codec as shell command templates. Placeholders: {input},
    {output}, {quality}. Qualities are integers in [quality_min, quality_max];
    set bigger_quality_bigger_file=False for codecs whose knob is a
    quantization parameter (larger = smaller file)."""

    name: str
    encode_cmd: str
    decode_cmd: str
    quality_min: int
    quality_max: int
    bigger_quality_bigger_file: bool = True

    def __post_init__(self) -> None:
        if self.quality_min >= self.quality_max:
            raise ValueError("quality range must contain at least two levels")
        for attr, required in (("encode_cmd", ("{input}", "{output}", "{quality}")),
                               ("decode_cmd", ("{input}", "{output}"))):
            for ph in required:
                if ph not in getattr(self, attr):
                    raise ValueError(f"{attr} must contain the {ph} placeholder")

    @property
    def executable(self) -> str:
        return shlex.split(self.encode_cmd)[0]


def bpg_spec() -> CompressorSpec:
    """BPG (HEVC stills): -q is a quantizer, so size shrinks as q grows."""
    return CompressorSpec(
        name="bpg",
        encode_cmd="bpgenc -q {quality} -o {output} {input}",
        decode_cmd="bpgdec -o {output} {input}",
        quality_min=0,
        quality_max=51,
        bigger_quality_bigger_file=False,
    )


def jpegshim_spec() -> CompressorSpec:
    """Bundled Pillow shim: JPEG qualities plus a lossless top level."""
    return CompressorSpec(
        name="jpegshim",
        encode_cmd=f"{sys.executable} -m relayjscc.jpegshim encode --input {{input}} "
        f"--output {{output}} --quality {{quality}}",
        decode_cmd=f"{sys.executable} -m relayjscc.jpegshim decode --input {{input}} --output {{output}}",
        quality_min=1,
        quality_max=96,
    )


def check_compressor(spec: CompressorSpec) -> None:
    if shutil.which(spec.executable) is None:
        raise FileNotFoundError(
            f"compressor {spec.name!r} needs {spec.executable!r} on PATH; install it "
            f"or pass a different CompressorSpec (jpegshim_spec() always works)"
        )


def default_spec() -> CompressorSpec:
    """BPG when installed, otherwise the bundled shim."""
    bpg = bpg_spec()
    if shutil.which(bpg.executable) is not None:
        return bpg
    return jpegshim_spec()


def _run(cmd: str) -> None:
    proc = subprocess.run(shlex.split(cmd), capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"compressor command failed: {cmd}\n{proc.stderr}")


def _save_png(image: Tensor, path: Path) -> None:
    from PIL import Image

    arr = (image.clamp(0, 1) * 255.0).round().to(torch.uint8)
    Image.fromarray(arr.permute(1, 2, 0).numpy(), mode="RGB").save(path, format="PNG")


def _load_png(path: Path) -> Tensor:
    from PIL import Image

    import numpy as np

    arr = np.array(Image.open(path).convert("RGB"))
    return torch.from_numpy(arr).permute(2, 0, 1).float() / 255.0


@dataclass
class BudgetResult:
    """Outcome of fitting one image into a bit budget."""

    decoded: Tensor
    bits: int
    quality: int
    budget_bits: int
    at_floor: bool = False  # even the smallest encoding exceeds the budget
    at_ceiling: bool = False  # the best quality still fits
    sizes: dict[int, int] = field(default_factory=dict)  # probed level -> bits


def compress_to_budget(image: Tensor, budget_bits: int, spec: CompressorSpec, workdir: str | Path | None = None) -> BudgetResult:
    """Largest encoding that fits the budget: binary search over quality
    levels (ordered by file size), then a local walk to pin the boundary since
    real codecs are only approximately monotone in their quality knob."""
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"expected one [3,H,W] image, got {tuple(image.shape)}")
    if budget_bits < 0:
        raise ValueError("budget must be nonnegative")
    check_compressor(spec)
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        tmp = Path(tmp)
        src = tmp / "source.png"
        _save_png(image, src)
        sizes: dict[int, int] = {}

        def bits_at(level: int) -> int:
            if level not in sizes:
                quality = level if spec.bigger_quality_bigger_file else spec.quality_max - (level - spec.quality_min)
                out = tmp / f"enc_{level}.bin"
                _run(spec.encode_cmd.format(input=src, output=out, quality=quality))
                sizes[level] = out.stat().st_size * 8
            return sizes[level]

        lo, hi = spec.quality_min, spec.quality_max
        if bits_at(lo) > budget_bits:
            level, at_floor = lo, True
        else:
            while lo < hi:  # largest level with size <= budget
                mid = (lo + hi + 1) // 2
                if bits_at(mid) <= budget_bits:
                    lo = mid
                else:
                    hi = mid - 1
            level = lo
            # walk across any local non-monotonicity
            while level < spec.quality_max and bits_at(level + 1) <= budget_bits:
                level += 1
            while level > spec.quality_min and bits_at(level) > budget_bits:
                level -= 1
            at_floor = bits_at(level) > budget_bits
        quality = level if spec.bigger_quality_bigger_file else spec.quality_max - (level - spec.quality_min)
        enc = tmp / f"enc_{level}.bin"
        dec = tmp / "decoded.png"
        _run(spec.decode_cmd.format(input=enc, output=dec))
        return BudgetResult(
            decoded=_load_png(dec),
            bits=bits_at(level),
            quality=quality,
            budget_bits=budget_bits,
            at_floor=at_floor,
            at_ceiling=level == spec.quality_max,
            sizes=dict(sizes),
        )


def digital_baseline_eval(
    images: Tensor, budget_bits: int, spec: CompressorSpec | None = None, workdir: str | Path | None = None
) -> EvalReport:
    """Compress every image to the budget and report reconstruction quality
    in the same format the learned schemes use."""
    spec = spec or default_spec()
    psnrs, ssims, records = [], [], []
    floors = 0
    for i in range(images.shape[0]):
        result = compress_to_budget(images[i], budget_bits, spec, workdir)
        ref = images[i : i + 1]
        rec = result.decoded.unsqueeze(0)
        p = float(psnr_per_image(ref, rec))
        s = float(ssim_per_image(ref, rec))
        psnrs.append(p)
        ssims.append(s)
        floors += result.at_floor
        records.append({"index": i, "psnr": p, "ssim": s, "bits": result.bits, "quality": result.quality})
    psnr_mean, psnr_ci95 = mean_ci(torch.tensor(psnrs))
    ssim_mean, ssim_ci95 = mean_ci(torch.tensor(ssims))
    return EvalReport(
        psnr_mean=psnr_mean,
        psnr_ci95=psnr_ci95,
        ssim_mean=ssim_mean,
        ssim_ci95=ssim_ci95,
        n_images=images.shape[0],
        records=records,
        metadata={"compressor": spec.name, "budget_bits": budget_bits, "images_over_budget": floors},
    )
