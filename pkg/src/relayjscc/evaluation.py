"""Evaluation: image-quality reports, signal diagnostics, parameter sweeps
with checkpoint caching, and runtime profiling.

Reports are bit-exact reproducible: batches are served in order and every
noise draw derives from the report seed and the batch offset.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import torch
from torch import Tensor

from .channel import ChannelRng, LinkState
from .codec import CodecBundle, CodecConfig, SourceEncoder
from .config import canonical_hash
from .data import ImageSet
from .protocols import (
    FDDiagnostics,
    FullDuplexPlan,
    HalfDuplexPlan,
    HDDiagnostics,
    build_bundle,
    plan_from_config,
    plan_to_config,
    transmit,
)
from .signals import RelayNormStats, psnr_per_image, ssim_per_image
from .training import TrainConfig, derive_seed, train

logger = logging.getLogger(__name__)


@dataclass
class EvalReport:
    """Image-quality summary over one test set: means with 95% normal-theory
    confidence half-widths, per-image records, and signal diagnostics."""

    psnr_mean: float
    psnr_ci95: float
    ssim_mean: float
    ssim_ci95: float
    n_images: int
    records: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "psnr_mean": self.psnr_mean,
            "psnr_ci95": self.psnr_ci95,
            "ssim_mean": self.ssim_mean,
            "ssim_ci95": self.ssim_ci95,
            "n_images": self.n_images,
            "metadata": self.metadata,
            "diagnostics": self.diagnostics,
            "records": self.records,
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def write_csv(self, path: str | Path) -> None:
        """Per-image rows."""
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(self.records[0]))
            writer.writeheader()
            writer.writerows(self.records)

    def write_jsonl(self, path: str | Path) -> None:
        """Per-image records, one JSON object per line."""
        with open(path, "w") as fh:
            for record in self.records:
                fh.write(json.dumps(record) + "\n")


def mean_ci(values: Tensor) -> tuple[float, float]:
    """Mean and 1.96 * standard error (sample std, ddof=1)."""
    values = values.double()
    if values.numel() < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), 1.96 * float(values.std(correction=1)) / values.numel() ** 0.5


def estimate_gamma(e_s1: Tensor, e_s: Tensor) -> float:
    """Fraction of the source energy spent while the relay listens:
    sum(e_s1) / sum(e_s) over the evaluation set."""
    if e_s1.numel() == 0 or e_s.numel() == 0:
        raise ValueError("no energy samples")
    total = float(e_s.sum())
    if total <= 0:
        raise ValueError("zero source energy")
    return float(e_s1.sum()) / total


def complex_correlation(x_r: Tensor, x_s2: Tensor) -> complex:
    """Normalized correlation E[x_r^H x_s2] / sqrt(E||x_s2||^2 E||x_r||^2)."""
    if x_r.shape != x_s2.shape:
        raise ValueError(f"shape mismatch {tuple(x_r.shape)} vs {tuple(x_s2.shape)}")
    e_r = float(x_r.abs().pow(2).sum())
    e_s = float(x_s2.abs().pow(2).sum())
    if e_r <= 0 or e_s <= 0:
        raise ValueError("zero signal energy")
    ip = complex((x_r.conj() * x_s2).sum())
    return ip / (e_r * e_s) ** 0.5


def estimate_beta(x_r: Tensor, x_s2: Tensor) -> float:
    """Coherent-combining coefficient: the real part of the normalized
    relay/source correlation over signals sent in the same channel uses.
    The magnitude is logged as well since a learned scheme may realign phase."""
    rho = complex_correlation(x_r, x_s2)
    logger.debug("relay/source correlation: real %.6f magnitude %.6f", rho.real, abs(rho))
    return rho.real


def _hd_diag_summary(diags: list[HDDiagnostics], k: int) -> dict:
    e_s1 = torch.cat([d.e_s1 for d in diags])
    e_s2 = torch.cat([d.e_s2 for d in diags])
    e_r = torch.cat([d.e_r for d in diags])
    x_r = torch.cat([d.x_r for d in diags])
    x_s2 = torch.cat([d.x_s2 for d in diags])
    # energies are averaged over the full horizon k, the budget convention
    out = {
        "gamma_hat": estimate_gamma(e_s1, e_s1 + e_s2),
        "e_s_per_use": float((e_s1 + e_s2).mean()) / k,
        "e_r_per_use": float(e_r.mean()) / k,
    }
    if float(x_s2.abs().sum()) > 0 and float(x_r.abs().sum()) > 0:
        rho = complex_correlation(x_r, x_s2)
        out["beta_hat"] = rho.real
        out["beta_hat_abs"] = abs(rho)
    return out


def _fd_diag_summary(diags: list[FDDiagnostics], k: int) -> dict:
    e_s = torch.cat([d.e_s for d in diags])
    e_r = torch.cat([d.e_r for d in diags])
    blocks = diags[0].blocks
    out = {
        "e_s_per_use": float(e_s.mean()) / k,
        "e_r_per_use": float(e_r.mean()) / k,
    }
    if blocks > 1:
        # the relay's transmissions (blocks 2..B; slot 1 is silent) overlap
        # the source's blocks 2..B
        x_r = torch.cat([torch.cat(d.x_r_blocks[1:], dim=-1) for d in diags])
        x_s = torch.cat([torch.cat(d.x_s_blocks[1:], dim=-1) for d in diags])
        rho = complex_correlation(x_r, x_s)
        out["beta_hat"] = rho.real
        out["beta_hat_abs"] = abs(rho)
    return out


def evaluate(
    mode: str,
    test_set: ImageSet | Tensor,
    link: LinkState,
    bundle: CodecBundle,
    plan: HalfDuplexPlan | FullDuplexPlan | None = None,
    stats: RelayNormStats | None = None,
    relay_norm: str | RelayNormStats = "exact",
    seed: int = 0,
    batch_size: int = 64,
    metadata: dict | None = None,
) -> EvalReport:
    """Run the protocol over the whole set and report quality + diagnostics."""
    if isinstance(test_set, Tensor):
        test_set = ImageSet(test_set)
    bundle.eval()
    psnrs, ssims, diags = [], [], []
    with torch.no_grad():
        for start in range(0, len(test_set), batch_size):
            idx = torch.arange(start, min(start + batch_size, len(test_set)))
            images = test_set.batch(idx)
            rng = ChannelRng.from_seed(derive_seed(seed, "eval", start))
            recon, diag = transmit(
                mode, images, link, bundle, rng, plan=plan, stats=stats, relay_norm=relay_norm
            )
            psnrs.append(psnr_per_image(images, recon))
            ssims.append(ssim_per_image(images, recon))
            diags.append(diag)
    psnr_t, ssim_t = torch.cat(psnrs), torch.cat(ssims)
    psnr_mean, psnr_ci95 = mean_ci(psnr_t)
    ssim_mean, ssim_ci95 = mean_ci(ssim_t)
    k = diags[0].k
    diagnostics = (
        _hd_diag_summary(diags, k) if isinstance(diags[0], HDDiagnostics) else _fd_diag_summary(diags, k)
    )
    records = [
        {"index": i, "psnr": float(p), "ssim": float(s)}
        for i, (p, s) in enumerate(zip(psnr_t, ssim_t))
    ]
    meta = {"mode": mode, "seed": seed, "link": link.to_config(), **plan_to_config(mode, plan)}
    meta.update(metadata or {})
    return EvalReport(
        psnr_mean=psnr_mean,
        psnr_ci95=psnr_ci95,
        ssim_mean=ssim_mean,
        ssim_ci95=ssim_ci95,
        n_images=len(test_set),
        records=records,
        metadata=meta,
        diagnostics=diagnostics,
    )


# ---- sweeps with checkpoint caching ----------------------------------------


def get_or_train(
    mode: str,
    plan_cfg: dict,
    train_set: ImageSet,
    val_set: ImageSet,
    link: LinkState,
    codec_cfg: CodecConfig,
    train_cfg: TrainConfig,
    cache_dir: str | Path | None = None,
) -> CodecBundle:
    """Train one model (or load it from the cache keyed by the full config)."""
    plan = plan_from_config(mode, codec_cfg, plan_cfg)
    out_dir = None
    if cache_dir is not None:
        key = canonical_hash(
            {
                "mode": mode,
                "plan": plan_to_config(mode, plan),
                "codec": codec_cfg.to_dict(),
                "train": train_cfg.__dict__,
                "link": link.to_config(),
                "n_train": len(train_set),
            }
        )
        out_dir = Path(cache_dir) / f"{mode}-{key[:12]}"
        if (out_dir / "model_best" / "manifest.json").exists():
            return CodecBundle.load(out_dir / "model_best")
    result = train(mode, train_set, val_set, link, plan, codec_cfg, train_cfg, out_dir=out_dir)
    return result.bundle


def _sweep(param, values, plan_cfgs, mode, sets, link, codec_cfg, train_cfg, cache_dir, eval_seed):
    train_set, val_set, test_set = sets
    rows = []
    for value, plan_cfg in zip(values, plan_cfgs):
        bundle = get_or_train(mode, plan_cfg, train_set, val_set, link, codec_cfg, train_cfg, cache_dir)
        plan = plan_from_config(mode, codec_cfg, plan_cfg)
        report = evaluate(
            mode, test_set, link, bundle, plan=plan, stats=bundle.stats, seed=eval_seed,
            metadata={param: value},
        )
        rows.append(
            {
                param: value,
                "psnr": report.psnr_mean,
                "psnr_ci95": report.psnr_ci95,
                "ssim": report.ssim_mean,
                "ssim_ci95": report.ssim_ci95,
                "report": report,
            }
        )
    return rows


def sweep_alpha(alphas, sets, link, codec_cfg, train_cfg, cache_dir=None, eval_seed=0) -> list[dict]:
    """Half-duplex listening-fraction sweep (one trained model per alpha)."""
    return _sweep(
        "alpha", list(alphas), [{"alpha": a} for a in alphas], "hd_pf",
        sets, link, codec_cfg, train_cfg, cache_dir, eval_seed,
    )


def sweep_blocks(blocks, sets, link, codec_cfg, train_cfg, cache_dir=None, eval_seed=0) -> list[dict]:
    """Full-duplex block-count sweep; B=1 degenerates to the direct link."""
    return _sweep(
        "B", list(blocks), [{"B": b} for b in blocks], "fd_pf",
        sets, link, codec_cfg, train_cfg, cache_dir, eval_seed,
    )


def sweep_memory(memories, blocks, sets, link, codec_cfg, train_cfg, cache_dir=None, eval_seed=0) -> list[dict]:
    """Relay memory sweep at fixed block count."""
    return _sweep(
        "t", list(memories), [{"B": blocks, "t": t} for t in memories], "fd_pf",
        sets, link, codec_cfg, train_cfg, cache_dir, eval_seed,
    )


def write_sweep_csv(rows: list[dict], path: str | Path) -> None:
    fields = [k for k in rows[0] if k != "report"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


def sweep_argmax(rows: list[dict], param: str) -> float:
    """The swept value with the best mean PSNR."""
    return max(rows, key=lambda r: r["psnr"])[param]


def check_graceful_degradation(
    values: list[float], psnrs: list[float], max_inversions: int = 1, tolerance_db: float = 0.05
) -> tuple[bool, int]:
    """Quality should not drop as the link improves: count PSNR inversions
    larger than tolerance along increasing link quality."""
    if len(values) < 4:
        raise ValueError("need at least 4 sweep points")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("sweep values must be strictly increasing")
    inversions = sum(1 for a, b in zip(psnrs, psnrs[1:]) if b < a - tolerance_db)
    return inversions <= max_inversions, inversions


# ---- runtime profiling ------------------------------------------------------


def _time_fn(fn, repeats: int) -> dict:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    times.sort()
    return {"median_s": times[len(times) // 2], "min_s": times[0], "repeats": repeats}


def timing_report(
    bundle: CodecBundle, images: Tensor, link: LinkState, repeats: int = 5
) -> list[dict]:
    """Per-stage forward cost at this bundle's shapes (batch included in each
    row). The relay row times the network on inputs shaped like its protocol
    feed; AF bundles have no relay row."""
    cfg = bundle.cfg
    n = images.shape[0]
    u = link.side_info_db() if cfg.la_enabled else None
    rows = []
    with torch.no_grad():
        row = _time_fn(lambda: bundle.source(images, u), repeats)
        rows.append({"stage": "encode", "batch": n, "per_image_s": row["median_s"] / n, **row})
        if bundle.relay is not None:
            relay_in = torch.randn(n, cfg.tokens, bundle.relay.backbone.in_width)
            row = _time_fn(lambda: bundle.relay(relay_in, u), repeats)
            rows.append({"stage": "relay", "batch": n, "per_image_s": row["median_s"] / n, **row})
        decoder_in = torch.randn(n, cfg.tokens, cfg.c_star)
        row = _time_fn(lambda: bundle.decoder(decoder_in, u), repeats)
        rows.append({"stage": "decode", "batch": n, "per_image_s": row["median_s"] / n, **row})
    return rows


def attention_scaling_probe(
    cfg: CodecConfig, image_shape: tuple[int, int, int], batch: int = 8, repeats: int = 5
) -> dict:
    """Empirical cost growth when the image area is quadrupled at a fixed
    per-token size (so the token count quadruples): superlinear scaling in
    token count means the time ratio must exceed the batch-linear factor."""
    ch, h, w = image_shape
    big_cfg = replace(cfg, p=2 * cfg.p)
    big_shape = (ch, 2 * h, 2 * w)
    small = SourceEncoder(cfg, image_shape)
    big = SourceEncoder(big_cfg, big_shape)
    x_small = torch.rand(batch, *image_shape)
    x_big = torch.rand(batch, *big_shape)
    with torch.no_grad():
        small(x_small), big(x_big)  # warm up
        t_small = _time_fn(lambda: small(x_small), repeats)
        t_big = _time_fn(lambda: big(x_big), repeats)
    return {
        "tokens_small": cfg.tokens,
        "tokens_big": big_cfg.tokens,
        "median_small_s": t_small["median_s"],
        "median_big_s": t_big["median_s"],
        "ratio": t_big["median_s"] / t_small["median_s"],
    }
