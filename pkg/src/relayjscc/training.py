"""Joint training of the protocol networks.

One engine drives every protocol: per-batch channel noise is resampled each
step, full-duplex PF runs its in-graph block rollout with batch-statistics
normalization while an exponential moving average of those statistics is
recorded for inference, and adaptive runs resample link conditions per batch
(uniform in dB) and feed them to the conditioning modules as side information.

Every random draw is derived from (seed, role, epoch, step), so runs are
reproducible and resumable without serializing generator state.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from torch import Tensor

from .channel import ChannelRng, LinkState
from .codec import CodecBundle, CodecConfig
from .data import ImageSet
from .protocols import FullDuplexPlan, HalfDuplexPlan, build_bundle, transmit
from .signals import NormStatsTracker, RelayNormStats


@dataclass
class TrainConfig:
    """Optimization settings. lr_patience defaults to 20 epochs; adaptive
    profiles conventionally raise it to 25 (set explicitly)."""

    lr_init: float = 1e-4
    lr_decay: float = 0.9
    lr_patience: int = 20
    early_stop_patience: int = 60
    max_epochs: int = 2000
    batch_size: int = 64
    seed: int = 0
    adaptive: bool = False
    # sampling ranges in dB, used only when adaptive
    c_min_db: float = 0.0
    c_max_db: float = 10.0
    p_min_db: float = 0.0
    p_max_db: float = 6.0

    def __post_init__(self) -> None:
        if not 0.0 < self.lr_decay < 1.0:
            raise ValueError(f"lr_decay must lie in (0,1), got {self.lr_decay}")
        for name in ("lr_patience", "early_stop_patience", "max_epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.adaptive and (self.c_min_db > self.c_max_db or self.p_min_db > self.p_max_db):
            raise ValueError("adaptive sampling ranges must be ordered")


@dataclass
class TrainResult:
    bundle: CodecBundle
    history: list[dict]
    best_epoch: int
    best_val: float
    step_losses: list[float] = field(default_factory=list)
    u_log: list[dict] = field(default_factory=list)
    out_dir: Path | None = None

    @property
    def stats(self) -> RelayNormStats | None:
        return self.bundle.stats


def derive_seed(*parts) -> int:
    """Stable 31-bit seed from a tuple of hashables."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") % (2**31 - 1)


def sample_link_db(cfg: TrainConfig, template: LinkState, gen: torch.Generator) -> tuple[LinkState, dict]:
    """One adaptive draw: gains and powers uniform in dB over the configured
    ranges, everything else taken from the template link."""
    draw = torch.rand(4, generator=gen)
    c_sr_db = cfg.c_min_db + float(draw[0]) * (cfg.c_max_db - cfg.c_min_db)
    c_rd_db = cfg.c_min_db + float(draw[1]) * (cfg.c_max_db - cfg.c_min_db)
    p_s_db = cfg.p_min_db + float(draw[2]) * (cfg.p_max_db - cfg.p_min_db)
    p_r_db = cfg.p_min_db + float(draw[3]) * (cfg.p_max_db - cfg.p_min_db)
    link = LinkState.from_db(
        c_sr_db=c_sr_db,
        c_rd_db=c_rd_db,
        c_sd_db=0.0,
        p_s_db=p_s_db,
        p_r_db=p_r_db,
        sigma_r2=template.sigma_r2,
        sigma_d2=template.sigma_d2,
        fading=template.fading,
        seed=template.seed,
    )
    u = {"c_sr_db": c_sr_db, "c_rd_db": c_rd_db, "p_s_db": p_s_db, "p_r_db": p_r_db}
    return link, u


def _needs_stats(mode: str, plan) -> bool:
    return mode == "fd_pf" and isinstance(plan, FullDuplexPlan) and plan.blocks > 1


def _forward(mode, images, link, bundle, rng, plan, stats, training):
    if mode == "fd_pf":
        return transmit(mode, images, link, bundle, rng, plan=plan, stats=stats, training=training)
    return transmit(mode, images, link, bundle, rng, plan=plan)


def train(
    mode: str,
    train_set: ImageSet,
    val_set: ImageSet,
    link: LinkState,
    plan: HalfDuplexPlan | FullDuplexPlan | None,
    codec_cfg: CodecConfig,
    train_cfg: TrainConfig,
    out_dir: str | Path | None = None,
    resume: bool = False,
) -> TrainResult:
    """Minimize reconstruction MSE end to end, returning the best-validation
    parameters (never the last). Validation uses frozen noise seeds and a
    frozen statistics snapshot so epochs are comparable."""
    out_dir = Path(out_dir) if out_dir is not None else None
    bundle = build_bundle(codec_cfg, train_set.image_shape, mode, plan, seed=train_cfg.seed)
    params = list(bundle.parameters())
    optimizer = torch.optim.Adam(params, lr=train_cfg.lr_init)
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, mode="min", factor=train_cfg.lr_decay, patience=train_cfg.lr_patience, eps=0.0
    )
    tracker = NormStatsTracker() if _needs_stats(mode, plan) else None

    start_epoch = 0
    best_val = math.inf
    best_epoch = -1
    best_state: dict | None = None
    history: list[dict] = []
    step_losses: list[float] = []
    u_log: list[dict] = []

    if resume:
        start_epoch, best_val, best_epoch, best_state = _load_resume(
            out_dir, bundle, optimizer, scheduler, tracker, history
        )

    n = len(train_set)
    steps = max(1, n // train_cfg.batch_size)
    for epoch in range(start_epoch, train_cfg.max_epochs):
        bundle.train()
        t0 = time.monotonic()
        perm = torch.randperm(n, generator=torch.Generator().manual_seed(derive_seed(train_cfg.seed, "perm", epoch)))
        train_loss = 0.0
        for step in range(steps):
            idx = perm[step * train_cfg.batch_size : (step + 1) * train_cfg.batch_size]
            images = train_set.batch(idx)
            if train_cfg.adaptive:
                gen = torch.Generator().manual_seed(derive_seed(train_cfg.seed, "link", epoch, step))
                step_link, u = sample_link_db(train_cfg, link, gen)
                u_log.append({"epoch": epoch, "step": step, **u})
            else:
                step_link = link
            rng = ChannelRng.from_seed(derive_seed(train_cfg.seed, "noise", epoch, step))
            recon, diag = _forward(mode, images, step_link, bundle, rng, plan, None, training=True)
            loss = (recon - images).pow(2).mean()
            loss_val = float(loss.detach())
            if not math.isfinite(loss_val):
                _divergence_dump(out_dir, bundle, epoch, step, loss_val)
                raise RuntimeError(f"training diverged at epoch {epoch} step {step}: loss={loss_val}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            train_loss += loss_val
            step_losses.append(loss_val)
            if tracker is not None:
                tracker.update(torch.stack(diag.relay_raw_blocks))
        train_loss /= steps

        stats_snapshot = tracker.value() if tracker is not None else None
        val_loss = validation_loss(mode, val_set, link, bundle, plan, train_cfg, stats_snapshot)
        scheduler.step(val_loss)
        lr = optimizer.param_groups[0]["lr"]
        history.append(
            {
                "epoch": epoch,
                "train_loss": train_loss,
                "val_loss": val_loss,
                "lr": lr,
                "seconds": time.monotonic() - t0,
            }
        )
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_state = {
                "modules": {k: copy.deepcopy(m.state_dict()) for k, m in bundle.modules().items()},
                "stats": stats_snapshot,
            }
        if out_dir is not None:
            _persist_epoch(out_dir, bundle, optimizer, scheduler, tracker, history, u_log,
                           train_cfg, epoch, best_val, best_epoch, best_state)
        if epoch - best_epoch >= train_cfg.early_stop_patience:
            break

    if best_state is not None:
        for name, module in bundle.modules().items():
            module.load_state_dict(best_state["modules"][name])
        bundle.stats = best_state["stats"]
    bundle.eval()
    if out_dir is not None:
        bundle.save(out_dir / "model_best")
    return TrainResult(
        bundle=bundle,
        history=history,
        best_epoch=best_epoch,
        best_val=best_val,
        step_losses=step_losses,
        u_log=u_log,
        out_dir=out_dir,
    )


def validation_loss(mode, val_set, link, bundle, plan, train_cfg, stats: RelayNormStats | None = None) -> float:
    """Mean squared error over the validation set with frozen noise seeds
    (derived from train_cfg.seed only, so identical across epochs)."""
    bundle.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for start in range(0, len(val_set), train_cfg.batch_size):
            idx = torch.arange(start, min(start + train_cfg.batch_size, len(val_set)))
            images = val_set.batch(idx)
            rng = ChannelRng.from_seed(derive_seed(train_cfg.seed, "val", start))
            recon, _ = _forward(mode, images, link, bundle, rng, plan, stats, training=False)
            total += float((recon - images).pow(2).sum())
            count += images.numel()
    return total / count


def _persist_epoch(out_dir, bundle, optimizer, scheduler, tracker, history, u_log,
                   train_cfg, epoch, best_val, best_epoch, best_state):
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle.save(out_dir / "model_last")
    torch.save(
        {
            "optimizer": optimizer.state_dict(),
            "scheduler": scheduler.state_dict(),
            "tracker": tracker.state_dict() if tracker is not None else None,
            "epoch": epoch,
            "best_val": best_val,
            "best_epoch": best_epoch,
            "best_state": best_state,
        },
        out_dir / "optimizer.pt",
    )
    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "train_loss", "val_loss", "lr", "seconds"])
        writer.writeheader()
        writer.writerows(history)
    if u_log:
        with open(out_dir / "u_log.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["epoch", "step", "c_sr_db", "c_rd_db", "p_s_db", "p_r_db"])
            writer.writeheader()
            writer.writerows(u_log)
    (out_dir / "train_config.json").write_text(json.dumps(asdict(train_cfg), indent=2))


def _load_resume(out_dir, bundle, optimizer, scheduler, tracker, history):
    if out_dir is None or not (out_dir / "optimizer.pt").exists():
        raise FileNotFoundError(f"nothing to resume in {out_dir}")
    blob = torch.load(out_dir / "optimizer.pt", weights_only=False)
    last = CodecBundle.load(out_dir / "model_last")
    for name, module in bundle.modules().items():
        module.load_state_dict(last.modules()[name].state_dict())
    optimizer.load_state_dict(blob["optimizer"])
    scheduler.load_state_dict(blob["scheduler"])
    if tracker is not None and blob["tracker"] is not None:
        tracker.load_state_dict(blob["tracker"])
    with open(out_dir / "metrics.csv") as fh:
        for row in csv.DictReader(fh):
            history.append(
                {
                    "epoch": int(row["epoch"]),
                    "train_loss": float(row["train_loss"]),
                    "val_loss": float(row["val_loss"]),
                    "lr": float(row["lr"]),
                    "seconds": float(row["seconds"]),
                }
            )
    return blob["epoch"] + 1, blob["best_val"], blob["best_epoch"], blob["best_state"]


def _divergence_dump(out_dir, bundle, epoch, step, loss):
    if out_dir is None:
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "epoch": epoch,
            "step": step,
            "loss": loss,
            "modules": {k: m.state_dict() for k, m in bundle.modules().items()},
        },
        out_dir / "divergence.pt",
    )


def train_hd_pf(train_set, val_set, link, plan, codec_cfg, train_cfg, **kw) -> TrainResult:
    """Half-duplex process-and-forward (fixed link)."""
    return train("hd_pf", train_set, val_set, link, plan, codec_cfg, train_cfg, **kw)


def train_fd_pf(train_set, val_set, link, plan, codec_cfg, train_cfg, **kw) -> TrainResult:
    """Full-duplex process-and-forward with the block rollout; adaptive when
    train_cfg.adaptive (per-batch link sampling + side information)."""
    return train("fd_pf", train_set, val_set, link, plan, codec_cfg, train_cfg, **kw)


def train_af(train_set, val_set, link, plan, codec_cfg, train_cfg, **kw) -> TrainResult:
    """Amplify-and-forward: only source and decoder train (no relay network).
    The plan type picks the duplex mode (half-duplex when plan is None)."""
    mode = "fd_af" if isinstance(plan, FullDuplexPlan) else "hd_af"
    return train(mode, train_set, val_set, link, plan, codec_cfg, train_cfg, **kw)


def train_direct(train_set, val_set, link, codec_cfg, train_cfg, **kw) -> TrainResult:
    """Point-to-point baseline."""
    return train("direct", train_set, val_set, link, None, codec_cfg, train_cfg, **kw)
