"""Symbol mapping, power normalization and reconstruction metrics.

Real network outputs are mapped to complex channel symbols by pairing
consecutive values, transmit signals are scaled to meet average power
constraints exactly, and reconstructions are scored with PSNR/SSIM.
All functions are batched over a leading image dimension and preserve
the input dtype/device.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import torch
from torch import Tensor

PSNR_CAP_DB = 100.0
SIGMA_FLOOR = 1e-6


def interleave_to_complex(x: Tensor) -> Tensor:
    """Pair consecutive entries of the last axis: even indices become real
    parts, odd indices imaginary parts. Last axis must have even length."""
    if x.shape[-1] % 2 != 0:
        raise ValueError(f"last axis must be even, got {x.shape[-1]}")
    return torch.complex(x[..., 0::2], x[..., 1::2])


def complex_to_interleaved(z: Tensor) -> Tensor:
    """Inverse of :func:`interleave_to_complex`."""
    out = torch.stack((z.real, z.imag), dim=-1)
    return out.reshape(*z.shape[:-1], 2 * z.shape[-1])


def symbol_map(x: Tensor) -> Tensor:
    """Map a real token matrix [..., p2, m] to complex symbols [..., p2*m/2].

    Rows are flattened in order and consecutive values paired, so for even m
    the first m/2 symbols come from row 0; odd m is allowed as long as the
    total entry count is even (pairs then straddle row boundaries).
    """
    if (x.shape[-2] * x.shape[-1]) % 2 != 0:
        raise ValueError(f"matrix size {tuple(x.shape[-2:])} has odd entry count")
    flat = x.reshape(*x.shape[:-2], x.shape[-2] * x.shape[-1])
    return interleave_to_complex(flat)


def symbol_demap(z: Tensor, p2: int) -> Tensor:
    """Inverse of :func:`symbol_map`: complex [..., n] -> real [..., p2, 2n/p2]."""
    n = z.shape[-1]
    if (2 * n) % p2 != 0:
        raise ValueError(f"cannot reshape {n} symbols into {p2} rows")
    flat = complex_to_interleaved(z)
    return flat.reshape(*z.shape[:-1], p2, 2 * n // p2)


def power_normalize(raw: Tensor, power: float, k: int) -> Tensor:
    """Scale a real vector [..., 2n] and map it to complex symbols [..., n]
    so that sum |x_i|^2 == k * power exactly, per batch element.

    k is the normalization horizon in channel uses; it may exceed n when the
    vector covers only part of a transmission (the remainder is accounted for
    elsewhere in the power budget).
    """
    if raw.shape[-1] % 2 != 0:
        raise ValueError(f"raw vector length must be even, got {raw.shape[-1]}")
    norm = raw.norm(dim=-1, keepdim=True).clamp_min(torch.finfo(raw.dtype).tiny)
    scaled = raw * ((k * power) ** 0.5 / norm)
    return interleave_to_complex(scaled)


@dataclass
class RelayNormStats:
    """First/second moments of raw relay outputs, used to impose the relay
    power constraint in expectation rather than exactly per codeword."""

    mu: float | Tensor
    sigma: float | Tensor

    def __post_init__(self) -> None:
        sig = float(self.sigma) if not torch.is_tensor(self.sigma) else float(self.sigma.detach())
        # slack covers float32 rounding of the floor itself
        if sig < SIGMA_FLOOR * (1.0 - 1e-4):
            raise ValueError(f"sigma {sig} below floor {SIGMA_FLOOR}")


def standardize_relay_block(raw: Tensor) -> Tensor:
    """Parameter-free per-image standardization of one raw relay block.

    The recorded-statistics normalizer is invariant to the raw block's global
    scale and offset, so left free that scale drifts during training faster
    than the moving average can follow, and inference (frozen statistics)
    then mis-scales the relay. Pinning each block to mean 0 / variance 1
    removes the free direction: the recorded statistics are stationary and
    the frozen values match training exactly.
    """
    dims = tuple(range(1, raw.dim()))
    mu = raw.mean(dim=dims, keepdim=True)
    sigma = raw.var(dim=dims, correction=0, keepdim=True).sqrt().clamp_min(SIGMA_FLOOR)
    return (raw - mu) / sigma


def record_norm_stats(blocks: Tensor) -> RelayNormStats:
    """Empirical mean/std over every entry of the given raw relay outputs
    (all blocks after the silent first one, stacked along any shape)."""
    mu = blocks.mean()
    sigma = blocks.std(correction=0).clamp_min(SIGMA_FLOOR)
    return RelayNormStats(mu=mu, sigma=sigma)


class NormStatsTracker:
    """Exponential moving average of relay output statistics across training
    batches; frozen values are used at inference."""

    def __init__(self, decay: float = 0.999):
        self.decay = decay
        self.mu: float | None = None
        self.var: float | None = None

    def update(self, blocks: Tensor) -> None:
        mu = float(blocks.detach().mean())
        var = float(blocks.detach().var(correction=0))
        if self.mu is None:
            self.mu, self.var = mu, var
        else:
            d = self.decay
            self.mu = d * self.mu + (1.0 - d) * mu
            self.var = d * self.var + (1.0 - d) * var

    def value(self) -> RelayNormStats:
        if self.mu is None or self.var is None:
            raise RuntimeError("no statistics recorded yet")
        return RelayNormStats(mu=self.mu, sigma=max(max(self.var, 0.0) ** 0.5, SIGMA_FLOOR))

    def state_dict(self) -> dict:
        return {"decay": self.decay, "mu": self.mu, "var": self.var}

    def load_state_dict(self, state: dict) -> None:
        self.decay = state["decay"]
        self.mu = state["mu"]
        self.var = state["var"]


def relay_block_normalize(block: Tensor, stats: RelayNormStats, power: float) -> Tensor:
    """Standardize a raw relay block [..., 2n] with recorded statistics and
    scale each real dimension to power/2, then map to complex symbols.

    Meets the relay power constraint in expectation: the relay cannot
    normalize exactly because future blocks are unknown when it transmits.
    """
    mu, sigma = stats.mu, stats.sigma
    scaled = (power / 2.0) ** 0.5 * (block - mu) / sigma
    return interleave_to_complex(scaled)


def psnr_per_image(ref: Tensor, rec: Tensor, cap_db: float = PSNR_CAP_DB) -> Tensor:
    """Per-image PSNR in dB with the peak taken from each reference image.

    Zero-MSE images return ``cap_db`` and trigger a warning so downstream
    averages are explicitly flagged as saturated.
    """
    if ref.shape != rec.shape:
        raise ValueError(f"shape mismatch {tuple(ref.shape)} vs {tuple(rec.shape)}")
    n = ref.shape[0]
    err = (ref - rec).reshape(n, -1).to(torch.float64)
    mse = err.pow(2).mean(dim=1)
    peak = ref.reshape(n, -1).abs().amax(dim=1).to(torch.float64)
    out = torch.full((n,), cap_db, dtype=torch.float64)
    nz = mse > 0
    out[nz] = 10.0 * torch.log10(peak[nz] ** 2 / mse[nz])
    if (~nz).any():
        warnings.warn(f"{int((~nz).sum())} image(s) with zero MSE capped at {cap_db} dB")
    return torch.minimum(out, torch.tensor(cap_db, dtype=torch.float64))


def psnr(ref: Tensor, rec: Tensor, cap_db: float = PSNR_CAP_DB) -> float:
    """Mean over per-image PSNRs (dB)."""
    return float(psnr_per_image(ref, rec, cap_db).mean())


def ssim_per_image(ref: Tensor, rec: Tensor, peak: float = 1.0) -> Tensor:
    """Per-image structural similarity from global (whole-image) statistics.

    Uses the standard stabilizers c1 = (0.01 L)^2, c2 = (0.03 L)^2 with the
    dynamic range L; no sliding window.
    """
    if ref.shape != rec.shape:
        raise ValueError(f"shape mismatch {tuple(ref.shape)} vs {tuple(rec.shape)}")
    n = ref.shape[0]
    a = ref.reshape(n, -1).to(torch.float64)
    b = rec.reshape(n, -1).to(torch.float64)
    mu_a, mu_b = a.mean(dim=1), b.mean(dim=1)
    var_a = a.var(dim=1, correction=0)
    var_b = b.var(dim=1, correction=0)
    cov = ((a - mu_a[:, None]) * (b - mu_b[:, None])).mean(dim=1)
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim(ref: Tensor, rec: Tensor, peak: float = 1.0) -> float:
    """Mean over per-image SSIM values."""
    return float(ssim_per_image(ref, rec, peak).mean())
