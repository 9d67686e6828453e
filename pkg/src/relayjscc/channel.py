"""Cooperative relay channel: link state, noise generation and channel ops.

Three nodes: a source broadcasting to a relay and a destination, with the
relay's transmission superimposing at the destination. Channel gains are
real and nonnegative; fading wraps them with complex coefficients that the
terminals remove by phase precoding/equalization. Noise is circularly
symmetric complex Gaussian, drawn from explicit per-role generators so that
protocols with the same sequence of channel uses see identical noise under
matched seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import Tensor


def db_to_lin(db: float) -> float:
    """Amplitude/power ratio from dB. Gains c are amplitudes, so the channel
    SNR contribution is c^2 P; we store gains as sqrt of the power ratio."""
    return 10.0 ** (db / 10.0)


def lin_to_db(lin: float) -> float:
    if lin == 0.0:  # a disabled link (zero gain/power) is -inf dB, not an error
        return -math.inf
    return 10.0 * math.log10(lin)


@dataclass
class LinkState:
    """Static description of one channel realization.

    c_* are real nonnegative amplitude gains (their squares are the average
    SNR contributions since noise has unit variance); p_s/p_r are the average
    transmit power budgets per channel use. h_* are optional complex fading
    coefficients; when fading is disabled they are all 1.
    """

    c_sr: float
    c_rd: float
    c_sd: float = 1.0
    p_s: float = 1.0
    p_r: float = 1.0
    sigma_r2: float = 1.0
    sigma_d2: float = 1.0
    fading: bool = False
    h_sr: complex = 1.0 + 0.0j
    h_rd: complex = 1.0 + 0.0j
    h_sd: complex = 1.0 + 0.0j
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("c_sr", "c_rd", "c_sd"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("p_s", "p_r", "sigma_r2", "sigma_d2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_db(
        cls,
        c_sr_db: float,
        c_rd_db: float,
        c_sd_db: float = 0.0,
        p_s_db: float = 0.0,
        p_r_db: float = 0.0,
        **kwargs,
    ) -> "LinkState":
        """Build from the dB quantities used throughout configs: c_*_db are
        per-link SNR gains in dB (c = sqrt(10^(db/10))), p_*_db powers in dB."""
        return cls(
            c_sr=db_to_lin(c_sr_db) ** 0.5,
            c_rd=db_to_lin(c_rd_db) ** 0.5,
            c_sd=db_to_lin(c_sd_db) ** 0.5,
            p_s=db_to_lin(p_s_db),
            p_r=db_to_lin(p_r_db),
            **kwargs,
        )

    @classmethod
    def from_distances(
        cls,
        d_sr: float,
        d_rd: float,
        d_sd: float,
        tau: float,
        p_s: float = 1.0,
        p_r: float = 1.0,
        **kwargs,
    ) -> "LinkState":
        """Alternative parameterization: large-scale path loss d^-tau folded
        into the amplitude gains."""
        return cls(c_sr=d_sr**-tau, c_rd=d_rd**-tau, c_sd=d_sd**-tau, p_s=p_s, p_r=p_r, **kwargs)

    @classmethod
    def from_config(cls, cfg: dict) -> "LinkState":
        """Round-trip partner of :meth:`to_config`."""
        known = {"c_sr_db", "c_rd_db", "c_sd_db", "p_s_db", "p_r_db", "fading", "seed"}
        unknown = set(cfg) - known
        if unknown:
            raise ValueError(f"unknown link config keys: {sorted(unknown)}")
        link = cls.from_db(
            c_sr_db=cfg["c_sr_db"],
            c_rd_db=cfg["c_rd_db"],
            c_sd_db=cfg.get("c_sd_db", 0.0),
            p_s_db=cfg.get("p_s_db", 0.0),
            p_r_db=cfg.get("p_r_db", 0.0),
            seed=int(cfg.get("seed", 0)),
        )
        if cfg.get("fading", False):
            link = sample_fading(link, link.seed)
        return link

    def to_config(self) -> dict:
        return {
            "c_sr_db": lin_to_db(self.c_sr**2),
            "c_rd_db": lin_to_db(self.c_rd**2),
            "c_sd_db": lin_to_db(self.c_sd**2),
            "p_s_db": lin_to_db(self.p_s),
            "p_r_db": lin_to_db(self.p_r),
            "fading": self.fading,
            "seed": self.seed,
        }

    def side_info_db(self) -> Tensor:
        """Condition vector [c_sr, c_rd, p_s, p_r] in dB, the quantities the
        adaptive modules are conditioned on. Under fading the gains are the
        effective magnitudes including the small-scale coefficients."""
        c_sr = self.c_sr * (abs(self.h_sr) if self.fading else 1.0)
        c_rd = self.c_rd * (abs(self.h_rd) if self.fading else 1.0)
        return torch.tensor(
            [
                lin_to_db(max(c_sr, 1e-12) ** 2),
                lin_to_db(max(c_rd, 1e-12) ** 2),
                lin_to_db(self.p_s),
                lin_to_db(self.p_r),
            ],
            dtype=torch.float32,
        )


def sample_fading(link: LinkState, seed: int) -> LinkState:
    """Draw i.i.d. unit-variance complex Gaussian coefficients for the three
    links (Rayleigh magnitudes), leaving the average gains c_* untouched."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x0FAD]))
    h = (rng.standard_normal(3) + 1j * rng.standard_normal(3)) / math.sqrt(2.0)
    return LinkState(
        c_sr=link.c_sr,
        c_rd=link.c_rd,
        c_sd=link.c_sd,
        p_s=link.p_s,
        p_r=link.p_r,
        sigma_r2=link.sigma_r2,
        sigma_d2=link.sigma_d2,
        fading=True,
        h_sr=complex(h[0]),
        h_rd=complex(h[1]),
        h_sd=complex(h[2]),
        seed=seed,
    )


@dataclass
class ChannelRng:
    """Independent generators for relay-side and destination-side noise.

    Splitting by role keeps noise realizations aligned across protocols that
    make the same sequence of draws at each node, which is what the
    structural reductions (block schemes collapsing to simpler ones) rely on.
    """

    relay: torch.Generator = field(repr=False)
    dest: torch.Generator = field(repr=False)

    @classmethod
    def from_seed(cls, seed: int) -> "ChannelRng":
        children = np.random.SeedSequence(seed).spawn(2)
        gens = []
        for child in children:
            g = torch.Generator()
            g.manual_seed(int(child.generate_state(1, dtype=np.uint64)[0] >> 1))
            gens.append(g)
        return cls(relay=gens[0], dest=gens[1])


def complex_noise(shape: tuple[int, ...], variance: float, gen: torch.Generator, dtype: torch.dtype = torch.complex64) -> Tensor:
    """Circularly symmetric complex Gaussian with the given variance per
    complex symbol (variance/2 per real dimension)."""
    rdtype = torch.float32 if dtype == torch.complex64 else torch.float64
    raw = torch.randn(*shape, 2, generator=gen, dtype=rdtype)
    scale = (variance / 2.0) ** 0.5
    return torch.complex(raw[..., 0], raw[..., 1]) * scale


def _noise_like(x: Tensor, variance: float, gen: torch.Generator) -> Tensor:
    dtype = torch.complex128 if x.dtype == torch.complex128 else torch.complex64
    return complex_noise(tuple(x.shape), variance, gen, dtype=dtype)


def hd_broadcast(x1: Tensor, link: LinkState, rng: ChannelRng) -> tuple[Tensor, Tensor]:
    """Relay-receive period: the source transmits x1, heard by both relay and
    destination. Returns (y_r, y_d1)."""
    y_r = link.c_sr * x1 + _noise_like(x1, link.sigma_r2, rng.relay)
    y_d1 = link.c_sd * x1 + _noise_like(x1, link.sigma_d2, rng.dest)
    return y_r, y_d1


def hd_mac(x2: Tensor, x_r: Tensor, link: LinkState, rng: ChannelRng) -> Tensor:
    """Relay-transmit period: source and relay transmit simultaneously and
    superimpose at the destination. Returns y_d2."""
    if x2.shape != x_r.shape:
        raise ValueError(f"length mismatch {tuple(x2.shape)} vs {tuple(x_r.shape)}")
    return link.c_sd * x2 + link.c_rd * x_r + _noise_like(x2, link.sigma_d2, rng.dest)


def fd_step(x_sb: Tensor, x_rb: Tensor, link: LinkState, rng: ChannelRng, relay_listens: bool = True) -> tuple[Tensor | None, Tensor]:
    """One block of simultaneous transmission: relay hears the source while
    transmitting its own block. Returns (y_rb, y_db); y_rb is None when the
    relay has no use for further reception (final block)."""
    if x_sb.shape != x_rb.shape:
        raise ValueError(f"length mismatch {tuple(x_sb.shape)} vs {tuple(x_rb.shape)}")
    y_rb = None
    if relay_listens:
        y_rb = link.c_sr * x_sb + _noise_like(x_sb, link.sigma_r2, rng.relay)
    y_db = link.c_sd * x_sb + link.c_rd * x_rb + _noise_like(x_sb, link.sigma_d2, rng.dest)
    return y_rb, y_db


def fading_precode(x: Tensor, h: complex) -> Tensor:
    """Rotate the transmit signal by the conjugate phase of its channel so the
    effective coefficient seen downstream is the real magnitude |h|."""
    if h == 0:
        raise ValueError("cannot precode against a zero fading coefficient")
    hc = torch.tensor(h, dtype=x.dtype)
    return (hc.conj() / abs(h)) * x


def fading_equalize(y_r: Tensor, h_eff: complex, sigma_r2: float, p_s: float) -> Tensor:
    """MMSE-style scalar equalizer at the relay for its effective channel."""
    den = abs(h_eff) ** 2 + sigma_r2 / p_s
    if den == 0:
        raise ValueError("degenerate equalizer: zero channel energy and zero noise ratio")
    hc = torch.tensor(h_eff, dtype=y_r.dtype)
    gain = hc.conj() / math.sqrt(den)
    return gain * y_r


def relay_effective_coeff(link: LinkState) -> complex:
    """Channel coefficient the relay sees once the source precodes against the
    source-destination link: h_sr * c_sr * conj(h_sd)/|h_sd|."""
    return link.h_sr * link.c_sr * (link.h_sd.conjugate() / abs(link.h_sd))


def fd_fading_round(
    xt_sb: Tensor,
    xt_rb: Tensor,
    link: LinkState,
    rng: ChannelRng,
    relay_listens: bool = True,
) -> tuple[Tensor | None, Tensor]:
    """One full-duplex block over fading links with phase precoding at both
    transmitters and equalization at the relay.

    Returns (xhat_sb, y_db): the relay's equalized observation of the source
    block and the destination's received block. The destination sees the
    real nonnegative coefficients |h_sd| c_sd and |h_rd| c_rd, so the static
    decoder applies unchanged.
    """
    if xt_sb.shape != xt_rb.shape:
        raise ValueError(f"length mismatch {tuple(xt_sb.shape)} vs {tuple(xt_rb.shape)}")
    x_sb = fading_precode(xt_sb, link.h_sd)
    xhat_sb = None
    if relay_listens:
        h_eff = relay_effective_coeff(link)
        y_rb = link.h_sr * link.c_sr * x_sb + _noise_like(x_sb, link.sigma_r2, rng.relay)
        xhat_sb = fading_equalize(y_rb, complex(h_eff), link.sigma_r2, link.p_s)
    x_rb = fading_precode(xt_rb, link.h_rd)
    n_d = _noise_like(x_sb, link.sigma_d2, rng.dest)
    y_db = link.h_sd * link.c_sd * x_sb + link.h_rd * link.c_rd * x_rb + n_d
    return xhat_sb, y_db
