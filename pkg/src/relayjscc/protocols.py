"""Transmission protocols over the relay channel.

Two families: half-duplex time division (relay listens for a fraction alpha
of the codeword, then transmits) and full-duplex block transmission (the
source sends B equal blocks; the relay transmits from block 2 on, feeding a
growing knowledge matrix of everything it has heard and sent). The relay
either forwards a scaled copy of its observation (AF) or runs a trainable
processor (PF). Every transmit function returns the reconstruction together
with a diagnostics payload carrying the signals and energies needed for
correlation/power analysis, so nothing has to be re-simulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import Tensor

from .channel import (
    ChannelRng,
    LinkState,
    complex_noise,
    fading_equalize,
    fading_precode,
    hd_broadcast,
    hd_mac,
    relay_effective_coeff,
)
from .codec import CodecBundle, CodecConfig, DestinationDecoder, RelayProcessor, SourceEncoder, seeded_init
from .signals import (
    RelayNormStats,
    power_normalize,
    record_norm_stats,
    relay_block_normalize,
    standardize_relay_block,
    symbol_demap,
    symbol_map,
)

MODES = ("hd_af", "hd_pf", "hd_pf_systematic", "fd_af", "fd_pf", "direct")


@dataclass(frozen=True)
class HalfDuplexPlan:
    """Time division: the relay listens for alpha of the k channel uses.

    The code matrix is split column-wise into widths (alpha c*, (1-alpha) c*),
    so alpha c* must be integral.
    """

    alpha: float
    c_star: int
    tokens: int

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")
        w1 = self.alpha * self.c_star
        if abs(w1 - round(w1)) > 1e-9:
            raise ValueError(f"alpha*c_star = {w1} is not integral; fractional splits are not supported")
        for w in (round(w1), self.c_star - round(w1)):
            if w < 1:
                raise ValueError("each period needs at least one column")
            if (w * self.tokens) % 2 != 0:
                raise ValueError(f"period width {w} gives an odd real count for {self.tokens} tokens")

    @property
    def width1(self) -> int:
        return round(self.alpha * self.c_star)

    @property
    def width2(self) -> int:
        return self.c_star - self.width1

    @property
    def k(self) -> int:
        return self.tokens * self.c_star // 2

    @property
    def k1(self) -> int:
        return self.tokens * self.width1 // 2

    @property
    def k2(self) -> int:
        return self.k - self.k1


@dataclass(frozen=True)
class FullDuplexPlan:
    """Block transmission: B equal blocks of k/B channel uses; the relay's
    knowledge matrix keeps a window of the last ``memory`` blocks (default
    B-1, the untruncated case). B=1 degenerates to direct transmission."""

    blocks: int
    c_star: int
    tokens: int
    memory: int | None = None

    def __post_init__(self) -> None:
        if self.blocks < 1:
            raise ValueError("blocks must be >= 1")
        if self.blocks > 1:
            if self.c_star % self.blocks != 0:
                raise ValueError(f"c_star {self.c_star} not divisible into {self.blocks} blocks")
            if self.k % self.blocks != 0:
                raise ValueError(f"k = {self.k} not divisible into {self.blocks} blocks")
            t = self.memory if self.memory is not None else self.blocks - 1
            if not 1 <= t <= self.blocks - 1:
                raise ValueError(f"memory {t} outside [1, {self.blocks - 1}]")
            object.__setattr__(self, "memory", t)
        elif self.memory not in (None, 0):
            raise ValueError("memory is meaningless for a single block")
        else:
            object.__setattr__(self, "memory", 0)

    @property
    def k(self) -> int:
        return self.tokens * self.c_star // 2

    @property
    def block_symbols(self) -> int:
        return self.k // self.blocks

    @property
    def slot_width(self) -> int:
        return self.c_star // self.blocks

    @property
    def knowledge_width(self) -> int:
        return 2 * (self.blocks - 1) * self.slot_width


class KnowledgeMatrix:
    """The relay's memory: [Y_1 .. Y_{B-1} | X_1 .. X_{B-1}] slot layout with
    one p^2 x (c*/B) slot per past block; future slots are exactly zero and a
    finite memory window zeroes slots older than t blocks."""

    def __init__(self, plan: FullDuplexPlan, values: Tensor, block: int = 1):
        self.plan = plan
        self.values = values
        self.block = block  # the block index this state is consumed at

    @classmethod
    def initial(cls, plan: FullDuplexPlan, batch: int, dtype: torch.dtype = torch.float32) -> "KnowledgeMatrix":
        vals = torch.zeros(batch, plan.tokens, plan.knowledge_width, dtype=dtype)
        return cls(plan, vals, block=1)

    def slot(self, kind: str, j: int) -> Tensor:
        """Slot for block j (1-based); kind is 'y' or 'x'."""
        w = self.plan.slot_width
        base = 0 if kind == "y" else (self.plan.blocks - 1) * w
        lo = base + (j - 1) * w
        return self.values[..., lo : lo + w]

    def updated(self, y_rb: Tensor, x_rb_tokens: Tensor | None, b: int, t: int | None = None) -> "KnowledgeMatrix":
        """Write block b's observation and transmission, producing the state
        consumed at block b+1. Valid for b in [1, B-1]; the final block's
        reception is never recorded since the relay has nothing left to send.
        """
        plan = self.plan
        t = plan.memory if t is None else t
        if not 1 <= b <= plan.blocks - 1:
            raise ValueError(f"block index {b} outside [1, {plan.blocks - 1}]")
        w = plan.slot_width
        y_tokens = symbol_demap(y_rb, plan.tokens)
        if x_rb_tokens is None:
            x_rb_tokens = torch.zeros_like(y_tokens)
        new_slots_y, new_slots_x = [], []
        lo = b + 1 - t  # oldest block visible at consumption time b+1
        for j in range(1, plan.blocks):
            if j == b:
                new_slots_y.append(y_tokens)
                new_slots_x.append(x_rb_tokens)
            elif lo <= j < b:
                new_slots_y.append(self.slot("y", j))
                new_slots_x.append(self.slot("x", j))
            else:
                new_slots_y.append(torch.zeros_like(self.slot("y", j)))
                new_slots_x.append(torch.zeros_like(self.slot("x", j)))
        values = torch.cat(new_slots_y + new_slots_x, dim=-1)
        return KnowledgeMatrix(plan, values, block=b + 1)


def update_knowledge(state: KnowledgeMatrix, y_rb: Tensor, x_rb_tokens: Tensor | None, b: int, t: int | None = None) -> KnowledgeMatrix:
    """Functional form of :meth:`KnowledgeMatrix.updated`."""
    return state.updated(y_rb, x_rb_tokens, b, t)


@dataclass
class HDDiagnostics:
    """Signals and per-image energies from one half-duplex run."""

    alpha: float
    k: int
    x_s1: Tensor
    x_s2: Tensor
    x_r: Tensor
    e_s1: Tensor
    e_s2: Tensor
    e_r: Tensor
    ip_r_s2: Tensor  # inner product x_r^H x_s2 per image

    @property
    def e_s(self) -> Tensor:
        return self.e_s1 + self.e_s2

    @classmethod
    def build(cls, alpha: float, k: int, x_s1: Tensor, x_s2: Tensor, x_r: Tensor) -> "HDDiagnostics":
        return cls(
            alpha=alpha,
            k=k,
            x_s1=x_s1.detach(),
            x_s2=x_s2.detach(),
            x_r=x_r.detach(),
            e_s1=x_s1.detach().abs().pow(2).sum(dim=-1),
            e_s2=x_s2.detach().abs().pow(2).sum(dim=-1),
            e_r=x_r.detach().abs().pow(2).sum(dim=-1),
            ip_r_s2=(x_r.detach().conj() * x_s2.detach()).sum(dim=-1),
        )


@dataclass
class FDDiagnostics:
    """Per-block signals from one full-duplex (or direct) run."""

    blocks: int
    k: int
    x_s_blocks: list[Tensor]
    x_r_blocks: list[Tensor]
    y_r_blocks: list[Tensor]
    relay_raw_blocks: list[Tensor]
    knowledge_states: list[Tensor]
    batch_stats: RelayNormStats | None = None
    e_s: Tensor = field(default_factory=lambda: torch.zeros(0))
    e_r: Tensor = field(default_factory=lambda: torch.zeros(0))

    def finalize(self) -> "FDDiagnostics":
        xs = torch.cat([b.detach() for b in self.x_s_blocks], dim=-1)
        self.e_s = xs.abs().pow(2).sum(dim=-1)
        if self.x_r_blocks:
            xr = torch.cat([b.detach() for b in self.x_r_blocks], dim=-1)
            self.e_r = xr.abs().pow(2).sum(dim=-1)
        else:
            self.e_r = torch.zeros_like(self.e_s)
        return self


def component_seed(seed: int, name: str) -> int:
    offsets = {"source": 0, "relay": 1, "decoder": 2, "parity": 3}
    return (seed * 1000003 + offsets[name]) % (2**63 - 1)


def build_bundle(
    cfg: CodecConfig,
    image_shape: tuple[int, int, int],
    mode: str,
    plan: HalfDuplexPlan | FullDuplexPlan | None = None,
    seed: int = 0,
) -> CodecBundle:
    """Construct the networks a protocol needs, with per-component seeds so
    matched-seed runs of different protocols share identical source/decoder
    initializations regardless of which extra components exist."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    source_out = cfg.c_star
    relay = parity = None
    if mode == "hd_pf_systematic":
        if not isinstance(plan, HalfDuplexPlan):
            raise ValueError("systematic mode needs a half-duplex plan")
        source_out = plan.width1
    with seeded_init(component_seed(seed, "source")):
        source = SourceEncoder(cfg, image_shape, out_width=source_out)
    if mode in ("hd_pf", "hd_pf_systematic"):
        assert isinstance(plan, HalfDuplexPlan)
        with seeded_init(component_seed(seed, "relay")):
            relay = RelayProcessor(cfg, in_width=plan.width1, out_width=plan.width2)
        if mode == "hd_pf_systematic":
            with seeded_init(component_seed(seed, "parity")):
                parity = RelayProcessor(cfg, in_width=plan.width1, out_width=plan.width2)
    elif mode == "fd_pf":
        assert isinstance(plan, FullDuplexPlan)
        if plan.blocks > 1:
            with seeded_init(component_seed(seed, "relay")):
                relay = RelayProcessor(cfg, in_width=plan.knowledge_width, out_width=plan.slot_width)
    with seeded_init(component_seed(seed, "decoder")):
        decoder = DestinationDecoder(cfg, image_shape)
    meta = {"mode": mode}
    if isinstance(plan, HalfDuplexPlan):
        meta["alpha"] = plan.alpha
    elif isinstance(plan, FullDuplexPlan):
        meta["B"] = plan.blocks
        meta["t"] = plan.memory
    return CodecBundle(cfg=cfg, image_shape=image_shape, source=source, decoder=decoder, relay=relay, parity=parity, meta=meta)


def _side_info(link: LinkState, bundle: CodecBundle) -> Tensor | None:
    return link.side_info_db() if bundle.cfg.la_enabled else None


def _normalize_source(tokens: Tensor, power: float, k: int) -> Tensor:
    """Scale the whole code matrix so (1/k)||x_s||^2 == power exactly per image."""
    n = tokens.shape[0]
    norm = tokens.reshape(n, -1).norm(dim=-1).clamp_min(torch.finfo(tokens.dtype).tiny)
    scale = (k * power) ** 0.5 / norm
    return tokens * scale.view(n, 1, 1)


def af_relay_gain(p_s1: float | Tensor, c_sr: float, p_r: float) -> float | Tensor:
    """Half-duplex AF design gain: the relay re-emits an observation whose
    expected per-symbol power is c_sr^2 p_s1 + 1 (unit noise), spending the
    full budget. Protocols substitute the measured receive power for the
    expectation so the budget is met exactly per image."""
    return (2.0 * p_r / (c_sr**2 * p_s1 + 1.0)) ** 0.5


def fd_af_relay_gain(link: LinkState, blocks: int) -> float:
    """Full-duplex AF design gain: B-1 active blocks re-emitting observations
    of expected per-symbol power c_sr^2 P_s + 1 exhaust total energy k P_r.
    As in :func:`af_relay_gain`, protocols use the measured receive power."""
    if blocks < 2:
        raise ValueError("full-duplex AF needs at least two blocks")
    return math.sqrt(link.p_r * blocks / ((blocks - 1) * (link.c_sr**2 * link.p_s + 1.0)))


def _af_scale(y_prev: Tensor, energy_budget: float) -> Tensor:
    """Scale an observation so its re-emission carries exactly the given
    energy per image."""
    e = y_prev.abs().pow(2).sum(dim=-1, keepdim=True)
    eta = (energy_budget / e.clamp_min(torch.finfo(e.dtype).tiny)) ** 0.5
    return eta.to(y_prev.dtype) * y_prev


def _hd_split_and_map(x_tokens: Tensor, plan: HalfDuplexPlan) -> tuple[Tensor, Tensor]:
    x1 = symbol_map(x_tokens[..., : plan.width1])
    x2 = symbol_map(x_tokens[..., plan.width1 :])
    return x1, x2


def _hd_receive_to_decode(y_d1: Tensor, y_d2: Tensor, plan: HalfDuplexPlan) -> Tensor:
    return torch.cat(
        [symbol_demap(y_d1, plan.tokens), symbol_demap(y_d2, plan.tokens)], dim=-1
    )


def hd_af_transmit(
    images: Tensor, link: LinkState, bundle: CodecBundle, rng: ChannelRng
) -> tuple[Tensor, HDDiagnostics]:
    """Half-duplex amplify-and-forward at the fixed alpha = 1/2 split."""
    cfg = bundle.cfg
    plan = HalfDuplexPlan(alpha=0.5, c_star=cfg.c_star, tokens=cfg.tokens)
    u = _side_info(link, bundle)
    x_tokens = _normalize_source(bundle.source(images, u), link.p_s, plan.k)
    x1, x2 = _hd_split_and_map(x_tokens, plan)
    y_r, y_d1 = _hd_broadcast(x1, link, rng)
    x_r = _af_scale(y_r, plan.k * link.p_r)
    y_d2 = _hd_mac(x2, x_r, link, rng)
    recon = bundle.decoder(_hd_receive_to_decode(y_d1, y_d2, plan), u)
    return recon, HDDiagnostics.build(plan.alpha, plan.k, x1, x2, x_r)


def hd_pf_transmit(
    images: Tensor,
    link: LinkState,
    plan: HalfDuplexPlan,
    bundle: CodecBundle,
    rng: ChannelRng,
    relay_norm: str | RelayNormStats = "exact",
) -> tuple[Tensor, HDDiagnostics]:
    """Half-duplex process-and-forward: the relay runs its network on the
    demapped observation and transmits under the power budget.

    relay_norm selects the relay power normalizer: "exact" rescales each
    codeword to (1/k)||x_r||^2 = P_r; passing RelayNormStats standardizes the
    raw block per image and scales with recorded statistics instead, the same
    rule the block-based full-duplex scheme uses.
    """
    if bundle.relay is None:
        raise ValueError("process-and-forward needs a relay network")
    cfg = bundle.cfg
    u = _side_info(link, bundle)
    x_tokens = _normalize_source(bundle.source(images, u), link.p_s, plan.k)
    x1, x2 = _hd_split_and_map(x_tokens, plan)
    y_r, y_d1 = _hd_broadcast(x1, link, rng)
    raw = bundle.relay(symbol_demap(y_r, plan.tokens), u)
    if isinstance(relay_norm, RelayNormStats):
        flat = standardize_relay_block(raw).reshape(raw.shape[0], -1)
        x_r = relay_block_normalize(flat, relay_norm, link.p_r)
    elif relay_norm == "exact":
        x_r = power_normalize(raw.reshape(raw.shape[0], -1), link.p_r, plan.k)
    else:
        raise ValueError(f"unknown relay normalization {relay_norm!r}")
    y_d2 = _hd_mac(x2, x_r, link, rng)
    recon = bundle.decoder(_hd_receive_to_decode(y_d1, y_d2, plan), u)
    return recon, HDDiagnostics.build(plan.alpha, plan.k, x1, x2, x_r)


def hd_pf_systematic_transmit(
    images: Tensor,
    link: LinkState,
    plan: HalfDuplexPlan,
    bundle: CodecBundle,
    rng: ChannelRng,
    relay_norm: str | RelayNormStats = "exact",
) -> tuple[Tensor, HDDiagnostics]:
    """Systematic variant: the source sends fresh content only while the relay
    listens; the second-period signal is a learned parity of the first."""
    if bundle.relay is None or bundle.parity is None:
        raise ValueError("systematic mode needs relay and parity networks")
    cfg = bundle.cfg
    u = _side_info(link, bundle)
    x1_tokens = bundle.source(images, u)
    x2_tokens = bundle.parity(x1_tokens, u)
    x_tokens = _normalize_source(torch.cat([x1_tokens, x2_tokens], dim=-1), link.p_s, plan.k)
    x1, x2 = _hd_split_and_map(x_tokens, plan)
    y_r, y_d1 = _hd_broadcast(x1, link, rng)
    raw = bundle.relay(symbol_demap(y_r, plan.tokens), u)
    if isinstance(relay_norm, RelayNormStats):
        flat = standardize_relay_block(raw).reshape(raw.shape[0], -1)
        x_r = relay_block_normalize(flat, relay_norm, link.p_r)
    else:
        x_r = power_normalize(raw.reshape(raw.shape[0], -1), link.p_r, plan.k)
    y_d2 = _hd_mac(x2, x_r, link, rng)
    recon = bundle.decoder(_hd_receive_to_decode(y_d1, y_d2, plan), u)
    return recon, HDDiagnostics.build(plan.alpha, plan.k, x1, x2, x_r)


def _hd_broadcast(x1: Tensor, link: LinkState, rng: ChannelRng) -> tuple[Tensor, Tensor]:
    if link.fading:
        y_r = _relay_leg(x1, link, rng)
        y_d1 = _dest_leg(x1, torch.zeros_like(x1), link, rng)
        return y_r, y_d1
    return hd_broadcast(x1, link, rng)


def _hd_mac(x2: Tensor, x_r: Tensor, link: LinkState, rng: ChannelRng) -> Tensor:
    if link.fading:
        return _dest_leg(x2, x_r, link, rng)
    return hd_mac(x2, x_r, link, rng)


def _relay_leg(x_sb: Tensor, link: LinkState, rng: ChannelRng) -> Tensor:
    """Relay-side reception for one block, with equalization under fading."""
    dtype = torch.complex128 if x_sb.dtype == torch.complex128 else torch.complex64
    noise = complex_noise(tuple(x_sb.shape), link.sigma_r2, rng.relay, dtype=dtype)
    if not link.fading:
        return link.c_sr * x_sb + noise
    x_pre = fading_precode(x_sb, link.h_sd)
    h_eff = relay_effective_coeff(link)
    y = link.h_sr * link.c_sr * x_pre + noise
    return fading_equalize(y, complex(h_eff), link.sigma_r2, link.p_s)


def _dest_leg(x_sb: Tensor, x_rb: Tensor, link: LinkState, rng: ChannelRng) -> Tensor:
    """Destination-side reception of one block (source + relay superposition)."""
    dtype = torch.complex128 if x_sb.dtype == torch.complex128 else torch.complex64
    noise = complex_noise(tuple(x_sb.shape), link.sigma_d2, rng.dest, dtype=dtype)
    if not link.fading:
        return link.c_sd * x_sb + link.c_rd * x_rb + noise
    xs = fading_precode(x_sb, link.h_sd)
    xr = fading_precode(x_rb, link.h_rd)
    return link.h_sd * link.c_sd * xs + link.h_rd * link.c_rd * xr + noise


def fd_pf_transmit(
    images: Tensor,
    link: LinkState,
    plan: FullDuplexPlan,
    bundle: CodecBundle,
    rng: ChannelRng,
    stats: RelayNormStats | None = None,
    training: bool = False,
) -> tuple[Tensor, FDDiagnostics]:
    """Block-based process-and-forward per the rollout the training algorithm
    prescribes: the relay is silent in block 1, then transmits a network
    function of its knowledge matrix; knowledge stores raw (pre-normalization)
    relay outputs and is windowed to the plan's memory.

    In training mode the relay blocks are standardized with statistics of the
    current batch (recorded over blocks >= 2); at inference frozen stats are
    required (falling back to bundle.stats).
    """
    if plan.blocks > 1 and bundle.relay is None:
        raise ValueError("process-and-forward needs a relay network for B >= 2")
    if not training and plan.blocks > 1:
        stats = stats or bundle.stats
        if stats is None:
            raise ValueError("inference needs frozen relay statistics")
    return _fd_rollout(images, link, plan, bundle, rng, mode="pf", stats=stats, training=training)


def fd_af_transmit(
    images: Tensor,
    link: LinkState,
    plan: FullDuplexPlan,
    bundle: CodecBundle,
    rng: ChannelRng,
) -> tuple[Tensor, FDDiagnostics]:
    """Block-based amplify-and-forward: each block the relay re-emits its
    previous observation scaled to meet the total energy budget."""
    if plan.blocks < 2:
        raise ValueError("full-duplex AF needs at least two blocks")
    return _fd_rollout(images, link, plan, bundle, rng, mode="af", stats=None, training=False)


def direct_transmit(
    images: Tensor, link: LinkState, bundle: CodecBundle, rng: ChannelRng
) -> tuple[Tensor, FDDiagnostics]:
    """Point-to-point baseline: the degenerate single-block schedule."""
    plan = FullDuplexPlan(blocks=1, c_star=bundle.cfg.c_star, tokens=bundle.cfg.tokens)
    return _fd_rollout(images, link, plan, bundle, rng, mode="pf", stats=None, training=False)


def _fd_rollout(
    images: Tensor,
    link: LinkState,
    plan: FullDuplexPlan,
    bundle: CodecBundle,
    rng: ChannelRng,
    mode: str,
    stats: RelayNormStats | None,
    training: bool,
) -> tuple[Tensor, FDDiagnostics]:
    cfg = bundle.cfg
    B = plan.blocks
    u = _side_info(link, bundle)
    x_tokens = _normalize_source(bundle.source(images, u), link.p_s, plan.k)
    n = x_tokens.shape[0]
    w = cfg.c_star // B
    x_s_blocks = [symbol_map(x_tokens[..., b * w : (b + 1) * w]) for b in range(B)]

    diag = FDDiagnostics(
        blocks=B, k=plan.k, x_s_blocks=[b.detach() for b in x_s_blocks],
        x_r_blocks=[], y_r_blocks=[], relay_raw_blocks=[], knowledge_states=[],
    )

    state = KnowledgeMatrix.initial(plan, n, dtype=x_tokens.dtype) if (mode == "pf" and B > 1) else None
    raw_blocks: list[Tensor | None] = [None] * (B + 1)  # 1-based, block 1 silent
    x_r_blocks: list[Tensor] = []
    y_d_blocks: list[Tensor | None] = [None] * (B + 1)

    for b in range(1, B + 1):
        if b == 1:
            x_rb = torch.zeros_like(x_s_blocks[0])
        elif mode == "af":
            x_rb = _af_scale(diag.y_r_blocks[b - 2], plan.k * link.p_r / (B - 1))
        else:
            assert state is not None
            diag.knowledge_states.append(state.values.detach())
            raw = standardize_relay_block(bundle.relay(state.values, u))
            raw_blocks[b] = raw
            diag.relay_raw_blocks.append(raw.detach())
            if training:
                x_rb = None  # normalized after the rollout with batch stats
            else:
                x_rb = relay_block_normalize(raw.reshape(n, -1), stats, link.p_r)
        if x_rb is not None:
            x_r_blocks.append(x_rb)
            y_d_blocks[b] = _dest_leg(x_s_blocks[b - 1], x_rb, link, rng)
        if b <= B - 1:
            y_rb = _relay_leg(x_s_blocks[b - 1], link, rng)
            diag.y_r_blocks.append(y_rb)
            if state is not None:
                x_knowledge = raw_blocks[b] if b >= 2 else None
                state = state.updated(y_rb, x_knowledge, b)

    if training and mode == "pf" and B > 1:
        batch_stats = record_norm_stats(torch.stack([raw_blocks[b] for b in range(2, B + 1)]))
        diag.batch_stats = batch_stats
        for b in range(2, B + 1):
            x_rb = relay_block_normalize(raw_blocks[b].reshape(n, -1), batch_stats, link.p_r)
            x_r_blocks.append(x_rb)
            y_d_blocks[b] = _dest_leg(x_s_blocks[b - 1], x_rb, link, rng)

    diag.x_r_blocks = [b.detach() for b in x_r_blocks]
    y_tokens = torch.cat([symbol_demap(y_d_blocks[b], cfg.tokens) for b in range(1, B + 1)], dim=-1)
    recon = bundle.decoder(y_tokens, u)
    return recon, diag.finalize()


def transmit(
    mode: str,
    images: Tensor,
    link: LinkState,
    bundle: CodecBundle,
    rng: ChannelRng,
    plan: HalfDuplexPlan | FullDuplexPlan | None = None,
    stats: RelayNormStats | None = None,
    training: bool = False,
    relay_norm: str | RelayNormStats = "exact",
):
    """Mode-dispatched entry point used by training/evaluation."""
    if mode == "hd_af":
        return hd_af_transmit(images, link, bundle, rng)
    if mode == "hd_pf":
        return hd_pf_transmit(images, link, plan, bundle, rng, relay_norm=relay_norm)
    if mode == "hd_pf_systematic":
        return hd_pf_systematic_transmit(images, link, plan, bundle, rng, relay_norm=relay_norm)
    if mode == "fd_af":
        return fd_af_transmit(images, link, plan, bundle, rng)
    if mode == "fd_pf":
        return fd_pf_transmit(images, link, plan, bundle, rng, stats=stats, training=training)
    if mode == "direct":
        return direct_transmit(images, link, bundle, rng)
    raise ValueError(f"unknown mode {mode!r}")


def plan_from_config(mode: str, cfg: CodecConfig, plan_cfg: dict) -> HalfDuplexPlan | FullDuplexPlan | None:
    """Build the plan a mode needs from the (mode, alpha, B, t) config keys."""
    if mode in ("hd_pf", "hd_pf_systematic"):
        return HalfDuplexPlan(alpha=float(plan_cfg.get("alpha", 0.5)), c_star=cfg.c_star, tokens=cfg.tokens)
    if mode == "hd_af":
        return HalfDuplexPlan(alpha=0.5, c_star=cfg.c_star, tokens=cfg.tokens)
    if mode in ("fd_pf", "fd_af"):
        b = int(plan_cfg.get("B", 2))
        t = plan_cfg.get("t")
        return FullDuplexPlan(blocks=b, c_star=cfg.c_star, tokens=cfg.tokens, memory=None if t is None else int(t))
    if mode == "direct":
        return FullDuplexPlan(blocks=1, c_star=cfg.c_star, tokens=cfg.tokens)
    raise ValueError(f"unknown mode {mode!r}")


def plan_to_config(mode: str, plan: HalfDuplexPlan | FullDuplexPlan | None) -> dict:
    out: dict = {"mode": mode}
    if isinstance(plan, HalfDuplexPlan):
        out["alpha"] = plan.alpha
    elif isinstance(plan, FullDuplexPlan):
        out["B"] = plan.blocks
        out["t"] = plan.memory
    return out
