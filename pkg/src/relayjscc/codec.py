"""Transformer codecs: source encoder, relay processor, destination decoder.

All three share the same backbone: a linear lift to the hidden width, learned
additive positional embeddings, a stack of residual attention layers, an
optional conditioning module that rescales tokens from link-quality side
information, and a linear head sized for the node's role. The source encoder
additionally folds images into token sequences; the decoder mirrors it.
"""

from __future__ import annotations

import contextlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .signals import RelayNormStats


@dataclass
class CodecConfig:
    """Architecture hyperparameters shared by every node.

    c_star is the per-token width at the channel boundary; p**2 * c_star equals
    twice the channel bandwidth k. Depths follow the source/relay/destination
    split; heads and mlp_ratio apply to every attention layer.
    """

    p: int = 8
    c: int = 256
    c_star: int = 24
    n_e: int = 6
    n_r: int = 4
    n_d: int = 8
    la_enabled: bool = False
    heads: int = 8
    mlp_ratio: int = 4

    def __post_init__(self) -> None:
        if min(self.n_e, self.n_r, self.n_d) < 1:
            raise ValueError("transformer depths must be >= 1")
        if self.p < 1 or self.c < 1 or self.c_star < 1:
            raise ValueError("p, c and c_star must be positive")
        if self.c % self.heads != 0:
            raise ValueError(f"hidden width {self.c} not divisible by {self.heads} heads")
        if (self.p**2 * self.c_star) % 2 != 0:
            raise ValueError("p^2 * c_star must be even to form complex symbols")

    @property
    def tokens(self) -> int:
        return self.p**2

    @property
    def k(self) -> int:
        """Channel uses per image implied by the boundary width."""
        return self.p**2 * self.c_star // 2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CodecConfig":
        return cls(**d)


@contextlib.contextmanager
def seeded_init(seed: int):
    """Fork the global RNG so module construction is reproducible without
    disturbing unrelated random state."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield


def pad_to_grid(images: Tensor, p: int) -> Tensor:
    """Zero-pad H and W up to the next multiple of p."""
    h, w = images.shape[-2:]
    ph = (-h) % p
    pw = (-w) % p
    if ph == 0 and pw == 0:
        return images
    return F.pad(images, (0, pw, 0, ph))


def image_to_sequence(images: Tensor, p: int) -> Tensor:
    """Partition [N, C, H, W] into a p x p grid of patches and flatten each:
    [N, p^2, C*H*W/p^2]. Inverse of :func:`sequence_to_image`."""
    images = pad_to_grid(images, p)
    n, ch, h, w = images.shape
    hp, wp = h // p, w // p
    x = images.reshape(n, ch, p, hp, p, wp)
    x = x.permute(0, 2, 4, 1, 3, 5)
    return x.reshape(n, p * p, ch * hp * wp)


def sequence_to_image(tokens: Tensor, p: int, image_shape: tuple[int, int, int]) -> Tensor:
    """Reassemble [N, p^2, N_t] into [N, C, H, W], cropping any grid padding."""
    ch, h, w = image_shape
    hpad, wpad = h + (-h) % p, w + (-w) % p
    hp, wp = hpad // p, wpad // p
    n = tokens.shape[0]
    x = tokens.reshape(n, p, p, ch, hp, wp)
    x = x.permute(0, 3, 1, 4, 2, 5)
    return x.reshape(n, ch, hpad, wpad)[..., :h, :w]


class TransformerLayer(nn.Module):
    """Residual attention block: S1 = S + MSA(S); S2 = S1 + MLP(LN(S1))."""

    def __init__(self, c: int, heads: int, mlp_ratio: int):
        super().__init__()
        self.att = nn.MultiheadAttention(c, heads, batch_first=True)
        self.ln = nn.LayerNorm(c)
        self.mlp = nn.Sequential(
            nn.Linear(c, mlp_ratio * c), nn.GELU(), nn.Linear(mlp_ratio * c, c)
        )

    def forward(self, s: Tensor) -> Tensor:
        if s.shape[-1] != self.ln.normalized_shape[0]:
            raise ValueError(f"expected width {self.ln.normalized_shape[0]}, got {s.shape[-1]}")
        s1 = s + self.att(s, s, s, need_weights=False)[0]
        return s1 + self.mlp(self.ln(s1))


class ConditionScaler(nn.Module):
    """Token reweighting from side information: a small MLP maps the per-token
    means concatenated with u to one multiplicative weight per token."""

    def __init__(self, tokens: int):
        super().__init__()
        self.tokens = tokens
        self.net = nn.Sequential(
            nn.Linear(tokens + 4, tokens), nn.GELU(), nn.Linear(tokens, tokens)
        )

    def forward(self, s: Tensor, u: Tensor) -> Tensor:
        if u.shape[-1] != 4:
            raise ValueError(f"side information must have length 4, got {u.shape[-1]}")
        if u.dim() == 1:
            u = u.expand(s.shape[0], 4)
        feats = torch.cat([s.mean(dim=-1), u.to(s.dtype)], dim=-1)
        m = self.net(feats)
        return m.unsqueeze(-1) * s

    def force_identity(self) -> None:
        """Pin the output layer to emit all-ones weights (testing hook)."""
        last = self.net[-1]
        nn.init.zeros_(last.weight)
        nn.init.ones_(last.bias)


class _Backbone(nn.Module):
    """Shared trunk: lift -> positional embedding -> attention stack ->
    optional conditioning -> head."""

    def __init__(self, cfg: CodecConfig, depth: int, in_width: int, out_width: int, head: nn.Module | None = None):
        super().__init__()
        self.cfg = cfg
        self.in_width = in_width
        self.lift = nn.Sequential(
            nn.Linear(in_width, cfg.c), nn.GELU(), nn.Linear(cfg.c, cfg.c)
        )
        self.pos = nn.Parameter(0.02 * torch.randn(1, cfg.tokens, cfg.c))
        self.layers = nn.ModuleList(
            TransformerLayer(cfg.c, cfg.heads, cfg.mlp_ratio) for _ in range(depth)
        )
        self.scaler = ConditionScaler(cfg.tokens) if cfg.la_enabled else None
        self.head = head if head is not None else nn.Linear(cfg.c, out_width)

    def forward(self, tokens: Tensor, u: Tensor | None = None) -> Tensor:
        if tokens.shape[-2] != self.cfg.tokens:
            raise ValueError(f"expected {self.cfg.tokens} tokens, got {tokens.shape[-2]}")
        if tokens.shape[-1] != self.in_width:
            raise ValueError(f"expected input width {self.in_width}, got {tokens.shape[-1]}")
        s = self.lift(tokens) + self.pos
        for layer in self.layers:
            s = layer(s)
        if self.scaler is not None:
            if u is None:
                raise ValueError("side information required when conditioning is enabled")
            s = self.scaler(s, u)
        return self.head(s)


class SourceEncoder(nn.Module):
    """Image -> channel-boundary tokens [N, p^2, c_star]."""

    def __init__(self, cfg: CodecConfig, image_shape: tuple[int, int, int], out_width: int | None = None):
        super().__init__()
        self.cfg = cfg
        self.image_shape = image_shape
        ch, h, w = image_shape
        n_t = ch * (h + (-h) % cfg.p) * (w + (-w) % cfg.p) // cfg.tokens
        self.backbone = _Backbone(cfg, cfg.n_e, n_t, out_width or cfg.c_star)

    def forward(self, images: Tensor, u: Tensor | None = None) -> Tensor:
        if images.shape[1:] != torch.Size(self.image_shape):
            raise ValueError(f"expected image shape {self.image_shape}, got {tuple(images.shape[1:])}")
        return self.backbone(image_to_sequence(images, self.cfg.p), u)


class RelayProcessor(nn.Module):
    """Token matrix -> relay transmit tokens; no image folding at the relay.

    When the observed and emitted widths match, a residual path initialized
    as the identity (with a zeroed backbone head) makes the untrained relay
    forward its observation unchanged -- plain amplification -- so training
    starts from the classical forwarding point and learns a refinement."""

    def __init__(self, cfg: CodecConfig, in_width: int, out_width: int):
        super().__init__()
        self.cfg = cfg
        self.out_width = out_width
        self.backbone = _Backbone(cfg, cfg.n_r, in_width, out_width)
        self.skip = nn.Linear(in_width, out_width, bias=False) if in_width == out_width else None
        if self.skip is not None:
            with torch.no_grad():
                self.skip.weight.copy_(torch.eye(out_width))
                self.backbone.head.weight.zero_()
                self.backbone.head.bias.zero_()

    def forward(self, tokens: Tensor, u: Tensor | None = None) -> Tensor:
        out = self.backbone(tokens, u)
        if self.skip is not None:
            out = out + self.skip(tokens)
        return out


class DestinationDecoder(nn.Module):
    """Channel-boundary tokens [N, p^2, c_star] -> reconstructed image."""

    def __init__(self, cfg: CodecConfig, image_shape: tuple[int, int, int]):
        super().__init__()
        self.cfg = cfg
        self.image_shape = image_shape
        ch, h, w = image_shape
        n_t = ch * (h + (-h) % cfg.p) * (w + (-w) % cfg.p) // cfg.tokens
        head = nn.Sequential(
            nn.Linear(cfg.c, cfg.c), nn.GELU(), nn.Linear(cfg.c, n_t), nn.Sigmoid()
        )
        self.backbone = _Backbone(cfg, cfg.n_d, cfg.c_star, n_t, head=head)

    def forward(self, tokens: Tensor, u: Tensor | None = None) -> Tensor:
        out = self.backbone(tokens, u)
        return sequence_to_image(out, self.cfg.p, self.image_shape)


@dataclass
class CodecBundle:
    """The trainable components of one protocol plus everything needed to
    reload them: architecture config, image shape and relay statistics."""

    cfg: CodecConfig
    image_shape: tuple[int, int, int]
    source: SourceEncoder
    decoder: DestinationDecoder
    relay: RelayProcessor | None = None
    parity: RelayProcessor | None = None
    stats: RelayNormStats | None = None
    meta: dict = field(default_factory=dict)

    def modules(self) -> dict[str, nn.Module]:
        out = {"source": self.source, "decoder": self.decoder}
        if self.relay is not None:
            out["relay"] = self.relay
        if self.parity is not None:
            out["parity"] = self.parity
        return out

    def parameters(self):
        for mod in self.modules().values():
            yield from mod.parameters()

    def train(self) -> None:
        for mod in self.modules().values():
            mod.train()

    def eval(self) -> None:
        for mod in self.modules().values():
            mod.eval()

    def save(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name, mod in self.modules().items():
            torch.save(mod.state_dict(), directory / f"{name}.pt")
        manifest = {
            "codec": self.cfg.to_dict(),
            "image_shape": list(self.image_shape),
            "components": sorted(self.modules()),
            "source_out_width": self.source.backbone.head.out_features,
            "relay_widths": {
                name: [m.backbone.in_width, m.out_width]
                for name, m in (("relay", self.relay), ("parity", self.parity))
                if m is not None
            },
            "norm_stats": None
            if self.stats is None
            else {"mu": float(self.stats.mu), "sigma": float(self.stats.sigma)},
            "meta": self.meta,
        }
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
        return directory

    @classmethod
    def load(cls, directory: str | Path) -> "CodecBundle":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        cfg = CodecConfig.from_dict(manifest["codec"])
        image_shape = tuple(manifest["image_shape"])
        bundle = cls(
            cfg=cfg,
            image_shape=image_shape,
            source=SourceEncoder(cfg, image_shape, out_width=manifest.get("source_out_width")),
            decoder=DestinationDecoder(cfg, image_shape),
            meta=manifest.get("meta", {}),
        )
        for name in ("relay", "parity"):
            if name in manifest["components"]:
                in_w, out_w = manifest["relay_widths"][name]
                setattr(bundle, name, RelayProcessor(cfg, in_w, out_w))
        for name, mod in bundle.modules().items():
            mod.load_state_dict(torch.load(directory / f"{name}.pt", weights_only=True))
        if manifest["norm_stats"] is not None:
            bundle.stats = RelayNormStats(**manifest["norm_stats"])
        return bundle
