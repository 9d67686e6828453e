"""Experiment configuration: one serializable object that pins down a run.

Everything downstream (models, plans, links, datasets, training) is built
from plain mappings here, so a config file plus the package version fully
determines an experiment. Hashes of the canonical form key checkpoint caches
and run directories.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .channel import LinkState
from .codec import CodecConfig
from .data import ImageSet, load_dataset
from .protocols import MODES, FullDuplexPlan, HalfDuplexPlan, plan_from_config
from .training import TrainConfig


def canonical_hash(obj) -> str:
    """sha256 of the canonical JSON form (sorted keys, no whitespace)."""
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class ExperimentConfig:
    """A full experiment: protocol mode, time/block plan, link, architecture,
    training and dataset settings, all as plain mappings so YAML round-trips
    losslessly."""

    mode: str
    link: dict = field(default_factory=lambda: {"c_sr_db": 10.0, "c_rd_db": 10.0})
    plan: dict = field(default_factory=dict)
    codec: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    dataset: dict = field(default_factory=lambda: {"name": "synthetic"})
    eval: dict = field(default_factory=lambda: {"seed": 0, "batch_size": 64})

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")

    # ---- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def to_yaml(self, path: str | Path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))

    def hash(self) -> str:
        return canonical_hash(self.to_dict())

    def with_overrides(self, overrides: list[str]) -> "ExperimentConfig":
        """Apply dotted key=value strings (values parsed as YAML scalars), e.g.
        ["train.seed=3", "link.c_sr_db=10"]. Returns a new config."""
        d = self.to_dict()
        for item in overrides:
            if "=" not in item:
                raise ValueError(f"override must look like section.key=value, got {item!r}")
            dotted, raw = item.split("=", 1)
            keys = dotted.split(".")
            node = d
            for key in keys[:-1]:
                if key not in node or not isinstance(node[key], dict):
                    raise ValueError(f"unknown override path {dotted!r}")
                node = node[key]
            if keys[0] not in d:
                raise ValueError(f"unknown override path {dotted!r}")
            node[keys[-1]] = yaml.safe_load(raw)
        return ExperimentConfig.from_dict(d)

    # ---- builders ---------------------------------------------------------

    def build_codec(self) -> CodecConfig:
        return CodecConfig(**self.codec)

    def build_link(self) -> LinkState:
        return LinkState.from_config(self.link)

    def build_plan(self) -> HalfDuplexPlan | FullDuplexPlan | None:
        return plan_from_config(self.mode, self.build_codec(), self.plan)

    def build_train(self) -> TrainConfig:
        return TrainConfig(**self.train)

    def build_dataset(self) -> tuple[ImageSet, ImageSet, ImageSet]:
        return load_dataset(self.dataset)
