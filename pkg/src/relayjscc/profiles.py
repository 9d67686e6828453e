"""Preset experiment configurations.

The toy profile runs end to end on a laptop CPU in minutes and exists for
development, tests and trend checks; the full profile matches the scale the
reference results were produced at and needs real hardware and CIFAR-10.
"""

from __future__ import annotations

from .config import ExperimentConfig

PROFILES = ("toy", "full")


def toy_profile(mode: str = "hd_pf") -> ExperimentConfig:
    return ExperimentConfig(
        mode=mode,
        link={"c_sr_db": 10.0, "c_rd_db": 10.0},
        plan={"alpha": 0.5} if mode.startswith("hd") else {"B": 2},
        codec={"p": 4, "c": 32, "c_star": 6, "n_e": 2, "n_r": 2, "n_d": 2, "heads": 4},
        train={"max_epochs": 30, "batch_size": 64, "lr_init": 1e-3},
        dataset={"name": "synthetic", "n_train": 512, "n_val": 128, "n_test": 128, "shape": [3, 8, 8]},
        eval={"seed": 0, "batch_size": 64},
    )


def full_profile(mode: str = "fd_pf") -> ExperimentConfig:
    return ExperimentConfig(
        mode=mode,
        link={"c_sr_db": 10.0, "c_rd_db": 10.0},
        plan={"alpha": 0.5} if mode.startswith("hd") else {"B": 6},
        codec={"p": 8, "c": 256, "c_star": 24, "n_e": 6, "n_r": 4, "n_d": 8, "heads": 8},
        train={},  # module defaults: lr 1e-4, 2000 epochs, batch 64
        dataset={"name": "cifar10"},
        eval={"seed": 0, "batch_size": 256},
    )


def get_profile(name: str, mode: str | None = None) -> ExperimentConfig:
    if name == "toy":
        return toy_profile(mode or "hd_pf")
    if name == "full":
        return full_profile(mode or "fd_pf")
    raise ValueError(f"unknown profile {name!r}; expected one of {PROFILES}")
