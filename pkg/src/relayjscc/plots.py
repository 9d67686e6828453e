"""Static figures for sweep tables, rate grids and link-grid evaluations.

Uses the Agg backend only — no display server required.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _read_csv(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return [dict(row) for row in csv.DictReader(fh)]


def plot_sweep(rows: list[dict] | str | Path, param: str, out_path: str | Path) -> Path:
    """Mean PSNR versus the swept parameter with 95% CI bars."""
    if not isinstance(rows, list):
        rows = _read_csv(rows)
    xs = [float(r[param]) for r in rows]
    ys = [float(r["psnr"]) for r in rows]
    cis = [float(r.get("psnr_ci95", 0.0)) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(xs, ys, yerr=cis, marker="o", capsize=3)
    ax.set_xlabel(param)
    ax.set_ylabel("PSNR (dB)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def plot_rates(rows: list[dict] | str | Path, out_path: str | Path) -> Path:
    """Achievable rate versus c_rd, one curve per c_sr."""
    if not isinstance(rows, list):
        rows = _read_csv(rows)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    by_sr: dict[float, list[dict]] = {}
    for r in rows:
        by_sr.setdefault(float(r["c_sr_db"]), []).append(r)
    for c_sr, group in sorted(by_sr.items()):
        group = sorted(group, key=lambda r: float(r["c_rd_db"]))
        ax.plot(
            [float(r["c_rd_db"]) for r in group],
            [float(r["r_star"]) for r in group],
            marker="o",
            label=f"c_sr {c_sr:g} dB",
        )
    ax.set_xlabel("c_rd (dB)")
    ax.set_ylabel("R* (bits / real use)")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)


def plot_link_grid(rows: list[dict] | str | Path, out_path: str | Path) -> Path:
    """PSNR versus c_rd, one curve per c_sr (evaluation grid output)."""
    if not isinstance(rows, list):
        rows = _read_csv(rows)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    by_sr: dict[float, list[dict]] = {}
    for r in rows:
        by_sr.setdefault(float(r["c_sr_db"]), []).append(r)
    for c_sr, group in sorted(by_sr.items()):
        group = sorted(group, key=lambda r: float(r["c_rd_db"]))
        ax.errorbar(
            [float(r["c_rd_db"]) for r in group],
            [float(r["psnr"]) for r in group],
            yerr=[float(r.get("psnr_ci95", 0.0)) for r in group],
            marker="o",
            capsize=3,
            label=f"c_sr {c_sr:g} dB",
        )
    ax.set_xlabel("c_rd (dB)")
    ax.set_ylabel("PSNR (dB)")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return Path(out_path)
