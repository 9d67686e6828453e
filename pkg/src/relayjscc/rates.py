"""Achievable-rate baselines for the digital relay schemes.

Closed-form decode-and-forward (DF) and compress-and-forward (CF) rates for
both duplex modes, optimized over the time split alpha, the correlation
coefficient beta and the power split gamma by brute-force grid search with an
optional coarse-to-fine refinement. Rates are in bits per real channel use
(log2 with the 1/2 prefactor), so a source bandwidth ratio rho gives a bit
budget of 2*M*rho*R per image.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import LinkState, lin_to_db

#: relay per-symbol power in its half-duplex transmit period: the total
#: budget k*P_r concentrated into (1-alpha)*k uses ("scaled"), or taken as
#: P_r per symbol ("raw").
P_R_MODES = ("scaled", "raw")


@dataclass(frozen=True)
class GridSpec:
    """Search grid over the open cube (0,1)^3."""

    step: float = 1e-3
    alpha_range: tuple[float, float] = (0.0, 1.0)
    beta_range: tuple[float, float] = (0.0, 1.0)
    gamma_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self) -> None:
        if not 0.0 < self.step <= 0.1:
            raise ValueError(f"step must lie in (0, 0.1], got {self.step}")
        for name in ("alpha_range", "beta_range", "gamma_range"):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo < hi <= 1.0:
                raise ValueError(f"{name} must satisfy 0 <= lo < hi <= 1")

    def axis(self, name: str, step: float | None = None) -> np.ndarray:
        """Grid points strictly inside the named range at multiples of step."""
        lo, hi = getattr(self, f"{name}_range")
        step = self.step if step is None else step
        pts = np.arange(math.floor(lo / step) + 1, math.ceil(hi / step)) * step
        return pts[(pts > lo) & (pts < hi)]


@dataclass(frozen=True)
class RateResult:
    """DF/CF rates for one link, with the argmax of each search."""

    r_df: float
    r_cf: float
    df_argmax: dict[str, float] = field(default_factory=dict)
    cf_argmax: dict[str, float] = field(default_factory=dict)

    @property
    def r_star(self) -> float:
        return max(self.r_df, self.r_cf)

    @property
    def winner(self) -> str:
        return "df" if self.r_df >= self.r_cf else "cf"

    @property
    def argmax(self) -> dict[str, float]:
        return self.df_argmax if self.winner == "df" else self.cf_argmax


def direct_rate(link: LinkState) -> float:
    """Point-to-point rate 1/2 log2(1 + c_sd^2 P_s)."""
    return 0.5 * math.log2(1.0 + link.c_sd**2 * link.p_s)


def _relay_period_power(link: LinkState, alpha, p_r_mode: str):
    if p_r_mode not in P_R_MODES:
        raise ValueError(f"p_r_mode must be one of {P_R_MODES}, got {p_r_mode!r}")
    return link.p_r / (1.0 - alpha) if p_r_mode == "scaled" else link.p_r


def _check_open_unit(**kw: float) -> None:
    for name, v in kw.items():
        if not 0.0 < v < 1.0:
            raise ValueError(f"{name} must lie in (0,1), got {v}")


def rate_hd_df(alpha: float, beta: float, gamma: float, link: LinkState, p_r_mode: str = "scaled") -> float:
    """Half-duplex DF rate min{C1, C2}: C1 is what the relay can decode plus
    the second-period direct-link part, C2 the destination's two-phase mutual
    information with coherent combining at correlation beta."""
    _check_open_unit(alpha=alpha, beta=beta, gamma=gamma)
    c1, c2 = _hd_df_terms(np.float64(alpha), np.float64(beta), np.float64(gamma), link, p_r_mode)
    return float(np.minimum(c1, c2))


def _hd_df_terms(alpha, beta, gamma, link: LinkState, p_r_mode: str):
    ps1 = gamma * link.p_s / alpha
    ps2 = (1.0 - gamma) * link.p_s / (1.0 - alpha)
    pr = _relay_period_power(link, alpha, p_r_mode)
    c1 = (alpha / 2) * np.log2(1 + link.c_sr**2 * ps1) + ((1 - alpha) / 2) * np.log2(
        1 + (1 - beta) * link.c_sd**2 * ps2
    )
    c2 = (alpha / 2) * np.log2(1 + link.c_sd**2 * ps1) + ((1 - alpha) / 2) * np.log2(
        1 + link.c_sd**2 * ps2 + link.c_rd**2 * pr + 2 * link.c_sd * link.c_rd * np.sqrt(beta * ps2 * pr)
    )
    return c1, c2


def rate_hd_cf(alpha: float, gamma: float, link: LinkState, p_r_mode: str = "scaled") -> float:
    """Half-duplex CF rate: the relay quantizes its first-period observation
    (quantization noise sigma_w^2 set by the R-D link) and the destination
    combines it with its own reception. Falls back to the two-phase direct
    rate when the compression term degenerates (e.g. c_rd -> 0)."""
    _check_open_unit(alpha=alpha, gamma=gamma)
    rate, degenerate = _hd_cf_value(np.float64(alpha), np.float64(gamma), link, p_r_mode)
    if bool(degenerate):
        warnings.warn("CF compression term degenerated; returning the direct-rate floor")
    return float(rate)


def _hd_cf_value(alpha, gamma, link: LinkState, p_r_mode: str):
    ps1 = gamma * link.p_s / alpha
    ps2 = (1.0 - gamma) * link.p_s / (1.0 - alpha)
    pr = _relay_period_power(link, alpha, p_r_mode)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        den = (link.c_sd**2 * ps1 + 1.0) * (
            np.power(1.0 + link.c_rd**2 * pr / (1.0 + link.c_sd**2 * ps2), 1.0 / alpha - 1.0) - 1.0
        )
        sw2 = (link.c_sr**2 * ps1 + link.c_sd**2 * ps1 + 1.0) / den
        relay_term = link.c_sr**2 * ps1 / (1.0 + sw2)
    degenerate = ~np.isfinite(sw2) | (np.asarray(den) <= 0.0)
    relay_term = np.where(degenerate, 0.0, relay_term)
    rate = (alpha / 2) * np.log2(1 + link.c_sd**2 * ps1 + relay_term) + ((1 - alpha) / 2) * np.log2(
        1 + link.c_sd**2 * ps2
    )
    return rate, degenerate


def rate_fd_df(beta: float, link: LinkState, combiner: str = "min") -> float:
    """Full-duplex DF rate at a fixed source/relay correlation beta."""
    _check_open_unit(beta=beta)
    return float(_fd_df_terms(np.float64(beta), link, combiner))


def _fd_df_terms(beta, link: LinkState, combiner: str):
    r1 = 0.5 * np.log2(1 + (1 - beta) * link.c_sr**2 * link.p_s)
    r2 = 0.5 * np.log2(
        1
        + link.c_sd**2 * link.p_s
        + link.c_rd**2 * link.p_r
        + 2 * link.c_sd * link.c_rd * np.sqrt(beta * link.p_s * link.p_r)
    )
    if combiner == "min":
        return np.minimum(r1, r2)
    if combiner == "sum":  # the source text's literal reading, kept for comparison
        return r1 + r2
    raise ValueError(f"combiner must be 'min' or 'sum', got {combiner!r}")


def rate_fd_cf(link: LinkState) -> float:
    """Full-duplex CF rate (closed form, no free parameters)."""
    if link.c_rd == 0.0 or link.p_r == 0.0:
        return direct_rate(link)
    sw2_plus_1 = 1.0 + (link.c_sd**2 * link.p_s + link.c_sr**2 * link.p_s + 1.0) / (link.c_rd**2 * link.p_r)
    return 0.5 * math.log2(1.0 + link.c_sd**2 * link.p_s + link.c_sr**2 * link.p_s / sw2_plus_1)


def rate_fd(link: LinkState, grid: GridSpec | None = None, combiner: str = "min") -> RateResult:
    """Best full-duplex DF (over beta) and CF rates."""
    grid = grid or GridSpec()
    betas = grid.axis("beta")
    values = _fd_df_terms(betas, link, combiner)
    i = int(np.argmax(values))
    return RateResult(
        r_df=float(values[i]),
        r_cf=rate_fd_cf(link),
        df_argmax={"beta": float(betas[i])},
        cf_argmax={},
    )


def optimize_hd_rate(
    link: LinkState, grid: GridSpec | None = None, p_r_mode: str = "scaled", refine: bool = True
) -> RateResult:
    """Brute-force maximization of the half-duplex DF rate over (alpha, beta,
    gamma) and the CF rate over (alpha, gamma).

    With refine=True the DF search runs on a coarse grid first (step capped at
    0.02) and then at the requested step inside a window of two coarse steps
    around the incumbent; the CF plane is cheap enough to search directly.
    Deterministic: identical grids give bit-identical results.
    """
    grid = grid or GridSpec()
    coarse = max(grid.step, 0.02) if refine else grid.step
    df_val, df_arg = _df_search(link, grid, p_r_mode, step=coarse)
    if refine and coarse > grid.step:
        window = 2.0 * coarse
        sub = GridSpec(
            step=grid.step,
            alpha_range=_clip_window(df_arg[0], window, grid.alpha_range),
            beta_range=_clip_window(df_arg[1], window, grid.beta_range),
            gamma_range=_clip_window(df_arg[2], window, grid.gamma_range),
        )
        df_val, df_arg = _df_search(link, sub, p_r_mode, step=grid.step)

    alphas = grid.axis("alpha")
    gammas = grid.axis("gamma")
    cf_vals, _ = _hd_cf_value(alphas[:, None], gammas[None, :], link, p_r_mode)
    ia, ig = np.unravel_index(np.argmax(cf_vals), cf_vals.shape)
    return RateResult(
        r_df=float(df_val),
        r_cf=float(cf_vals[ia, ig]),
        df_argmax={"alpha": df_arg[0], "beta": df_arg[1], "gamma": df_arg[2]},
        cf_argmax={"alpha": float(alphas[ia]), "gamma": float(gammas[ig])},
    )


def _clip_window(center: float, width: float, outer: tuple[float, float]) -> tuple[float, float]:
    return (max(outer[0], center - width), min(outer[1], center + width))


def _df_search(link: LinkState, grid: GridSpec, p_r_mode: str, step: float) -> tuple[float, tuple[float, float, float]]:
    alphas = grid.axis("alpha", step)
    betas = grid.axis("beta", step)
    gammas = grid.axis("gamma", step)
    best_val, best_arg = -math.inf, (math.nan,) * 3
    for a in alphas:  # one (beta, gamma) plane per alpha keeps memory flat
        c1, c2 = _hd_df_terms(a, betas[:, None], gammas[None, :], link, p_r_mode)
        plane = np.minimum(c1, c2)
        ib, ig = np.unravel_index(np.argmax(plane), plane.shape)
        if plane[ib, ig] > best_val:
            best_val = float(plane[ib, ig])
            best_arg = (float(a), float(betas[ib]), float(gammas[ig]))
    return best_val, best_arg


CSV_COLUMNS = ("c_sr_db", "c_rd_db", "p_s_db", "p_r_db", "r_df", "r_cf", "r_star", "alpha", "beta", "gamma")


def rate_row(link: LinkState, result: RateResult) -> dict:
    """One CSV row: link in dB, rates, and the winning strategy's argmax
    (search dimensions the winner does not use stay empty)."""
    arg = result.argmax
    return {
        "c_sr_db": lin_to_db(link.c_sr**2),
        "c_rd_db": lin_to_db(link.c_rd**2),
        "p_s_db": lin_to_db(link.p_s),
        "p_r_db": lin_to_db(link.p_r),
        "r_df": result.r_df,
        "r_cf": result.r_cf,
        "r_star": result.r_star,
        "alpha": arg.get("alpha", ""),
        "beta": arg.get("beta", ""),
        "gamma": arg.get("gamma", ""),
    }


def write_rate_csv(path: str | Path, rows: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    return path


def rate_table(
    links: list[LinkState],
    duplex: str = "hd",
    grid: GridSpec | None = None,
    p_r_mode: str = "scaled",
    combiner: str = "min",
) -> list[dict]:
    """RateResults for a list of links, as CSV-ready rows."""
    if duplex not in ("hd", "fd"):
        raise ValueError(f"duplex must be 'hd' or 'fd', got {duplex!r}")
    rows = []
    for link in links:
        if duplex == "hd":
            res = optimize_hd_rate(link, grid, p_r_mode)
        else:
            res = rate_fd(link, grid, combiner)
        rows.append(rate_row(link, res))
    return rows


def bit_budget(m: int, rho: float, r_star: float) -> int:
    """Bits available to a digital baseline for one M-pixel source at
    bandwidth ratio rho: floor(2 M rho R*)."""
    if m <= 0 or rho <= 0 or r_star < 0:
        raise ValueError("need m > 0, rho > 0, r_star >= 0")
    return math.floor(2 * m * rho * r_star)
