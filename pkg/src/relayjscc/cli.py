"""Command-line entry point.

Verbs: train, eval, rates, sweep-alpha, sweep-b, sweep-memory, timing, plot.
Each invocation creates a fresh run directory <out>/<verb>-<confighash>-<seq>
containing the resolved configuration and every artifact; previous run
directories are never touched (training may be resumed in place via
--resume, which is explicitly a continuation of that run).
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from pathlib import Path

import torch

from .channel import LinkState
from .codec import CodecBundle
from .config import ExperimentConfig, canonical_hash
from .evaluation import (
    attention_scaling_probe,
    evaluate,
    sweep_alpha,
    sweep_argmax,
    sweep_blocks,
    sweep_memory,
    timing_report,
    write_sweep_csv,
)
from .profiles import PROFILES, get_profile
from .protocols import build_bundle, plan_from_config
from .rates import GridSpec, rate_table, write_rate_csv
from .training import train


def _parse_db_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip() != ""]


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_yaml(args.config)
    else:
        cfg = get_profile(args.profile, args.mode)
    if args.set:
        cfg = cfg.with_overrides(args.set)
    return cfg


def _new_run_dir(root: str | Path, verb: str, key: str) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for seq in itertools.count(1):
        candidate = root / f"{verb}-{key[:8]}-{seq:03d}"
        if not candidate.exists():
            candidate.mkdir()
            return candidate
    raise AssertionError("unreachable")


def _write_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


# ---- verbs ------------------------------------------------------------------


def cmd_train(args) -> int:
    if args.resume:
        run_dir = Path(args.resume)
        cfg = ExperimentConfig.from_yaml(run_dir / "resolved_config.yaml")
    else:
        cfg = _load_config(args)
    sets = cfg.build_dataset()  # fail here -> no run directory is created
    if not args.resume:
        run_dir = _new_run_dir(args.out, "train", cfg.hash())
        cfg.to_yaml(run_dir / "resolved_config.yaml")
    result = train(
        cfg.mode,
        sets[0],
        sets[1],
        cfg.build_link(),
        cfg.build_plan(),
        cfg.build_codec(),
        cfg.build_train(),
        out_dir=run_dir / "checkpoint",
        resume=bool(args.resume),
    )
    (run_dir / "summary.json").write_text(
        json.dumps(
            {"best_val": result.best_val, "best_epoch": result.best_epoch, "epochs": len(result.history)},
            indent=2,
        )
    )
    print(run_dir)
    return 0


def _resolve_checkpoint(path: str | Path) -> Path:
    path = Path(path)
    for candidate in (path, path / "model_best", path / "checkpoint" / "model_best"):
        if (candidate / "manifest.json").exists():
            return candidate
    raise FileNotFoundError(f"no model manifest under {path}")


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    bundle = CodecBundle.load(_resolve_checkpoint(args.checkpoint))
    codec = cfg.build_codec()
    if bundle.cfg.to_dict() != codec.to_dict():
        raise ValueError(
            f"checkpoint/config mismatch: checkpoint codec {bundle.cfg.to_dict()} "
            f"vs config codec {codec.to_dict()}"
        )
    mode = bundle.meta.get("mode", cfg.mode)
    if mode != cfg.mode:
        raise ValueError(f"checkpoint was trained for mode {mode!r}, config says {cfg.mode!r}")
    plan = plan_from_config(mode, codec, bundle.meta)
    test_set = cfg.build_dataset()[2]
    c_sr_grid = _parse_db_list(args.c_sr_db) if args.c_sr_db else [cfg.link["c_sr_db"]]
    c_rd_grid = _parse_db_list(args.c_rd_db) if args.c_rd_db else [cfg.link["c_rd_db"]]
    run_dir = _new_run_dir(args.out, "eval", cfg.hash())
    cfg.to_yaml(run_dir / "resolved_config.yaml")
    (run_dir / "reports").mkdir()
    rows = []
    for i, (c_sr, c_rd) in enumerate(itertools.product(c_sr_grid, c_rd_grid)):
        link = LinkState.from_config({**cfg.link, "c_sr_db": c_sr, "c_rd_db": c_rd})
        report = evaluate(
            mode, test_set, link, bundle, plan=plan, stats=bundle.stats,
            seed=cfg.eval.get("seed", 0), batch_size=cfg.eval.get("batch_size", 64),
        )
        report.write_json(run_dir / "reports" / f"point_{i:02d}.json")
        report.write_jsonl(run_dir / "reports" / f"point_{i:02d}.jsonl")
        rows.append(
            {
                "c_sr_db": c_sr,
                "c_rd_db": c_rd,
                "psnr": report.psnr_mean,
                "psnr_ci95": report.psnr_ci95,
                "ssim": report.ssim_mean,
                "ssim_ci95": report.ssim_ci95,
            }
        )
    _write_csv(run_dir / "grid.csv", rows)
    from .plots import plot_link_grid

    plot_link_grid(rows, run_dir / "grid.png")
    print(run_dir)
    return 0


def cmd_rates(args) -> int:
    links = [
        LinkState.from_db(c_sr_db=c_sr, c_rd_db=c_rd, p_s_db=args.p_s_db, p_r_db=args.p_r_db)
        for c_sr, c_rd in itertools.product(_parse_db_list(args.c_sr_db), _parse_db_list(args.c_rd_db))
    ]
    grid = GridSpec(step=args.step)
    rows = rate_table(links, duplex=args.duplex, grid=grid, p_r_mode=args.p_r_mode, combiner=args.combiner)
    key = canonical_hash(vars(args) | {"func": args.command})
    run_dir = _new_run_dir(args.out, "rates", key)
    (run_dir / "resolved_config.yaml").write_text(
        "\n".join(f"{k}: {v}" for k, v in sorted(vars(args).items()) if k != "func") + "\n"
    )
    write_rate_csv(run_dir / "rates.csv", rows)
    from .plots import plot_rates

    plot_rates(rows, run_dir / "rates.png")
    print(run_dir)
    return 0


def _cmd_sweep(args, param: str) -> int:
    cfg = _load_config(args)
    sets = cfg.build_dataset()
    link = cfg.build_link()
    codec = cfg.build_codec()
    train_cfg = cfg.build_train()
    cache_dir = Path(args.cache) if args.cache else Path(args.out) / "cache"
    # Validate the swept plans up front so a bad value cannot leave behind a
    # partially written run directory.
    if param == "alpha":
        values = [float(x) for x in args.alphas.split(",")]
        for a in values:
            plan_from_config("hd_pf", codec, {"alpha": a})
    elif param == "b":
        values = [int(x) for x in args.blocks.split(",")]
        for b in values:
            plan_from_config("fd_pf", codec, {"B": b})
    else:
        values = [int(x) for x in args.memories.split(",")]
        for t in values:
            plan_from_config("fd_pf", codec, {"B": args.blocks, "t": t})
    run_dir = _new_run_dir(args.out, f"sweep-{param}", cfg.hash())
    cfg.to_yaml(run_dir / "resolved_config.yaml")
    if param == "alpha":
        rows = sweep_alpha(values, sets, link, codec, train_cfg, cache_dir, cfg.eval.get("seed", 0))
    elif param == "b":
        rows = sweep_blocks(values, sets, link, codec, train_cfg, cache_dir, cfg.eval.get("seed", 0))
    else:
        rows = sweep_memory(values, args.blocks, sets, link, codec, train_cfg, cache_dir, cfg.eval.get("seed", 0))
    key = {"alpha": "alpha", "b": "B", "memory": "t"}[param]
    write_sweep_csv(rows, run_dir / "sweep.csv")
    from .plots import plot_sweep

    plot_sweep(run_dir / "sweep.csv", key, run_dir / "sweep.png")
    (run_dir / "summary.json").write_text(json.dumps({"argmax": sweep_argmax(rows, key)}, indent=2))
    print(run_dir)
    return 0


def cmd_timing(args) -> int:
    cfg = _load_config(args)
    test_set = cfg.build_dataset()[2]
    codec = cfg.build_codec()
    plan = cfg.build_plan()
    if args.checkpoint:
        bundle = CodecBundle.load(_resolve_checkpoint(args.checkpoint))
    else:
        bundle = build_bundle(codec, test_set.image_shape, cfg.mode, plan, seed=cfg.eval.get("seed", 0))
    images = test_set.batch(torch.arange(min(args.batch, len(test_set))))
    rows = timing_report(bundle, images, cfg.build_link(), repeats=args.repeats)
    run_dir = _new_run_dir(args.out, "timing", cfg.hash())
    cfg.to_yaml(run_dir / "resolved_config.yaml")
    _write_csv(run_dir / "timing.csv", rows)
    if args.probe:
        probe = attention_scaling_probe(codec, test_set.image_shape)
        (run_dir / "scaling_probe.json").write_text(json.dumps(probe, indent=2))
    for row in rows:
        print(f"{row['stage']:>8}: {row['per_image_s'] * 1e3:8.3f} ms/image (batch {row['batch']})")
    print(run_dir)
    return 0


def cmd_plot(args) -> int:
    from . import plots

    out = args.figure or str(Path(args.input).with_suffix(".png"))
    if args.kind == "sweep":
        plots.plot_sweep(args.input, args.param, out)
    elif args.kind == "rates":
        plots.plot_rates(args.input, out)
    else:
        plots.plot_link_grid(args.input, out)
    print(out)
    return 0


# ---- parser -----------------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment YAML; omit to use --profile")
    p.add_argument("--profile", choices=PROFILES, default="toy", help="preset when no --config is given")
    p.add_argument("--mode", default=None, help="protocol mode for the preset profile")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a config entry (repeatable)")
    p.add_argument("--out", default="runs", help="root directory for run directories")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relayjscc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one protocol configuration")
    _add_config_flags(p)
    p.add_argument("--resume", help="existing train run directory to continue")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint over a link grid")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True, help="train run dir or model dir")
    p.add_argument("--c-sr-db", help="comma list of source-relay SNRs in dB")
    p.add_argument("--c-rd-db", help="comma list of relay-destination SNRs in dB")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rates", help="analytic decode/compress-forward rate table")
    p.add_argument("--duplex", choices=("hd", "fd"), default="hd")
    p.add_argument("--c-sr-db", default="0,3.3333333333,6.6666666667,10")
    p.add_argument("--c-rd-db", default="0,3.3333333333,6.6666666667,10")
    p.add_argument("--p-s-db", type=float, default=3.0)
    p.add_argument("--p-r-db", type=float, default=3.0)
    p.add_argument("--step", type=float, default=1e-3, help="fine search step")
    p.add_argument("--p-r-mode", choices=("scaled", "raw"), default="scaled")
    p.add_argument("--combiner", choices=("min", "sum"), default="min")
    p.add_argument("--out", default="runs")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("sweep-alpha", help="train/evaluate across listening fractions")
    _add_config_flags(p)
    p.add_argument("--alphas", default="0.3333333333,0.5,0.6666666667")
    p.add_argument("--cache", help="checkpoint cache directory (default <out>/cache)")
    p.set_defaults(func=lambda a: _cmd_sweep(a, "alpha"))

    p = sub.add_parser("sweep-b", help="train/evaluate across block counts")
    _add_config_flags(p)
    p.add_argument("--blocks", default="1,2,3,6")
    p.add_argument("--cache")
    p.set_defaults(func=lambda a: _cmd_sweep(a, "b"))

    p = sub.add_parser("sweep-memory", help="train/evaluate across relay memory")
    _add_config_flags(p)
    p.add_argument("--blocks", type=int, default=6, help="fixed block count")
    p.add_argument("--memories", default="1,3,5")
    p.add_argument("--cache")
    p.set_defaults(func=lambda a: _cmd_sweep(a, "memory"))

    p = sub.add_parser("timing", help="per-stage runtime report")
    _add_config_flags(p)
    p.add_argument("--checkpoint", help="optional trained model (untrained weights otherwise)")
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--probe", action="store_true", help="also run the token-scaling probe")
    p.set_defaults(func=cmd_timing)

    p = sub.add_parser("plot", help="render a CSV artifact to a figure")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", choices=("sweep", "rates", "grid"), required=True)
    p.add_argument("--param", default="alpha", help="x axis for sweep plots")
    p.add_argument("--figure", help="output image path (default: input with .png)")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, ImportError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
