"""Train the full seven-model trend matrix the acceptance suite checks.

Arms: process/amplify/direct half-duplex ordering and the adaptive model at
the strong-relay point; block-count and relay-memory comparisons at the
symmetric 5 dB point. Results land in the cache directory, which the
acceptance suite reuses when RELAYJSCC_TREND_CACHE points at it:

    python scripts/trend_matrix.py --cache runs/trend-cache
    RELAYJSCC_TREND_CACHE=runs/trend-cache pytest tests/test_acceptance.py -k c7

Expect roughly 25 minutes per seed on a single laptop core.
"""

import argparse
import dataclasses
import time

from relayjscc.channel import LinkState
from relayjscc.codec import CodecConfig
from relayjscc.data import ImageSet, synthetic_images
from relayjscc.evaluation import evaluate, get_or_train
from relayjscc.protocols import plan_from_config
from relayjscc.training import TrainConfig


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cache", default="runs/trend-cache")
    ap.add_argument("--seeds", default="0,1,2")
    args = ap.parse_args(argv)

    codec = CodecConfig(p=4, c=32, c_star=6, n_e=2, n_r=2, n_d=2, heads=4)
    la_codec = dataclasses.replace(codec, la_enabled=True)
    train_set = ImageSet(synthetic_images(512, (3, 8, 8), seed=0))
    val_set = ImageSet(synthetic_images(128, (3, 8, 8), seed=1))
    test_set = ImageSet(synthetic_images(128, (3, 8, 8), seed=2))
    strong_relay = LinkState.from_db(c_sr_db=10.0, c_rd_db=10.0, p_r_db=6.0)
    symmetric = LinkState.from_db(c_sr_db=5.0, c_rd_db=5.0, p_s_db=3.0, p_r_db=3.0)

    arms = (
        ("hd_pf", {"alpha": 0.5}, codec, 200, False, strong_relay),
        ("hd_af", {}, codec, 200, False, strong_relay),
        ("direct", {}, codec, 200, False, strong_relay),
        ("fd_pf", {"B": 2}, codec, 500, False, symmetric),
        ("fd_pf", {"B": 6}, codec, 500, False, symmetric),
        ("fd_pf", {"B": 6, "t": 1}, codec, 500, False, symmetric),
        ("hd_pf", {"alpha": 0.5}, la_codec, 200, True, strong_relay),
    )
    for seed in (int(s) for s in args.seeds.split(",")):
        for mode, plan_cfg, cfg, epochs, adaptive, link in arms:
            tc = TrainConfig(max_epochs=epochs, lr_init=1e-3, seed=seed, adaptive=adaptive)
            t0 = time.time()
            bundle = get_or_train(mode, plan_cfg, train_set, val_set, link, cfg, tc, args.cache)
            plan = plan_from_config(mode, cfg, plan_cfg)
            report = evaluate(mode, test_set, link, bundle, plan=plan, stats=bundle.stats, seed=0)
            tag = "adaptive " if adaptive else ""
            print(
                f"seed {seed} {tag}{mode} {plan_cfg}: psnr {report.psnr_mean:.3f}"
                f" ({time.time() - t0:.0f}s)",
                flush=True,
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(run())
