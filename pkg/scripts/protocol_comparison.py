"""Train and compare the relaying protocols on the toy profile at one link.

Trains direct, amplify-forward and process-forward models (half-duplex
alpha = 1/2) against a persistent checkpoint cache, then prints test PSNR /
SSIM side by side. Expect a few minutes per model on a laptop CPU.

Usage: python scripts/protocol_comparison.py [--cache runs/cache] [--seed 0]
"""

import argparse

from relayjscc.channel import LinkState
from relayjscc.codec import CodecConfig
from relayjscc.data import ImageSet, synthetic_images
from relayjscc.evaluation import evaluate, get_or_train
from relayjscc.protocols import plan_from_config
from relayjscc.training import TrainConfig


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cache", default="runs/cache")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--c-sr-db", type=float, default=10.0)
    ap.add_argument("--c-rd-db", type=float, default=10.0)
    ap.add_argument("--p-r-db", type=float, default=6.0)
    args = ap.parse_args(argv)

    codec = CodecConfig(p=4, c=32, c_star=6, n_e=2, n_r=2, n_d=2, heads=4)
    train_set = ImageSet(synthetic_images(512, (3, 8, 8), seed=0))
    val_set = ImageSet(synthetic_images(128, (3, 8, 8), seed=1))
    test_set = ImageSet(synthetic_images(128, (3, 8, 8), seed=2))
    link = LinkState.from_db(c_sr_db=args.c_sr_db, c_rd_db=args.c_rd_db, p_r_db=args.p_r_db)
    tc = TrainConfig(max_epochs=args.epochs, lr_init=1e-3, seed=args.seed)

    print(f"{'protocol':<10} {'psnr':>8} {'ssim':>8}")
    for mode, plan_cfg in (("direct", {}), ("hd_af", {}), ("hd_pf", {"alpha": 0.5})):
        bundle = get_or_train(mode, plan_cfg, train_set, val_set, link, codec, tc, args.cache)
        plan = plan_from_config(mode, codec, plan_cfg)
        report = evaluate(mode, test_set, link, bundle, plan=plan, stats=bundle.stats, seed=0)
        print(f"{mode:<10} {report.psnr_mean:8.2f} {report.ssim_mean:8.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(run())
