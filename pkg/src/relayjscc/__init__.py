"""Learned joint source-channel coding for image transmission over
cooperative relay channels: protocol simulators, trainable codecs,
analytic rate baselines and evaluation tooling."""

from relayjscc.channel import ChannelRng, LinkState
from relayjscc.codec import CodecBundle, CodecConfig, RelayNormStats
from relayjscc.evaluation import EvalReport, evaluate, get_or_train
from relayjscc.protocols import FullDuplexPlan, HalfDuplexPlan, plan_from_config
from relayjscc.rates import GridSpec, RateResult, optimize_hd_rate, rate_fd
from relayjscc.training import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "ChannelRng",
    "CodecBundle",
    "CodecConfig",
    "EvalReport",
    "FullDuplexPlan",
    "GridSpec",
    "HalfDuplexPlan",
    "LinkState",
    "RateResult",
    "RelayNormStats",
    "TrainConfig",
    "evaluate",
    "get_or_train",
    "optimize_hd_rate",
    "plan_from_config",
    "rate_fd",
    "train",
]
