"""
estimate サブコマンド

閉Sobol指数の推定値と漸近信頼区間を出力
"""
import argparse
import logging
from typing import Any, Dict, List

from src.cli.common import (
    EXIT_OK, add_common_arguments, add_design_arguments, build_config, emit, load_model, parse_int_list,
)
from src.core.asymptotics import asymptotic_ci, plugin_gamma
from src.core.errors import DesignError
from src.core.estimators import estimate
from src.core.sampling import generate_pick_freeze
from src.models.results import EstimatorKind
from src.models.run import CommandKind, RunConfig
from src.models.sample import Design

logger = logging.getLogger(__name__)

COLUMNS = ["subset", "estimator", "value", "ci_low", "ci_high", "n", "seed"]


def add_parser(subparsers):
    parser = subparsers.add_parser("estimate", help="estimate closed Sobol indices")
    add_common_arguments(parser)
    add_design_arguments(parser)
    parser.add_argument("--n", type=parse_int_list, required=True, help="sample size")
    parser.add_argument("--estimator", choices=[k.value for k in EstimatorKind], default="S")
    parser.add_argument("--level", type=float, default=None, help="confidence level for asymptotic CIs")
    parser.add_argument("--mu", type=float, default=None, help="known output mean (tilde estimator)")
    parser.set_defaults(handler=main)


def cmd_estimate(cfg: RunConfig) -> List[Dict[str, Any]]:
    """
    推定を実行して結果の行を返す

    Args:
        cfg: 実行設定

    Returns:
        subset, estimator, value, ci_low, ci_high, n, seed の行
    """
    if not cfg.u:
        raise DesignError("estimate needs at least one --u subset")
    model = load_model(cfg)
    n = cfg.n[0]
    sample = generate_pick_freeze(model.spec, Design(subsets=cfg.u), n, cfg.seed, block_rows=cfg.block_rows)
    est = estimate(sample, cfg.estimator, cfg.mu)

    intervals = [(None, None)] * len(est.values)
    if cfg.level is not None:
        if cfg.estimator == EstimatorKind.FULL_INFO:
            logger.warning("[ESTIMATE] no asymptotic covariance for the full-information estimator, CI left empty")
        else:
            intervals = asymptotic_ci(est, plugin_gamma(sample, est, cfg.mu), cfg.level)

    logger.info(f"[ESTIMATE] model={model.name}, n={n}, estimator={cfg.estimator.value}, values={est.values}")
    return [
        {
            "subset": ",".join(str(i) for i in subset),
            "estimator": cfg.estimator.value,
            "value": value,
            "ci_low": low,
            "ci_high": high,
            "n": n,
            "seed": cfg.seed,
        }
        for subset, value, (low, high) in zip(cfg.u, est.values, intervals)
    ]


def main(args: argparse.Namespace) -> int:
    cfg = build_config(
        CommandKind.ESTIMATE, args,
        n=args.n, estimator=args.estimator, level=args.level, mu=args.mu,
    )
    emit(cfg, cmd_estimate(cfg), COLUMNS)
    return EXIT_OK
