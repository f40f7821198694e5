"""
test サブコマンド

検定問題 H0: S^u = 0 かつ S^v = S^w を1回検定する
--reps を指定すると帰無仮説の下の棄却率（水準）を推定する
"""
import argparse
import logging
from typing import Any, Dict, List, Tuple

from src.cli.common import (
    EXIT_OK, add_common_arguments, add_design_arguments, build_config, design_of, emit, load_model,
    make_runner, parse_float_list, parse_int_list,
)
from src.core.hypothesis import build_GN, generate_for_problem, level_study, run_test
from src.models.results import StatisticKind, TestPlan, TestProblem
from src.models.run import CommandKind, RunConfig

logger = logging.getLogger(__name__)

SINGLE_COLUMNS = ["statistic_kind", "statistic", "threshold", "alpha", "reject", "n", "seed"]
LEVEL_COLUMNS = ["n", "reps", "repetition", "level"]


def add_parser(subparsers):
    parser = subparsers.add_parser("test", help="test nullity and equality of closed Sobol indices")
    add_common_arguments(parser)
    add_design_arguments(parser, paired=True)
    parser.add_argument("--n", type=parse_int_list, required=True, help="sample size")
    parser.add_argument("--stat", choices=[k.value for k in StatisticKind], default="linear")
    parser.add_argument("--A", dest="coefficients", type=parse_float_list, default=None,
                        help="linear form coefficients, e.g. 1,-1")
    parser.add_argument("--alpha", type=float, default=0.05)
    parser.add_argument("--sigma0", type=float, default=None, help="null standard deviation per coordinate")
    parser.add_argument("--shift", type=float, default=None, help="one-sided right-hand side of A.S <= shift")
    parser.add_argument("--estimator", choices=["S", "T"], default="S")
    parser.add_argument("--reps", type=int, default=None, help="replicates for a level study")
    parser.add_argument("--repetitions", type=int, default=None, help="repetitions of the level study")
    parser.set_defaults(handler=main)


def make_plan(cfg: RunConfig) -> TestPlan:
    """設定から検定計画を作成"""
    problem = TestProblem(u=design_of(cfg.u), v=design_of(cfg.v), w=design_of(cfg.w))
    return TestPlan(
        problem=problem,
        kind=cfg.stat,
        alpha=cfg.alpha,
        coefficients=cfg.coefficients,
        sigma0=cfg.sigma0,
        estimator=cfg.estimator,
        shift=cfg.shift,
    )


def cmd_test(cfg: RunConfig) -> Tuple[List[Dict[str, Any]], List[str]]:
    """
    検定または水準推定を実行

    Args:
        cfg: 実行設定

    Returns:
        (結果の行, 列名)
    """
    model = load_model(cfg)
    plan = make_plan(cfg)
    n = cfg.n[0]

    if cfg.reps is not None:
        study = level_study(model.spec, plan, n, cfg.reps, cfg.repetitions, cfg.seed, make_runner(cfg),
                            block_rows=cfg.block_rows, draws=cfg.null_draws)
        rows = [
            {"n": n, "reps": cfg.reps, "repetition": index, "level": level}
            for index, level in enumerate(study.levels)
        ]
        return rows, LEVEL_COLUMNS

    sample = generate_for_problem(model.spec, plan.problem, n, cfg.seed, block_rows=cfg.block_rows)
    result = run_test(plan, build_GN(sample, plan.problem, plan.estimator), seed=cfg.seed, draws=cfg.null_draws)
    logger.info(f"[TEST] statistic={result.statistic}, threshold={result.threshold}, reject={result.reject}")
    row = {
        "statistic_kind": result.statistic_kind,
        "statistic": result.statistic,
        "threshold": result.threshold,
        "alpha": result.alpha,
        "reject": result.reject,
        "n": n,
        "seed": cfg.seed,
    }
    return [row], SINGLE_COLUMNS


def main(args: argparse.Namespace) -> int:
    cfg = build_config(
        CommandKind.TEST, args,
        n=args.n, stat=args.stat, coefficients=args.coefficients, alpha=args.alpha, sigma0=args.sigma0,
        shift=args.shift, estimator=args.estimator, reps=args.reps, repetitions=args.repetitions,
    )
    rows, columns = cmd_test(cfg)
    emit(cfg, rows, columns)
    return EXIT_OK
