"""
掃引サブコマンド（power / concentration / berry）

格子上の検出力、偏差確率の上界、Berry-Esseen の被覆区間をCSVで出力
"""
import argparse
import logging
from typing import Any, Dict, List, Optional, Union

from src.cli.common import (
    EXIT_OK, add_common_arguments, add_design_arguments, build_config, design_of, emit, load_model,
    make_runner, parse_float_list, parse_grid, parse_int_list,
)
from src.core.benchmarks import FAMILY_NULL_SIGMA0, FAMILY_PROBLEMS, get_family
from src.core.berry_esseen import coverage_curve, reference_index
from src.core.concentration import deviation_curve, empirical_deviation
from src.core.errors import ParameterError
from src.core.hypothesis import power_curve
from src.models.results import BoundSide, BoundVariant, StatisticKind, TestPlan, TestProblem
from src.models.run import CommandKind, RunConfig

logger = logging.getLogger(__name__)

POWER_COLUMNS = ["parameter", "n", "power", "closed_form_power", "mc_stderr"]
CONCENTRATION_COLUMNS = [
    "variant", "side", "n", "y", "bound", "term1", "term2", "term3", "term4", "term5", "b_estimated",
]
BERRY_COLUMNS = ["n", "L", "U", "empirical_coverage", "mu3", "sigma2"]

DEFAULT_POWER_REPS = 500
DEFAULT_COVERAGE_REPS = 500


def add_parsers(subparsers):
    power = subparsers.add_parser("power", help="power curve over a lambda1 grid")
    add_common_arguments(power)
    add_design_arguments(power, paired=True)
    power.add_argument("--n", type=parse_int_list, required=True, help="sample sizes, e.g. 100,500,1000")
    power.add_argument("--grid", type=parse_grid, required=True, help="lambda1 grid start:stop:step")
    power.add_argument("--stat", choices=[k.value for k in StatisticKind], default="t1")
    power.add_argument("--A", dest="coefficients", type=parse_float_list, default=None)
    power.add_argument("--alpha", type=float, default=0.05)
    power.add_argument("--sigma0", type=float, default=None)
    power.add_argument("--estimator", choices=["S", "T"], default="S")
    power.add_argument("--reps", type=int, default=DEFAULT_POWER_REPS)
    power.set_defaults(handler=main_power)

    concentration = subparsers.add_parser("concentration", help="Bennett deviation bounds over a y grid")
    add_common_arguments(concentration)
    add_design_arguments(concentration)
    concentration.add_argument("--n", type=parse_int_list, required=True, help="sample sizes")
    concentration.add_argument("--grid", type=parse_grid, required=True, help="deviation grid start:stop:step")
    concentration.add_argument("--variant", choices=[v.value for v in BoundVariant], default="S")
    concentration.add_argument("--b", default=None, help="bound on |Y| (number or 'estimate')")
    concentration.add_argument("--always-include-mean-term", dest="always_include_mean_term",
                               action="store_true", default=None)
    concentration.add_argument("--reps", type=int, default=None, help="replicates for empirical frequencies")
    concentration.set_defaults(handler=main_concentration)

    berry = subparsers.add_parser("berry", help="Berry-Esseen coverage bracket over n")
    add_common_arguments(berry)
    add_design_arguments(berry)
    berry.add_argument("--n", type=parse_int_list, required=True, help="sample sizes")
    berry.add_argument("--reps", type=int, default=DEFAULT_COVERAGE_REPS)
    berry.add_argument("--mu", type=float, default=None, help="known output mean")
    berry.add_argument("--scale", choices=["sigma", "sigma2"], default=None)
    berry.set_defaults(handler=main_berry)


# ---- power ----

def power_plan(cfg: RunConfig) -> TestPlan:
    """
    検出力曲線の検定計画（部分集合と sigma0 はモデル族の既定値で補う）
    """
    defaults = FAMILY_PROBLEMS.get(cfg.model, {})
    u = cfg.u or defaults.get("u", [])
    v = cfg.v or defaults.get("v", [])
    w = cfg.w or defaults.get("w", [])
    sigma0 = cfg.sigma0
    if sigma0 is None and cfg.stat != StatisticKind.LINEAR:
        sigma0 = FAMILY_NULL_SIGMA0.get(cfg.model)
    return TestPlan(
        problem=TestProblem(u=design_of(u), v=design_of(v), w=design_of(w)),
        kind=cfg.stat,
        alpha=cfg.alpha,
        coefficients=cfg.coefficients,
        sigma0=sigma0,
        estimator=cfg.estimator,
    )


def cmd_power(cfg: RunConfig) -> List[Dict[str, Any]]:
    """
    各 n について λ1 の格子上の検出力を推定

    Args:
        cfg: 実行設定

    Returns:
        parameter, n, power, closed_form_power, mc_stderr の行
    """
    family = get_family(cfg.model)
    plan = power_plan(cfg)
    runner = make_runner(cfg)
    rows = []
    for n in cfg.n:
        for row in power_curve(family, plan, cfg.grid, n, cfg.reps, cfg.seed, runner,
                               block_rows=cfg.block_rows, draws=cfg.null_draws):
            rows.append(row.model_dump())
    return rows


def main_power(args: argparse.Namespace) -> int:
    cfg = build_config(
        CommandKind.POWER, args,
        n=args.n, grid=args.grid, stat=args.stat, coefficients=args.coefficients, alpha=args.alpha,
        sigma0=args.sigma0, estimator=args.estimator, reps=args.reps,
    )
    emit(cfg, cmd_power(cfg), POWER_COLUMNS)
    return EXIT_OK


# ---- concentration ----

def resolve_b(cfg: RunConfig, output_bound: Optional[float]) -> Union[None, float]:
    """--b、モデルの解析的な上界、観測値からの推定の順に解決（None は推定）"""
    if cfg.b is None:
        return output_bound
    if cfg.b == "estimate":
        return None
    try:
        return float(cfg.b)
    except ValueError:
        raise ParameterError(f"--b must be a number or 'estimate', got {cfg.b}")


def _term_columns(terms: Dict[str, float]) -> Dict[str, float]:
    """M1..M5 / m1..m4 → term1..term5"""
    return {f"term{name[1:]}": value for name, value in terms.items()}


def cmd_concentration(cfg: RunConfig) -> List[Dict[str, Any]]:
    """
    各 n、y について偏差確率の上界を計算（--reps 指定時は経験頻度も付ける）

    Args:
        cfg: 実行設定

    Returns:
        CONCENTRATION_COLUMNS の行
    """
    model = load_model(cfg)
    subset = cfg.u[0]
    b = resolve_b(cfg, model.output_bound)
    reports = deviation_curve(
        model.spec, subset, cfg.variant, cfg.n, cfg.grid, cfg.seed, b, cfg.always_include_mean_term,
        block_rows=cfg.block_rows,
    )

    empirical: Dict[tuple, float] = {}
    if cfg.reps is not None:
        reference = reference_index(model, subset, cfg.seed, n=cfg.reference_n, block_rows=cfg.block_rows)
        runner = make_runner(cfg)
        for n in cfg.n:
            for row in empirical_deviation(model.spec, subset, cfg.variant, n, cfg.grid, cfg.reps,
                                           cfg.seed, reference, runner, block_rows=cfg.block_rows):
                empirical[(n, row.y, BoundSide.ABOVE)] = row.above
                empirical[(n, row.y, BoundSide.BELOW)] = row.below

    rows = []
    for report in reports:
        row = {
            "variant": report.variant.value,
            "side": report.side.value,
            "n": report.n,
            "y": report.y,
            "bound": report.bound,
            "b_estimated": report.b_estimated,
        }
        row.update(_term_columns(report.terms))
        if empirical:
            row["empirical"] = empirical.get((report.n, report.y, report.side))
        rows.append(row)
    return rows


def main_concentration(args: argparse.Namespace) -> int:
    cfg = build_config(
        CommandKind.CONCENTRATION, args,
        n=args.n, grid=args.grid, variant=args.variant, b=args.b,
        always_include_mean_term=args.always_include_mean_term, reps=args.reps,
    )
    columns = CONCENTRATION_COLUMNS + (["empirical"] if cfg.reps is not None else [])
    emit(cfg, cmd_concentration(cfg), columns)
    return EXIT_OK


# ---- berry ----

def cmd_berry(cfg: RunConfig) -> List[Dict[str, Any]]:
    """
    各 n について被覆確率の区間 [L, U] と経験被覆率を計算

    Args:
        cfg: 実行設定

    Returns:
        n, L, U, empirical_coverage, mu3, sigma2 の行
    """
    model = load_model(cfg)
    rows = coverage_curve(
        model, cfg.u[0], cfg.n, cfg.seed,
        reps=cfg.reps or DEFAULT_COVERAGE_REPS, mu=cfg.mu, scale=cfg.scale, runner=make_runner(cfg),
        block_rows=cfg.block_rows, reference_n=cfg.reference_n,
    )
    return [row.model_dump() for row in rows]


def main_berry(args: argparse.Namespace) -> int:
    cfg = build_config(
        CommandKind.BERRY, args,
        n=args.n, reps=args.reps, mu=args.mu, scale=args.scale,
    )
    emit(cfg, cmd_berry(cfg), BERRY_COLUMNS)
    return EXIT_OK
