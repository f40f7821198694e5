"""
集中不等式モジュール

Bennett不等式に基づく推定量 S_N, T_N の偏差確率の上界（k=1）、
未知量ベクトル Q, Q' のプラグイン推定と偏差曲線
"""
import logging
import math
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from src.core.errors import BoundaryError, DomainError, ParameterError
from src.core.estimators import empirical_cov, estimate_S, estimate_T
from src.core.runner import ReplicateRunner
from src.core.sampling import derive_seed, generate_pick_freeze
from src.models.results import BoundReport, BoundSide, BoundVariant, DeviationRow, QVector
from src.models.sample import Design, ModelSpec, PickFreezeSample

logger = logging.getLogger(__name__)

BoundArg = Union[None, float, str]


def bennett_h(x: float) -> float:
    """
    h(x) = (1+x)·ln(1+x) − x

    Args:
        x: x > −1

    Returns:
        h(x)
    """
    if not x > -1.0:
        raise DomainError(f"bennett_h is defined for x > -1, got {x}")
    return (1.0 + x) * math.log1p(x) - x


def _bennett_term(n: int, variance: float, scale: float, t: float) -> float:
    """exp(−n·variance/scale² · h(scale·t/variance))"""
    return math.exp(-n * variance / scale ** 2 * bennett_h(scale * t / variance))


def _check_inputs(q: QVector, y: float, n: int, variant: BoundVariant):
    if q.variant != variant:
        raise ParameterError(f"bound for {variant.value} needs a {variant.value} Q vector, got {q.variant.value}")
    if not y > 0:
        raise ParameterError(f"deviation y must be positive, got {y}")
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")


def _positive(name: str, value: Optional[float]) -> float:
    if value is None or not value > 0:
        raise ParameterError(f"{name} must be positive, got {value}")
    return float(value)


def bound_S(q: QVector, y: float, n: int, side: BoundSide) -> BoundReport:
    """
    推定量 S_N の偏差確率の上界

    above: M1 + 2M2 + 2M3、below: M4 + 2M2 + 2M5、b_U = b²(1 + S + y)

    Args:
        q: Q = (V, V_U±, V_J±, S) と b
        y: 偏差
        n: サンプルサイズ
        side: above / below

    Returns:
        BoundReport（上界は1でクランプ）
    """
    _check_inputs(q, y, n, BoundVariant.S)
    side = BoundSide(side)
    V = _positive("V", q.V)
    b = q.b
    b_u = b * b * (1.0 + q.S + y)
    if not b_u > 0:
        raise ParameterError(f"b_U = b^2 (1 + S + y) must be positive, got {b_u}")
    half = y * V / 2.0
    root = math.sqrt(half)

    m2 = _bennett_term(n, V, b, root)
    if side == BoundSide.ABOVE:
        mean_term = _bennett_term(n, _positive("V_U_plus", q.V_U_plus), b_u, half)
        cross_term = _bennett_term(n, _positive("V_J_plus", q.V_J_plus), b_u / b, root)
        terms = {"M1": mean_term, "M2": m2, "M3": cross_term}
    else:
        mean_term = _bennett_term(n, _positive("V_U_minus", q.V_U_minus), b_u, half)
        cross_term = _bennett_term(n, _positive("V_J_minus", q.V_J_minus), b_u / b, root)
        terms = {"M2": m2, "M4": mean_term, "M5": cross_term}

    total = mean_term + 2.0 * m2 + 2.0 * cross_term
    return BoundReport(
        variant=BoundVariant.S,
        side=side,
        y=y,
        n=n,
        bound=min(1.0, total),
        terms=terms,
        b_estimated=q.b_estimated,
    )


def bound_T(
    q: QVector,
    y: float,
    n: int,
    side: BoundSide,
    always_include_mean_term: bool = False,
) -> BoundReport:
    """
    推定量 T_N の偏差確率の上界

    above: m1 + 2·m2·1{S+y−1 ≥ 0}、below: m3 + 2·m4·1{S+y−1 ≥ 0}

    always_include_mean_term=True のとき below 側は指示関数によらず m4 を加える

    Args:
        q: Q' = (V, C, V_K±, S) と b
        y: 偏差
        n: サンプルサイズ
        side: above / below
        always_include_mean_term: below 側で常に m4 を含めるか

    Returns:
        BoundReport（上界は1でクランプ）
    """
    _check_inputs(q, y, n, BoundVariant.T)
    side = BoundSide(side)
    V = _positive("V", q.V)
    b = q.b
    b_u = b * b * (1.0 + q.S + y)
    if not b_u > 0:
        raise ParameterError(f"b_U = b^2 (1 + S + y) must be positive, got {b_u}")
    pooled = _positive("V + C", V + q.C)
    half = y * V / 2.0
    indicator = q.S + y - 1.0 >= 0.0

    def z_term(gap: float) -> float:
        if gap == 0.0:
            raise BoundaryError(f"bound is discontinuous at S + y = 1 (S={q.S}, y={y}); perturb y")
        if gap < 0.0:
            raise BoundaryError(f"mean term needs a positive gap, got {gap}")
        argument = b / pooled * math.sqrt(2.0 * y * V / gap)
        return math.exp(-n * pooled / (2.0 * b * b) * bennett_h(argument))

    if side == BoundSide.ABOVE:
        terms = {"m1": _bennett_term(n, _positive("V_K_plus", q.V_K_plus), b_u, half)}
        if indicator:
            terms["m2"] = z_term(q.S + y - 1.0)
        total = terms["m1"] + 2.0 * terms.get("m2", 0.0)
    else:
        terms = {"m3": _bennett_term(n, _positive("V_K_minus", q.V_K_minus), b_u, half)}
        if indicator or always_include_mean_term:
            terms["m4"] = z_term(y + 1.0 - q.S)
        total = terms["m3"] + 2.0 * terms.get("m4", 0.0)

    return BoundReport(
        variant=BoundVariant.T,
        side=side,
        y=y,
        n=n,
        bound=min(1.0, total),
        terms=terms,
        b_estimated=q.b_estimated,
    )


def bound(q: QVector, y: float, n: int, side: BoundSide, **kwargs) -> BoundReport:
    """Q の種類に応じて bound_S / bound_T を呼ぶ"""
    if q.variant == BoundVariant.S:
        return bound_S(q, y, n, side)
    return bound_T(q, y, n, side, **kwargs)


def estimate_Q(sample: PickFreezeSample, variant: BoundVariant, y: float, b: BoundArg = None) -> QVector:
    """
    Q（S用）または Q'（T用）の経験推定

    データは y の経験平均で中心化し、U±, J±, K± の二次モーメントは
    プラグインの指数値を用いた生の二次モーメント

    Args:
        sample: k=1 のサンプル
        variant: S または T
        y: 偏差
        b: |Y| の上界（None または "estimate" なら中心化後の観測値の最大絶対値）

    Returns:
        QVector
    """
    if sample.k != 1:
        raise ParameterError(f"concentration bounds need k = 1, got k={sample.k}")
    variant = BoundVariant(variant)
    c = float(np.mean(sample.y))
    yc = sample.y - c
    yuc = sample.y_u[:, 0] - c
    V = empirical_cov(yc, yc)
    C = empirical_cov(yc, yuc)

    if b is None or b == "estimate":
        b_value = float(max(np.max(np.abs(yc)), np.max(np.abs(yuc))))
        b_estimated = True
    else:
        b_value = float(b)
        b_estimated = False

    prod = yc * yuc
    y2 = yc * yc
    if variant == BoundVariant.S:
        s = estimate_S(sample).values[0]
        u_plus = prod - (s + y) * y2
        u_minus = prod - (s - y) * y2
        j_plus = (s + y) * yc - yuc
        j_minus = (s - y) * yc - yuc
        return QVector(
            variant=variant, V=V, S=s, b=b_value, b_estimated=b_estimated,
            V_U_plus=float(np.mean(u_plus * u_plus)),
            V_U_minus=float(np.mean(u_minus * u_minus)),
            V_J_plus=float(np.mean(j_plus * j_plus)),
            V_J_minus=float(np.mean(j_minus * j_minus)),
        )

    s = estimate_T(sample).values[0]
    m = (y2 + yuc * yuc) / 2.0
    k_plus = prod - (s + y) * m
    k_minus = prod - (s - y) * m
    return QVector(
        variant=variant, V=V, S=s, b=b_value, b_estimated=b_estimated, C=C,
        V_K_plus=float(np.mean(k_plus * k_plus)),
        V_K_minus=float(np.mean(k_minus * k_minus)),
    )


def deviation_curve(
    model: ModelSpec,
    subset: Sequence[int],
    variant: BoundVariant,
    n_list: Sequence[int],
    y_grid: Sequence[float],
    seed: int,
    b: BoundArg = None,
    always_include_mean_term: bool = False,
    block_rows: Optional[int] = None,
) -> List[BoundReport]:
    """
    各 n について1つのサンプルから Q を推定し、y の格子上で上下の上界を評価

    Args:
        model: モデル
        subset: 部分集合 u
        variant: S または T
        n_list: サンプルサイズの列
        y_grid: 偏差の格子
        seed: 乱数シード
        b: |Y| の上界
        always_include_mean_term: bound_T の below 側の扱い
        block_rows: 乱数ブロックの行数（未指定時は設定値）

    Returns:
        BoundReport のリスト（n, y, side の順）
    """
    variant = BoundVariant(variant)
    design = Design(subsets=[list(subset)])
    reports = []
    for n in n_list:
        sample = generate_pick_freeze(model, design, n, derive_seed(seed, "concentration", n), block_rows=block_rows)
        for y in y_grid:
            q = estimate_Q(sample, variant, y, b)
            for side in (BoundSide.ABOVE, BoundSide.BELOW):
                try:
                    if variant == BoundVariant.S:
                        reports.append(bound_S(q, y, n, side))
                    else:
                        reports.append(bound_T(q, y, n, side, always_include_mean_term))
                except BoundaryError as e:
                    logger.warning(f"[CONCENTRATION] skipped n={n}, y={y}, side={side.value}: {e}")
        logger.info(f"[CONCENTRATION] variant={variant.value}, n={n}, rows={len(reports)}")
    return reports


def monotonicity_violations(reports: Sequence[BoundReport], tolerance: float = 1e-12) -> List[BoundReport]:
    """
    y について非増加でない点を報告

    Args:
        reports: deviation_curve の結果
        tolerance: 許容幅

    Returns:
        直前の y より上界が大きくなった BoundReport のリスト
    """
    curves: Dict[tuple, List[BoundReport]] = {}
    for report in reports:
        curves.setdefault((report.variant, report.side, report.n), []).append(report)
    violations = []
    for key, curve in curves.items():
        curve = sorted(curve, key=lambda r: r.y)
        for prev, cur in zip(curve, curve[1:]):
            if cur.bound > prev.bound + tolerance:
                violations.append(cur)
    if violations:
        logger.warning(f"[CONCENTRATION] {len(violations)} points where the bound increases in y")
    return violations


def empirical_deviation(
    model: ModelSpec,
    subset: Sequence[int],
    variant: BoundVariant,
    n: int,
    y_grid: Sequence[float],
    reps: int,
    seed: int,
    reference: float,
    runner: Optional[ReplicateRunner] = None,
    block_rows: Optional[int] = None,
) -> List[DeviationRow]:
    """
    推定量の偏差確率をモンテカルロ推定

    Args:
        model: モデル
        subset: 部分集合 u
        variant: S または T
        n: サンプルサイズ
        y_grid: 偏差の格子
        reps: 複製数
        seed: 乱数シード
        reference: 真の指数値
        runner: 並列実行クラス
        block_rows: 乱数ブロックの行数（未指定時は設定値）

    Returns:
        DeviationRow のリスト
    """
    if reps < 1:
        raise ParameterError(f"reps must be >= 1, got {reps}")
    variant = BoundVariant(variant)
    design = Design(subsets=[list(subset)])
    estimator = estimate_S if variant == BoundVariant.S else estimate_T
    runner = runner or ReplicateRunner()

    def one(r: int) -> float:
        sample = generate_pick_freeze(model, design, n, derive_seed(seed, "deviation", n, r),
                                      block_rows=block_rows)
        return estimator(sample).values[0]

    estimates = np.asarray(runner.map(one, range(reps)))
    rows = []
    for y in y_grid:
        rows.append(DeviationRow(
            variant=variant,
            n=n,
            y=y,
            above=float(np.mean(estimates >= reference + y)),
            below=float(np.mean(estimates <= reference - y)),
            reps=reps,
        ))
    return rows
