"""
Berry-Esseen モジュール

中心化ケース（k=1）の推定量 tilde-S について、Berry-Esseen 型の上界 B(t)、
信頼区間の被覆確率の区間 [L, U]、必要なモーメントの経験推定を行う
"""
import logging
import math
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from src.core.asymptotics import tilde_variance
from src.core.benchmarks import AnalyticModel, subset_key
from src.core.config import settings
from src.core.errors import DegenerateOutputError, DomainError, ParameterError
from src.core.estimators import DEGENERATE_RATIO, centered_pair, empirical_cov, estimate_S, estimate_T, estimate_tilde_S
from src.core.runner import ReplicateRunner
from src.core.sampling import derive_seed, generate_pick_freeze
from src.models.results import BEMoments, CoverageRow
from src.models.sample import Design

logger = logging.getLogger(__name__)

# Berry-Esseen 定数（既知の最良値）
KAPPA = 0.42

NOMINAL_QUANTILE = 1.96


def standardized_third_moment(values: np.ndarray) -> float:
    """
    標準化三次絶対モーメント E|(X − EX)/sd(X)|³ の経験値

    Args:
        values: 観測値

    Returns:
        モーメント（Jensen により 1 以上）
    """
    values = np.asarray(values, dtype=float)
    centered = values - np.mean(values)
    second = float(np.mean(centered * centered))
    if second <= DEGENERATE_RATIO * float(np.mean(values * values)):
        raise DegenerateOutputError("standardized moment of a constant sample is undefined")
    return float(np.mean(np.abs(centered) ** 3)) / second ** 1.5


def be_moments(sample, t: float = 0.0, mu: Optional[float] = None) -> BEMoments:
    """
    B(t) に必要なモーメントのプラグイン推定

    σ² = Var((YY^u − Ŝ·Y²)/V̂)、ν = (tσ/√N + 2Ŝ)·Var(Y²) − 2Cov(YY^u, Y²)、
    μ₃ は Δ = σ⁻¹V̂[YY^u − (Ŝ + tσ/√N)Y²] の標準化三次絶対モーメント

    Args:
        sample: k=1 のサンプル
        t: 評価点
        mu: 既知の平均（Noneなら経験平均で中心化）

    Returns:
        BEMoments
    """
    ys, yus = centered_pair(sample, mu)
    n = sample.n
    y2 = ys * ys
    prod = ys * yus
    V = float(np.mean(y2))
    if not V > 0.0:
        raise DegenerateOutputError("be_moments: mean(y^2) is zero after centering")
    S = float(np.mean(prod)) / V

    w = (prod - S * y2) / V
    sigma2 = empirical_cov(w, w)
    if sigma2 <= DEGENERATE_RATIO * float(np.mean(w * w)) or sigma2 <= 0.0:
        raise DegenerateOutputError(f"be_moments: asymptotic variance is degenerate (sigma2={sigma2})")
    sigma = math.sqrt(sigma2)

    shift = t * sigma / math.sqrt(n)
    var_y2 = empirical_cov(y2, y2)
    cov_prod_y2 = empirical_cov(prod, y2)
    nu = (shift + 2.0 * S) * var_y2 - 2.0 * cov_prod_y2
    delta = V / sigma * (prod - (S + shift) * y2)
    mu3 = standardized_third_moment(delta)

    logger.debug(f"[BE_MOMENTS] n={n}, t={t}, sigma2={sigma2}, mu3={mu3}, nu={nu}")
    return BEMoments(
        sigma2=sigma2,
        mu3=mu3,
        nu=nu,
        V=V,
        C=float(np.mean(prod)),
        S=S,
        t=t,
        n=n,
        var_y2=var_y2,
        cov_prod_y2=cov_prod_y2,
    )


def be_bound_B(t: float, n: int, m: BEMoments) -> float:
    """
    B(t) = κμ₃/√N + |Φ(t) − Φ(t/√(1 + tν/(σ√N V²)))|

    ν は t で再評価する

    Args:
        t: 評価点
        n: サンプルサイズ
        m: モーメント

    Returns:
        B(t) ≥ 0
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    nu = m.nu_at(t, n)
    radicand = 1.0 + t * nu / (m.sigma * math.sqrt(n) * m.V ** 2)
    if not radicand > 0.0:
        raise DomainError(f"bound unavailable at t={t}: 1 + t*nu/(sigma*sqrt(n)*V^2) = {radicand}")
    first = KAPPA * m.mu3 / math.sqrt(n)
    second = abs(stats.norm.cdf(t) - stats.norm.cdf(t / math.sqrt(radicand)))
    return first + float(second)


def coverage_bracket(
    y: float,
    n: int,
    m: BEMoments,
    m_neg: Optional[BEMoments] = None,
) -> Tuple[float, float]:
    """
    P(−y ≤ S̃ − S ≤ y) を挟む区間 [L, U]

    z = √N·y/σ として L = [Φ(z) − Φ(−z)] − [B(z) + B(−z)]、U は符号を反転

    Args:
        y: 半幅
        n: サンプルサイズ
        m: t = z のモーメント
        m_neg: t = −z のモーメント（未指定時は m）

    Returns:
        (L, U)、L は0以上、U は1以下にクランプ
    """
    if not y > 0:
        raise ParameterError(f"half width y must be positive, got {y}")
    z = math.sqrt(n) * y / m.sigma
    b_terms = be_bound_B(z, n, m) + be_bound_B(-z, n, m_neg or m)
    nominal = float(stats.norm.cdf(z) - stats.norm.cdf(-z))
    return max(0.0, nominal - b_terms), min(1.0, nominal + b_terms)


def ci_halfwidth(sigma2: float, n: int, scale: str = "sigma", quantile: float = NOMINAL_QUANTILE) -> float:
    """
    信頼区間の半幅

    Args:
        sigma2: 漸近分散
        n: サンプルサイズ
        scale: "sigma"（quantile·σ/√N）または "sigma2"（quantile·σ²/√N）
        quantile: 正規分位点

    Returns:
        半幅
    """
    if scale == "sigma":
        return quantile * math.sqrt(sigma2) / math.sqrt(n)
    if scale == "sigma2":
        return quantile * sigma2 / math.sqrt(n)
    raise ParameterError(f"scale must be 'sigma' or 'sigma2', got {scale}")


def reference_index(
    model: AnalyticModel,
    subset: Sequence[int],
    seed: int,
    n: Optional[int] = None,
    block_rows: Optional[int] = None,
) -> float:
    """
    被覆判定の基準となる真の指数値

    解析値、離散モデルの列挙、大きな n での T 推定の順に解決し、最後のものはキャッシュする

    Args:
        model: モデル
        subset: 部分集合 u
        seed: 乱数シード
        n: 大規模実行のサンプルサイズ（未指定時は設定値）
        block_rows: 乱数ブロックの行数（未指定時は設定値）

    Returns:
        指数値
    """
    known = model.index(subset)
    if known is not None:
        return float(known)
    return _large_n_reference(model, subset_key(subset), seed, n or settings.reference_n,
                              block_rows or settings.block_rows)


@lru_cache(maxsize=32)
def _large_n_reference(model: AnalyticModel, key: str, seed: int, n: int, block_rows: int) -> float:
    subset = [int(i) for i in key.split(",") if i]
    logger.info(f"[REFERENCE] running n={n} for {model.name} u={subset}")
    sample = generate_pick_freeze(model.spec, Design(subsets=[subset]), n, derive_seed(seed, "reference"),
                                  block_rows=block_rows)
    return float(estimate_T(sample).values[0])


def coverage_curve(
    model: AnalyticModel,
    subset: Sequence[int],
    n_list: Sequence[int],
    seed: int,
    reps: int = 500,
    mu: Optional[float] = None,
    scale: str = "sigma",
    runner: Optional[ReplicateRunner] = None,
    block_rows: Optional[int] = None,
    reference_n: Optional[int] = None,
) -> List[CoverageRow]:
    """
    各 n について被覆確率の区間 [L, U] と経験被覆率を計算

    Args:
        model: モデル
        subset: 部分集合 u（単一）
        n_list: サンプルサイズの列
        seed: 乱数シード
        reps: 経験被覆率の複製数
        mu: 既知の平均（未指定時はモデルの平均、それもなければ経験平均）
        scale: 半幅の種類（ci_halfwidth 参照）
        runner: 並列実行クラス
        block_rows: 乱数ブロックの行数（未指定時は設定値）
        reference_n: 参照値の推定に使うサンプルサイズ（未指定時は設定値）

    Returns:
        CoverageRow のリスト（B が定義されない n は除く）
    """
    if reps < 1:
        raise ParameterError(f"reps must be >= 1, got {reps}")
    if mu is None:
        mu = model.known_mean
    design = Design(subsets=[list(subset)])
    runner = runner or ReplicateRunner()
    reference = reference_index(model, subset, seed, n=reference_n, block_rows=block_rows)

    rows = []
    for n in n_list:
        sample = generate_pick_freeze(model.spec, design, n, derive_seed(seed, "berry", n), block_rows=block_rows)
        m0 = be_moments(sample, 0.0, mu)
        halfwidth = ci_halfwidth(m0.sigma2, n, scale)
        z = math.sqrt(n) * halfwidth / m0.sigma
        try:
            low, high = coverage_bracket(halfwidth, n, be_moments(sample, z, mu), be_moments(sample, -z, mu))
        except DomainError as e:
            logger.warning(f"[BERRY] n={n}: {e}")
            continue

        def covered(r: int, n: int = n) -> bool:
            replicate = generate_pick_freeze(model.spec, design, n, derive_seed(seed, "coverage", n, r),
                                             block_rows=block_rows)
            est = estimate_tilde_S(replicate, mu)
            sigma2 = tilde_variance(replicate, est, mu).entries[0, 0]
            return abs(est.values[0] - reference) <= ci_halfwidth(sigma2, n, scale)

        coverage = float(np.mean(runner.map(covered, range(reps))))
        logger.info(f"[BERRY] n={n}, L={low:.4f}, U={high:.4f}, coverage={coverage:.4f}")
        rows.append(CoverageRow(
            n=n,
            L=low,
            U=high,
            empirical_coverage=coverage,
            mu3=m0.mu3,
            sigma2=m0.sigma2,
            halfwidth=halfwidth,
        ))
    return rows


def clt_kolmogorov_distance(
    model: AnalyticModel,
    subset: Sequence[int],
    n: int,
    reps: int,
    seed: int,
    runner: Optional[ReplicateRunner] = None,
    block_rows: Optional[int] = None,
) -> float:
    """
    標準化した S_N の複製分布と標準正規分布のKolmogorov距離

    Args:
        model: モデル
        subset: 部分集合 u
        n: サンプルサイズ
        reps: 複製数
        seed: 乱数シード
        runner: 並列実行クラス
        block_rows: 乱数ブロックの行数（未指定時は設定値）

    Returns:
        Kolmogorov距離
    """
    design = Design(subsets=[list(subset)])
    runner = runner or ReplicateRunner()

    def one(r: int) -> float:
        sample = generate_pick_freeze(model.spec, design, n, derive_seed(seed, "clt", n, r), block_rows=block_rows)
        return estimate_S(sample).values[0]

    values = np.asarray(runner.map(one, range(reps)))
    spread = float(np.std(values))
    if not spread > 0.0:
        raise DegenerateOutputError(f"replicate estimates are constant at n={n}")
    return float(stats.kstest((values - np.mean(values)) / spread, "norm").statistic)
