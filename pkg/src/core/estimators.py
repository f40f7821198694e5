"""
閉Sobol指数の推定量モジュール

S_N（共分散比）、T_N（全複製をプールしたモーメント）、全情報版、
中心化ケースの tilde-S を pick-freeze サンプルから計算する
"""
import logging
from typing import Optional, Tuple

import numpy as np

from src.core.errors import DegenerateOutputError, DesignError
from src.models.results import EstimatorKind, IndexEstimate, PooledStats
from src.models.sample import PickFreezeSample

logger = logging.getLogger(__name__)

# 経験分散がこの倍率 × mean(y²) 以下なら出力を定数とみなす
DEGENERATE_RATIO = 1e-12


def empirical_cov(a: np.ndarray, b: np.ndarray) -> float:
    """1/N 正規化の経験共分散"""
    return float(np.mean((a - np.mean(a)) * (b - np.mean(b))))


def check_variance(variance: float, second_moment: float, label: str):
    if not variance > DEGENERATE_RATIO * second_moment:
        raise DegenerateOutputError(
            f"{label}: empirical output variance {variance!r} is degenerate "
            f"(second moment {second_moment!r})"
        )


def pooled_stats(sample: PickFreezeSample) -> PooledStats:
    """
    全ての複製をプールした Z_i, M_i を計算

    Args:
        sample: pick-freezeサンプル

    Returns:
        PooledStats
    """
    k = sample.k
    z = (sample.y + sample.y_u.sum(axis=1)) / (k + 1)
    m = (sample.y * sample.y + (sample.y_u * sample.y_u).sum(axis=1)) / (k + 1)
    return PooledStats(z=z, m=m)


def estimate_S(sample: PickFreezeSample) -> IndexEstimate:
    """
    共分散比推定量 S_N

    各座標は (mean(y·y_u) − mean(y)·mean(y_u)) / (mean(y²) − mean(y)²)

    Args:
        sample: pick-freezeサンプル

    Returns:
        IndexEstimate（estimator=S）
    """
    y = sample.y
    variance = empirical_cov(y, y)
    check_variance(variance, float(np.mean(y * y)), "estimate_S")
    values = [empirical_cov(y, sample.y_u[:, j]) / variance for j in range(sample.k)]
    logger.debug(f"[ESTIMATE_S] n={sample.n}, values={values}")
    return IndexEstimate(values=values, estimator=EstimatorKind.S, n=sample.n, design=sample.design)


def _pooled_centered(sample: PickFreezeSample) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    mean(Z) で平行移動したデータとその Z, M

    推定量 T と全情報版はこの平行移動で値が変わらない
    """
    k = sample.k
    c = float(np.mean(sample.y + sample.y_u.sum(axis=1)) / (k + 1))
    yc = sample.y - c
    yuc = sample.y_u - c
    zc = (yc + yuc.sum(axis=1)) / (k + 1)
    mc = (yc * yc + (yuc * yuc).sum(axis=1)) / (k + 1)
    return yc, yuc, zc, mc


def _pooled_denominator(sample: PickFreezeSample, zc: np.ndarray, mc: np.ndarray, label: str) -> float:
    denominator = float(np.mean(mc) - np.mean(zc) ** 2)
    check_variance(denominator, float(np.mean(pooled_stats(sample).m)), label)
    return denominator


def estimate_T(sample: PickFreezeSample) -> IndexEstimate:
    """
    全複製のモーメントを用いる推定量 T_N

    分子は mean(y·y_u) − (mean((y + y_u)/2))²、分母 mean(M) − mean(Z)² は
    k 個の座標で共通

    Args:
        sample: pick-freezeサンプル

    Returns:
        IndexEstimate（estimator=T）
    """
    yc, yuc, zc, mc = _pooled_centered(sample)
    denominator = _pooled_denominator(sample, zc, mc, "estimate_T")
    values = []
    for j in range(sample.k):
        numerator = float(np.mean(yc * yuc[:, j]) - np.mean((yc + yuc[:, j]) / 2) ** 2)
        values.append(numerator / denominator)
    logger.debug(f"[ESTIMATE_T] n={sample.n}, values={values}")
    return IndexEstimate(values=values, estimator=EstimatorKind.T, n=sample.n, design=sample.design)


def estimate_full_info(sample: PickFreezeSample) -> IndexEstimate:
    """
    分子の平均にも Z を用いる全情報版の推定量

    Args:
        sample: pick-freezeサンプル

    Returns:
        IndexEstimate（estimator=full）
    """
    yc, yuc, zc, mc = _pooled_centered(sample)
    denominator = _pooled_denominator(sample, zc, mc, "estimate_full_info")
    mean_z2 = float(np.mean(zc) ** 2)
    values = [float(np.mean(yc * yuc[:, j]) - mean_z2) / denominator for j in range(sample.k)]
    logger.debug(f"[ESTIMATE_FULL] n={sample.n}, values={values}")
    return IndexEstimate(values=values, estimator=EstimatorKind.FULL_INFO, n=sample.n, design=sample.design)


def centered_pair(sample: PickFreezeSample, mu: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    k=1 サンプルを既知の平均 mu（未指定時は mean(y)）で平行移動

    Args:
        sample: k=1 のサンプル
        mu: 既知の平均

    Returns:
        (y − c, y_u − c)
    """
    if sample.k != 1:
        raise DesignError(f"centered-case statistics need k = 1, got k={sample.k}")
    c = float(np.mean(sample.y)) if mu is None else float(mu)
    return sample.y - c, sample.y_u[:, 0] - c


def estimate_tilde_S(sample: PickFreezeSample, mu: Optional[float] = None) -> IndexEstimate:
    """
    中心化ケース（k=1）の推定量 mean(y·y_u) / mean(y²)

    Args:
        sample: k=1 のサンプル
        mu: 既知の平均（Noneなら経験平均で中心化）

    Returns:
        IndexEstimate（estimator=tilde、値は1個）
    """
    ys, yus = centered_pair(sample, mu)
    second_moment = float(np.mean(ys * ys))
    if not second_moment > 0.0:
        raise DegenerateOutputError("estimate_tilde_S: mean(y^2) is zero after centering")
    value = float(np.mean(ys * yus)) / second_moment
    logger.debug(f"[ESTIMATE_TILDE] n={sample.n}, mu={mu}, value={value}")
    return IndexEstimate(values=[value], estimator=EstimatorKind.TILDE_S, n=sample.n, design=sample.design)


def estimate(sample: PickFreezeSample, kind: EstimatorKind, mu: Optional[float] = None) -> IndexEstimate:
    """
    種類を指定して推定

    Args:
        sample: pick-freezeサンプル
        kind: 推定量の種類
        mu: tilde-S 用の既知の平均

    Returns:
        IndexEstimate
    """
    kind = EstimatorKind(kind)
    if kind == EstimatorKind.S:
        return estimate_S(sample)
    if kind == EstimatorKind.T:
        return estimate_T(sample)
    if kind == EstimatorKind.FULL_INFO:
        return estimate_full_info(sample)
    return estimate_tilde_S(sample, mu)
