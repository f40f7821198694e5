"""
漸近共分散モジュール

推定量ベクトルの漸近共分散 Γ_{u,S}, Γ_{u,T} のプラグイン推定と
CLTに基づく信頼区間・信頼領域
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from src.core.errors import DesignError, NumericalError, ParameterError
from src.core.estimators import centered_pair, check_variance, empirical_cov
from src.models.results import CovMatrix, EstimatorKind, IndexEstimate
from src.models.sample import PickFreezeSample

logger = logging.getLogger(__name__)

# 丸め誤差による負の対角成分を0とみなす相対許容幅
NEGATIVE_DIAGONAL_TOLERANCE = 1e-12


def _centered(sample: PickFreezeSample) -> Tuple[np.ndarray, np.ndarray, float]:
    """y の経験平均で中心化したデータと経験分散"""
    c = float(np.mean(sample.y))
    yc = sample.y - c
    yuc = sample.y_u - c
    variance = empirical_cov(yc, yc)
    check_variance(variance, float(np.mean(sample.y * sample.y)), "gamma")
    return yc, yuc, variance


def _check_estimate(sample: PickFreezeSample, est: IndexEstimate):
    if len(est.values) != sample.k:
        raise DesignError(f"estimate has {len(est.values)} values but sample has k={sample.k}")


def _clip_diagonal(entries: np.ndarray) -> np.ndarray:
    scale = max(float(np.max(np.abs(entries))), 1.0)
    for i in range(entries.shape[0]):
        if -NEGATIVE_DIAGONAL_TOLERANCE * scale < entries[i, i] < 0.0:
            entries[i, i] = 0.0
    return entries


def _linearized_gamma(a: np.ndarray, b: np.ndarray, s: np.ndarray, variance: float) -> np.ndarray:
    """
    D_l = A_l − s_l·B の経験共分散を V² で割った行列

    Cov(A_l, A_j) − s_l Cov(A_j, B) − s_j Cov(A_l, B) + s_l s_j Var(B) と代数的に等しい

    Args:
        a: (N, k) の A_l = Y·Y^{u_l}
        b: 長さ N の B（S: Y², T: M^u）
        s: k 個の指数値
        variance: Var(Y)

    Returns:
        k×k 行列
    """
    d = a - b[:, None] * s[None, :]
    d = d - d.mean(axis=0)
    entries = (d.T @ d) / d.shape[0] / variance ** 2
    entries = (entries + entries.T) / 2
    return _clip_diagonal(entries)


def gamma_S(sample: PickFreezeSample, s_hat: IndexEstimate) -> CovMatrix:
    """
    推定量 S_N の漸近共分散 Γ_{u,S} のプラグイン推定

    全てのモーメントは y の経験平均で中心化したデータ上の 1/N 正規化

    Args:
        sample: pick-freezeサンプル
        s_hat: 同じサンプル上の estimate_S の結果

    Returns:
        k×k の CovMatrix
    """
    _check_estimate(sample, s_hat)
    yc, yuc, variance = _centered(sample)
    entries = _linearized_gamma(yc[:, None] * yuc, yc * yc, s_hat.as_array(), variance)
    logger.debug(f"[GAMMA_S] n={sample.n}, diag={np.diag(entries).tolist()}")
    return CovMatrix(entries=entries)


def gamma_T(sample: PickFreezeSample, t_hat: IndexEstimate) -> CovMatrix:
    """
    推定量 T_N の漸近共分散 Γ_{u,T} のプラグイン推定

    gamma_S の Y² を M^u = (Y² + Σ_j (Y^{u_j})²)/(k+1) に置き換えたもの

    Args:
        sample: pick-freezeサンプル
        t_hat: 同じサンプル上の estimate_T の結果

    Returns:
        k×k の CovMatrix
    """
    _check_estimate(sample, t_hat)
    yc, yuc, variance = _centered(sample)
    m = (yc * yc + (yuc * yuc).sum(axis=1)) / (sample.k + 1)
    entries = _linearized_gamma(yc[:, None] * yuc, m, t_hat.as_array(), variance)
    logger.debug(f"[GAMMA_T] n={sample.n}, diag={np.diag(entries).tolist()}")
    return CovMatrix(entries=entries)


def gamma_T_pair(sample: PickFreezeSample, t_hat: IndexEstimate) -> CovMatrix:
    """
    k=1 のときの Γ_{u,T} の展開形

    Var(YY^u) − 2S Cov(YY^u, Y²) + (S²/2)(Var(Y²) + Cov(Y², (Y^u)²)) を V² で割る。
    Y と Y^u の交換可能性を使う項はそれぞれの対称化した値を用いる

    Args:
        sample: k=1 のサンプル
        t_hat: estimate_T の結果

    Returns:
        1×1 の CovMatrix
    """
    if sample.k != 1:
        raise DesignError(f"gamma_T_pair needs k = 1, got k={sample.k}")
    _check_estimate(sample, t_hat)
    yc, yuc, variance = _centered(sample)
    yu = yuc[:, 0]
    a = yc * yu
    y2 = yc * yc
    yu2 = yu * yu
    s = t_hat.values[0]

    cov_a_y2 = (empirical_cov(a, y2) + empirical_cov(a, yu2)) / 2
    var_y2 = (empirical_cov(y2, y2) + empirical_cov(yu2, yu2)) / 2
    value = (empirical_cov(a, a) - 2 * s * cov_a_y2 + (s * s / 2) * (var_y2 + empirical_cov(y2, yu2))) / variance ** 2
    entries = _clip_diagonal(np.array([[value]]))
    return CovMatrix(entries=entries)


def tilde_variance(sample: PickFreezeSample, est: IndexEstimate, mu: Optional[float] = None) -> CovMatrix:
    """
    中心化ケース（k=1）の推定量 tilde-S の漸近分散

    σ² = Var((YY^u − S·Y²) / V)、V = mean(Y²)（中心化後）

    Args:
        sample: k=1 のサンプル
        est: estimate_tilde_S の結果
        mu: 既知の平均（Noneなら経験平均）

    Returns:
        1×1 の CovMatrix
    """
    ys, yus = centered_pair(sample, mu)
    second_moment = float(np.mean(ys * ys))
    if not second_moment > 0.0:
        raise NumericalError("tilde variance: mean(y^2) is zero after centering")
    w = (ys * yus - est.values[0] * ys * ys) / second_moment
    return CovMatrix(entries=_clip_diagonal(np.array([[empirical_cov(w, w)]])))


def plugin_gamma(sample: PickFreezeSample, est: IndexEstimate, mu: Optional[float] = None) -> CovMatrix:
    """
    推定量の種類に対応するプラグイン共分散

    Args:
        sample: pick-freezeサンプル
        est: 推定結果
        mu: tilde-S 用の既知の平均

    Returns:
        CovMatrix
    """
    if est.estimator == EstimatorKind.S:
        return gamma_S(sample, est)
    if est.estimator == EstimatorKind.T:
        return gamma_T(sample, est)
    if est.estimator == EstimatorKind.TILDE_S:
        return tilde_variance(sample, est, mu)
    raise ParameterError(f"no asymptotic covariance available for estimator {est.estimator.value}")


def _check_level(level: float):
    if not 0.0 < level < 1.0:
        raise ParameterError(f"level must lie in (0, 1), got {level}")


def asymptotic_ci(
    est: IndexEstimate,
    gamma: CovMatrix,
    level: float,
    n: Optional[int] = None,
) -> List[Tuple[float, float]]:
    """
    座標ごとの漸近信頼区間 est_j ± z_{(1+level)/2}·sqrt(Γ_jj / n)

    Args:
        est: 推定結果
        gamma: プラグイン共分散
        level: 信頼水準
        n: サンプルサイズ（未指定時は est.n）

    Returns:
        (下限, 上限) のリスト
    """
    _check_level(level)
    if gamma.dim != len(est.values):
        raise ParameterError(f"covariance dimension {gamma.dim} does not match {len(est.values)} estimates")
    n = n or est.n
    diagonal = gamma.diagonal()
    if np.any(diagonal < 0):
        raise NumericalError(f"covariance has a negative diagonal entry: {diagonal.tolist()}")
    z = float(stats.norm.ppf((1.0 + level) / 2.0))
    halfwidths = z * np.sqrt(diagonal / n)
    return [(v - h, v + h) for v, h in zip(est.values, halfwidths.tolist())]


def confidence_region_contains(
    est: IndexEstimate,
    gamma: CovMatrix,
    point: Sequence[float],
    level: float,
    n: Optional[int] = None,
) -> bool:
    """
    楕円信頼領域 n·(est − point)ᵀ Γ⁻¹ (est − point) ≤ χ²_k(level) に point が含まれるか

    Args:
        est: 推定結果
        gamma: プラグイン共分散（正則）
        point: 判定する点
        level: 信頼水準
        n: サンプルサイズ（未指定時は est.n）

    Returns:
        含まれる場合True
    """
    _check_level(level)
    n = n or est.n
    diff = est.as_array() - np.asarray(point, dtype=float)
    try:
        solved = np.linalg.solve(gamma.entries, diff)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"covariance matrix is singular: {e}") from e
    distance = n * float(diff @ solved)
    return distance <= float(stats.chi2.ppf(level, df=len(diff)))
