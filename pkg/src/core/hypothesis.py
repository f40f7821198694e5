"""
仮説検定モジュール

結合統計量 G̃_N の構成、線形形式の検定、対角な帰無共分散の下の
5種類の統計量（和、絶対値の和、和の絶対値、二乗和、最大値）、
検出力曲線と水準の推定
"""
import logging
import math
from functools import lru_cache
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import integrate, optimize, stats

from src.core.asymptotics import gamma_S, gamma_T
from src.core.benchmarks import AnalyticModel, example1_gamma
from src.core.config import settings
from src.core.errors import DegenerateOutputError, DesignError, ParameterError
from src.core.estimators import estimate_S, estimate_T
from src.core.runner import ReplicateRunner
from src.core.sampling import derive_seed, generate_pick_freeze, union_design
from src.models.results import (
    CovMatrix,
    EstimatorKind,
    JointStatistic,
    LevelStudy,
    PowerRow,
    StatisticKind,
    TestPlan,
    TestProblem,
    TestResult,
)
from src.models.sample import ModelSpec, PickFreezeSample

logger = logging.getLogger(__name__)


def _check_alpha(alpha: float):
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")


# ---- 結合統計量 ----

def problem_design(problem: TestProblem):
    """検定問題に必要な全ての部分集合を含む計画"""
    return union_design(problem.u, problem.v, problem.w)


def generate_for_problem(
    model: ModelSpec,
    problem: TestProblem,
    n: int,
    seed: int,
    block_rows: Optional[int] = None,
) -> PickFreezeSample:
    """
    検定問題の全ての部分集合を1つのサンプルとして生成

    Args:
        model: モデル
        problem: 検定問題
        n: サンプルサイズ
        seed: 乱数シード
        block_rows: 乱数ブロックの行数（未指定時は設定値）

    Returns:
        PickFreezeSample
    """
    return generate_pick_freeze(model, problem_design(problem), n, seed, block_rows=block_rows)


def _contrast_matrix(problem: TestProblem, subsets: List[List[int]]) -> np.ndarray:
    """推定値ベクトルから (S^u, S^v − S^w) への線形写像"""
    rows = []
    for subset in (problem.u.subsets if problem.u else []):
        row = np.zeros(len(subsets))
        row[subsets.index(subset)] = 1.0
        rows.append(row)
    if problem.v and problem.w:
        for a, b in zip(problem.v.subsets, problem.w.subsets):
            row = np.zeros(len(subsets))
            row[subsets.index(a)] += 1.0
            row[subsets.index(b)] -= 1.0
            rows.append(row)
    return np.array(rows)


def build_GN(
    sample: PickFreezeSample,
    problem: TestProblem,
    estimator: EstimatorKind = EstimatorKind.S,
) -> JointStatistic:
    """
    G̃_N = √N·(Ŝ^u, Ŝ^v − Ŝ^w) とそのプラグイン共分散 Γ_N を構成

    Γ_N は全ての部分集合の推定値の共分散を線形写像で変換したもので、
    v と w が同じデータを共有することによる交差項を含む

    Args:
        sample: 問題の全ての部分集合の列を持つサンプル
        problem: 検定問題
        estimator: S または T

    Returns:
        JointStatistic
    """
    subsets = problem.all_subsets()
    missing = [s for s in subsets if sample.design.index_of(s) < 0]
    if missing:
        raise DesignError(f"sample is missing columns for subsets {missing}")
    restricted = sample.restrict(subsets)

    estimator = EstimatorKind(estimator)
    if estimator == EstimatorKind.S:
        est = estimate_S(restricted)
        gamma_full = gamma_S(restricted, est)
    elif estimator == EstimatorKind.T:
        est = estimate_T(restricted)
        gamma_full = gamma_T(restricted, est)
    else:
        raise ParameterError(f"joint statistic supports estimators S and T, got {estimator.value}")

    contrast = _contrast_matrix(problem, subsets)
    values = math.sqrt(sample.n) * (contrast @ est.as_array())
    entries = contrast @ gamma_full.entries @ contrast.T
    entries = (entries + entries.T) / 2
    logger.debug(f"[BUILD_GN] n={sample.n}, values={values.tolist()}")
    return JointStatistic(
        values=values,
        gamma=CovMatrix(entries=entries),
        n=sample.n,
        labels=problem.labels(),
    )


# ---- 線形形式の検定 ----

def test_linear(
    coefficients: Sequence[float],
    gn: Sequence[float],
    gamma_n: CovMatrix,
    alpha: float,
    *,
    n: Optional[int] = None,
    shift: float = 0.0,
) -> TestResult:
    """
    線形形式 A·G̃_N による検定

    統計量は (A·G̃_N − √N·shift) / sqrt(A Γ_N Aᵗ)、閾値は標準正規分布の (1−α) 分位点。
    shift を与えると片側検定 H0: A·S ≤ shift になる

    Args:
        coefficients: 線形形式 A
        gn: G̃_N
        gamma_n: Γ_N
        alpha: 有意水準
        n: サンプルサイズ（shift を使う場合に必要）
        shift: 片側検定の右辺

    Returns:
        TestResult
    """
    _check_alpha(alpha)
    a = np.asarray(coefficients, dtype=float)
    g = np.asarray(gn, dtype=float)
    if a.shape != g.shape or a.shape[0] != gamma_n.dim:
        raise DesignError(f"linear form of length {a.shape[0]} does not match statistic of length {g.shape[0]}")
    variance = float(a @ gamma_n.entries @ a)
    if not variance > 0.0:
        raise DegenerateOutputError(f"A Gamma A^t must be positive, got {variance!r}")
    offset = 0.0
    if shift != 0.0:
        if n is None:
            raise ParameterError("one-sided test with a nonzero shift needs n")
        offset = math.sqrt(n) * shift
    statistic = (float(a @ g) - offset) / math.sqrt(variance)
    threshold = float(stats.norm.ppf(1.0 - alpha))
    return TestResult(
        statistic=statistic,
        threshold=threshold,
        alpha=alpha,
        reject=statistic > threshold,
        statistic_kind=StatisticKind.LINEAR.value,
        coefficients=a.tolist(),
    )


def test_one_sided(
    joint: JointStatistic,
    coefficients: Sequence[float],
    alpha: float,
    bound: float = 0.0,
) -> TestResult:
    """
    片側検定 H0: A·S ≤ bound（大きな正の値で棄却）

    例えば S^v ≤ S^w は v−w の差の座標に A=1 を置けばよい

    Args:
        joint: 結合統計量
        coefficients: 線形形式 A
        alpha: 有意水準
        bound: 右辺

    Returns:
        TestResult
    """
    return test_linear(coefficients, joint.values, joint.gamma, alpha, n=joint.n, shift=bound)


# ---- 絶対値の和の分位点 ----

def abs_sum_density(u):
    """
    |N1| + |N2|（N1, N2 は独立な標準正規）の密度
    (2/√π)·exp(−u²/4)·(2Φ(u/√2) − 1)、u ≥ 0
    """
    u = np.asarray(u, dtype=float)
    density = 2.0 / math.sqrt(math.pi) * np.exp(-u * u / 4.0) * (2.0 * stats.norm.cdf(u / math.sqrt(2.0)) - 1.0)
    density = np.where(u >= 0.0, density, 0.0)
    return density if density.ndim else float(density)


def abs_sum_cdf(t: float) -> float:
    """|N1| + |N2| の分布関数（適応的数値積分）"""
    if t <= 0.0:
        return 0.0
    value, _ = integrate.quad(abs_sum_density, 0.0, t, epsabs=1e-12, epsrel=1e-12, limit=200)
    return float(value)


def quantile_abs_sum(alpha: float) -> float:
    """
    |N1| + |N2| の (1−α) 分位点

    分布関数を数値積分し、二分法で 1e-9 まで反転する

    Args:
        alpha: 有意水準

    Returns:
        分位点
    """
    _check_alpha(alpha)
    target = 1.0 - alpha
    upper = 1.0
    while abs_sum_cdf(upper) < target:
        upper *= 2.0
        if upper > 100.0:
            raise ParameterError(f"alpha={alpha} is too small to invert numerically")
    return float(optimize.bisect(lambda t: abs_sum_cdf(t) - target, 0.0, upper, xtol=1e-9))


# ---- 対角な帰無共分散の下の検定 ----

def statistic_value(kind: StatisticKind, g: np.ndarray) -> float:
    """
    G̃_N から統計量を計算

    Args:
        kind: t1..t5
        g: G̃_N

    Returns:
        統計量
    """
    kind = StatisticKind(kind)
    g = np.asarray(g, dtype=float)
    if kind == StatisticKind.T1:
        return float(np.sum(g))
    if kind == StatisticKind.T2:
        return float(np.sum(np.abs(g)))
    if kind == StatisticKind.T3:
        return float(abs(np.sum(g)))
    if kind == StatisticKind.T4:
        return float(np.sum(g * g))
    if kind == StatisticKind.T5:
        return float(np.max(np.abs(g)))
    raise ParameterError(f"unknown statistic kind: {kind}")


def diagonal_threshold(
    kind: StatisticKind,
    alpha: float,
    sigma0: float,
    dim: int = 2,
    draws: Optional[int] = None,
) -> float:
    """
    帰無仮説の下で Γ = sigma0²·I のときの閾値

    同じ引数の閾値は再計算せずキャッシュから返す

    Args:
        kind: t1..t5
        alpha: 有意水準
        sigma0: 座標ごとの標準偏差
        dim: 次元
        draws: 模擬が必要な場合の模擬回数（未指定時は設定値）

    Returns:
        閾値 z_α
    """
    _check_alpha(alpha)
    kind = StatisticKind(kind)
    if sigma0 <= 0:
        raise ParameterError(f"sigma0 must be positive, got {sigma0}")
    return _cached_diagonal_threshold(kind, float(alpha), float(sigma0), int(dim), draws or settings.null_draws)


@lru_cache(maxsize=256)
def _cached_diagonal_threshold(kind: StatisticKind, alpha: float, sigma0: float, dim: int, draws: int) -> float:
    if kind == StatisticKind.T1:
        return sigma0 * math.sqrt(dim) * float(stats.norm.ppf(1.0 - alpha))
    if kind == StatisticKind.T2:
        if dim == 2:
            return sigma0 * quantile_abs_sum(alpha)
        gamma = CovMatrix(entries=sigma0 * sigma0 * np.eye(dim))
        return simulated_threshold(kind, gamma, alpha, draws=draws)
    if kind == StatisticKind.T3:
        return sigma0 * math.sqrt(dim) * float(stats.norm.ppf(1.0 - alpha / 2.0))
    if kind == StatisticKind.T4:
        if dim == 2:
            return sigma0 * sigma0 * (-2.0 * math.log(alpha))
        return sigma0 * sigma0 * float(stats.chi2.ppf(1.0 - alpha, df=dim))
    if kind == StatisticKind.T5:
        return sigma0 * float(stats.norm.ppf((1.0 + (1.0 - alpha) ** (1.0 / dim)) / 2.0))
    raise ParameterError(f"no diagonal threshold for statistic kind {kind.value}")


def simulated_threshold(
    kind: StatisticKind,
    gamma: CovMatrix,
    alpha: float,
    draws: Optional[int] = None,
    seed: int = 0,
) -> float:
    """
    帰無分布 N(0, Γ) を模擬して統計量の (1−α) 分位点を求める

    Args:
        kind: t1..t5
        gamma: 帰無仮説の下の共分散
        alpha: 有意水準
        draws: 模擬回数（未指定時は設定値）
        seed: 乱数シード

    Returns:
        閾値
    """
    _check_alpha(alpha)
    draws = draws or settings.null_draws
    rng = np.random.default_rng(derive_seed(seed, "null", StatisticKind(kind).value))
    g = rng.multivariate_normal(np.zeros(gamma.dim), gamma.entries, size=draws, method="eigh")
    kind = StatisticKind(kind)
    if kind == StatisticKind.T1:
        values = g.sum(axis=1)
    elif kind == StatisticKind.T2:
        values = np.abs(g).sum(axis=1)
    elif kind == StatisticKind.T3:
        values = np.abs(g.sum(axis=1))
    elif kind == StatisticKind.T4:
        values = (g * g).sum(axis=1)
    elif kind == StatisticKind.T5:
        values = np.abs(g).max(axis=1)
    else:
        raise ParameterError(f"cannot simulate threshold for statistic kind {kind.value}")
    return float(np.quantile(values, 1.0 - alpha))


def test_diagonal(
    kind: StatisticKind,
    gn: Sequence[float],
    alpha: float,
    sigma0: float,
    draws: Optional[int] = None,
) -> TestResult:
    """
    帰無仮説の下で Γ = sigma0²·I となる統計量 T1..T5 の検定

    Args:
        kind: t1..t5
        gn: G̃_N
        alpha: 有意水準
        sigma0: 座標ごとの標準偏差
        draws: 閾値の模擬回数（未指定時は設定値）

    Returns:
        TestResult
    """
    g = np.asarray(gn, dtype=float)
    statistic = statistic_value(kind, g)
    threshold = diagonal_threshold(kind, alpha, sigma0, dim=len(g), draws=draws)
    return TestResult(
        statistic=statistic,
        threshold=threshold,
        alpha=alpha,
        reject=statistic > threshold,
        statistic_kind=StatisticKind(kind).value,
    )


def test_k2(kind: StatisticKind, gn: Sequence[float], alpha: float, sigma0: float) -> TestResult:
    """2次元の G̃_N に対する test_diagonal"""
    if len(gn) != 2:
        raise DesignError(f"test_k2 needs a 2-vector, got length {len(gn)}")
    return test_diagonal(kind, gn, alpha, sigma0)


def test_generic(
    kind: StatisticKind,
    joint: JointStatistic,
    alpha: float,
    seed: int = 0,
    draws: Optional[int] = None,
) -> TestResult:
    """
    プラグイン Γ_N を帰無共分散とする T1..T5 の検定

    T1 と T3 は正規分布の分位点、それ以外は模擬した帰無分布を使う

    Args:
        kind: t1..t5
        joint: 結合統計量
        alpha: 有意水準
        seed: 模擬用の乱数シード
        draws: 模擬回数（未指定時は設定値）

    Returns:
        TestResult
    """
    kind = StatisticKind(kind)
    statistic = statistic_value(kind, joint.values)
    ones = np.ones(joint.gamma.dim)
    if kind in (StatisticKind.T1, StatisticKind.T3):
        sd = math.sqrt(max(float(ones @ joint.gamma.entries @ ones), 0.0))
        if sd == 0.0:
            raise DegenerateOutputError("null variance of the sum statistic is zero")
        q = 1.0 - alpha if kind == StatisticKind.T1 else 1.0 - alpha / 2.0
        threshold = sd * float(stats.norm.ppf(q))
    else:
        threshold = simulated_threshold(kind, joint.gamma, alpha, draws=draws, seed=seed)
    return TestResult(
        statistic=statistic,
        threshold=threshold,
        alpha=alpha,
        reject=statistic > threshold,
        statistic_kind=kind.value,
    )


def run_test(plan: TestPlan, joint: JointStatistic, seed: int = 0, draws: Optional[int] = None) -> TestResult:
    """
    検定計画に従って結合統計量を検定

    Args:
        plan: 検定計画
        joint: 結合統計量
        seed: 模擬閾値用の乱数シード
        draws: 模擬閾値の模擬回数（未指定時は設定値）

    Returns:
        TestResult
    """
    if plan.kind == StatisticKind.LINEAR:
        return test_linear(plan.coefficients, joint.values, joint.gamma, plan.alpha,
                           n=joint.n, shift=plan.shift)
    if plan.sigma0 is not None:
        return test_diagonal(plan.kind, joint.values, plan.alpha, plan.sigma0, draws=draws)
    return test_generic(plan.kind, joint, plan.alpha, seed=seed, draws=draws)


# ---- 検出力と水準 ----

def power_test1_closed_form(lambda1: float, n: int, alpha: float) -> float:
    """
    第1の例題における和の統計量の漸近検出力

    (T − 2√N λ1²)/sqrt(2(Γ11 + Γ12)) が漸近的に標準正規であることから
    1 − Φ((z_α − 2√N λ1²)/sqrt(2(Γ11 + Γ12)))、z_α = √6·Φ⁻¹(1−α)

    Args:
        lambda1: λ1
        n: サンプルサイズ
        alpha: 有意水準

    Returns:
        検出力
    """
    _check_alpha(alpha)
    gamma = example1_gamma(lambda1)
    z_alpha = diagonal_threshold(StatisticKind.T1, alpha, math.sqrt(3.0))
    scale = math.sqrt(2.0 * (gamma[0, 0] + gamma[0, 1]))
    return float(1.0 - stats.norm.cdf((z_alpha - 2.0 * math.sqrt(n) * lambda1 * lambda1) / scale))


def rejection_rate(
    model: ModelSpec,
    plan: TestPlan,
    n: int,
    reps: int,
    seed: int,
    key: Sequence = (),
    runner: Optional[ReplicateRunner] = None,
    block_rows: Optional[int] = None,
    draws: Optional[int] = None,
) -> float:
    """
    reps 個の独立なデータセットで検定を行い棄却率を返す

    複製 r は derive_seed(seed, *key, r) のみを使う

    Args:
        model: モデル
        plan: 検定計画
        n: サンプルサイズ
        reps: 複製数
        seed: 乱数シード
        key: シード導出用の追加キー
        runner: 並列実行クラス
        block_rows: 乱数ブロックの行数
        draws: 模擬閾値の模擬回数

    Returns:
        棄却率
    """
    if reps < 1:
        raise ParameterError(f"reps must be >= 1, got {reps}")
    runner = runner or ReplicateRunner()
    design = problem_design(plan.problem)

    def one(r: int) -> bool:
        replicate_seed = derive_seed(seed, *key, r)
        sample = generate_pick_freeze(model, design, n, replicate_seed, block_rows=block_rows)
        joint = build_GN(sample, plan.problem, plan.estimator)
        return run_test(plan, joint, seed=replicate_seed, draws=draws).reject

    rejections = runner.map(one, range(reps))
    return sum(rejections) / reps


def power_curve(
    family: Callable[[float], AnalyticModel],
    plan: TestPlan,
    grid: Sequence[float],
    n: int,
    reps: int,
    seed: int,
    runner: Optional[ReplicateRunner] = None,
    block_rows: Optional[int] = None,
    draws: Optional[int] = None,
) -> List[PowerRow]:
    """
    λ1 の格子上で検出力をモンテカルロ推定

    第1の例題の和の統計量には閉形式の検出力も併記する

    Args:
        family: λ1 → モデル
        plan: 検定計画
        grid: λ1 の格子
        n: サンプルサイズ
        reps: 格子点ごとの複製数
        seed: 乱数シード
        runner: 並列実行クラス
        block_rows: 乱数ブロックの行数
        draws: 模擬閾値の模擬回数

    Returns:
        PowerRow のリスト
    """
    rows = []
    for index, lambda1 in enumerate(grid):
        model = family(lambda1)
        power = rejection_rate(model.spec, plan, n, reps, seed, key=("power", n, index), runner=runner,
                               block_rows=block_rows, draws=draws)
        closed = None
        if model.name == "example1" and plan.kind == StatisticKind.T1 and plan.sigma0 is not None:
            closed = power_test1_closed_form(lambda1, n, plan.alpha)
        stderr = math.sqrt(power * (1.0 - power) / reps)
        logger.info(f"[POWER] lambda1={lambda1}, n={n}, power={power}, closed_form={closed}")
        rows.append(PowerRow(parameter=lambda1, n=n, power=power, closed_form_power=closed, mc_stderr=stderr))
    return rows


def level_study(
    model: ModelSpec,
    plan: TestPlan,
    n: int,
    reps: int,
    repetitions: int,
    seed: int,
    runner: Optional[ReplicateRunner] = None,
    block_rows: Optional[int] = None,
    draws: Optional[int] = None,
) -> LevelStudy:
    """
    帰無仮説の下の棄却率（水準）を repetitions 回推定

    Args:
        model: 帰無仮説を満たすモデル
        plan: 検定計画
        n: サンプルサイズ
        reps: 1回の推定に使う複製数
        repetitions: 推定の繰り返し回数
        seed: 乱数シード
        runner: 並列実行クラス
        block_rows: 乱数ブロックの行数
        draws: 模擬閾値の模擬回数

    Returns:
        LevelStudy
    """
    if repetitions < 1:
        raise ParameterError(f"repetitions must be >= 1, got {repetitions}")
    levels = [
        rejection_rate(model, plan, n, reps, seed, key=("level", n, m), runner=runner,
                       block_rows=block_rows, draws=draws)
        for m in range(repetitions)
    ]
    study = LevelStudy(n=n, reps=reps, levels=levels)
    logger.info(f"[LEVEL] n={n}, min={study.minimum}, mean={study.mean}, max={study.maximum}")
    return study

