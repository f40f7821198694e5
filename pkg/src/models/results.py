"""
推定結果のデータモデル定義

指数推定値、漸近共分散、検定、集中不等式、Berry-Esseen上界の
データ構造を定義
"""
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.sample import Design


class EstimatorKind(str, Enum):
    """推定量の種類"""
    S = "S"
    T = "T"
    FULL_INFO = "full"
    TILDE_S = "tilde"


class IndexEstimate(BaseModel):
    """
    閉Sobol指数の推定値
    """
    model_config = ConfigDict(frozen=True)

    values: List[float] = Field(..., description="k個の推定値（TildeSは1個）")
    estimator: EstimatorKind = Field(..., description="推定量の種類")
    n: int = Field(..., description="サンプルサイズN")
    design: Design = Field(..., description="計画")

    @model_validator(mode="after")
    def check_values(self) -> "IndexEstimate":
        expected = 1 if self.estimator == EstimatorKind.TILDE_S else self.design.k
        if len(self.values) != expected:
            raise ValueError(f"expected {expected} values, got {len(self.values)}")
        if not all(np.isfinite(self.values)):
            raise ValueError("index estimates must be finite")
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


class PooledStats(BaseModel):
    """
    全複製をプールした一次・二次モーメント用の統計量 Z_i, M_i
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    z: np.ndarray = Field(..., description="Z_i = (Y_i + Σ_j Y_i^{u_j})/(k+1)")
    m: np.ndarray = Field(..., description="M_i = (Y_i² + Σ_j (Y_i^{u_j})²)/(k+1)")


class CovMatrix(BaseModel):
    """
    漸近共分散行列 Γ のプラグイン推定
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    entries: np.ndarray = Field(..., description="dim×dim の成分")

    @model_validator(mode="after")
    def check_symmetric(self) -> "CovMatrix":
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"covariance must be square, got shape {entries.shape}")
        scale = max(float(np.max(np.abs(entries))), 1.0) if entries.size else 1.0
        if not np.allclose(entries, entries.T, rtol=0.0, atol=1e-12 * scale):
            raise ValueError("covariance must be symmetric")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        return self

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries)


class JointStatistic(BaseModel):
    """
    結合統計量 G̃_N と Γ_N の組
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray = Field(..., description="√N·(Ŝ^u, Ŝ^v − Ŝ^w)")
    gamma: CovMatrix = Field(..., description="結合ベクトルの Γ_N")
    n: int = Field(..., description="サンプルサイズN")
    labels: List[str] = Field(default_factory=list, description="各成分の名前")

    @model_validator(mode="after")
    def check_dims(self) -> "JointStatistic":
        if len(self.values) != self.gamma.dim:
            raise ValueError("statistic and covariance dimensions differ")
        return self


class TestProblem(BaseModel):
    """
    検定問題 H0: S^u = 0 かつ S^v = S^w
    """
    __test__ = False
    model_config = ConfigDict(frozen=True)

    u: Optional[Design] = Field(None, description="ゼロを検定するk個の部分集合")
    v: Optional[Design] = Field(None, description="等式の左辺l個")
    w: Optional[Design] = Field(None, description="等式の右辺l個")

    @model_validator(mode="after")
    def check_sizes(self) -> "TestProblem":
        lv = self.v.k if self.v else 0
        lw = self.w.k if self.w else 0
        if lv != lw:
            raise ValueError(f"v and w must have the same length (got {lv} and {lw})")
        if self.k + self.l < 1:
            raise ValueError("test problem needs k + l >= 1")
        return self

    @property
    def k(self) -> int:
        return self.u.k if self.u else 0

    @property
    def l(self) -> int:  # noqa: E743
        return self.v.k if self.v else 0

    def all_subsets(self) -> List[List[int]]:
        """登場する部分集合を重複なく登場順に返す"""
        seen: List[List[int]] = []
        for design in (self.u, self.v, self.w):
            if design is None:
                continue
            for subset in design.subsets:
                if subset not in seen:
                    seen.append(subset)
        return seen

    def labels(self) -> List[str]:
        names = [f"S[{label}]" for label in (self.u.labels() if self.u else [])]
        if self.v and self.w:
            names += [f"S[{a}]-S[{b}]" for a, b in zip(self.v.labels(), self.w.labels())]
        return names


class TestResult(BaseModel):
    """
    検定結果
    """
    __test__ = False
    model_config = ConfigDict(frozen=True)

    statistic: float = Field(..., description="検定統計量")
    threshold: float = Field(..., description="棄却閾値 z_α")
    alpha: float = Field(..., description="有意水準")
    reject: bool = Field(..., description="H0を棄却したか")
    statistic_kind: str = Field(..., description="T1..T5 または linear")
    coefficients: Optional[List[float]] = Field(None, description="線形形式 A の係数")

    @model_validator(mode="after")
    def check_decision(self) -> "TestResult":
        if self.reject != (self.statistic > self.threshold):
            raise ValueError("reject must equal statistic > threshold")
        return self


class BoundVariant(str, Enum):
    """集中不等式の対象推定量"""
    S = "S"
    T = "T"


class BoundSide(str, Enum):
    """偏差の向き"""
    ABOVE = "above"
    BELOW = "below"


class QVector(BaseModel):
    """
    集中不等式の未知量ベクトル Q（S用）または Q'（T用）
    """
    model_config = ConfigDict(frozen=True)

    variant: BoundVariant = Field(..., description="S: Q, T: Q'")
    V: float = Field(..., description="Var(Y)")
    S: float = Field(..., description="指数値")
    b: float = Field(..., description="|Y| の上界")
    C: Optional[float] = Field(None, description="Cov(Y, Y^u)")
    V_U_plus: Optional[float] = None
    V_U_minus: Optional[float] = None
    V_J_plus: Optional[float] = None
    V_J_minus: Optional[float] = None
    V_K_plus: Optional[float] = None
    V_K_minus: Optional[float] = None
    b_estimated: bool = Field(default=False, description="b を観測値から推定したか")

    @model_validator(mode="after")
    def check_moments(self) -> "QVector":
        if self.V <= 0:
            raise ValueError("V must be positive")
        if self.b <= 0:
            raise ValueError("b must be positive")
        if self.variant == BoundVariant.S:
            required = {"V_U_plus": self.V_U_plus, "V_U_minus": self.V_U_minus,
                        "V_J_plus": self.V_J_plus, "V_J_minus": self.V_J_minus}
        else:
            required = {"C": self.C, "V_K_plus": self.V_K_plus, "V_K_minus": self.V_K_minus}
        for name, value in required.items():
            if value is None:
                raise ValueError(f"{name} is required for variant {self.variant.value}")
            if name != "C" and value < 0:
                raise ValueError(f"{name} must be nonnegative")
        return self


class BoundReport(BaseModel):
    """
    偏差確率の上界とその構成項
    """
    model_config = ConfigDict(frozen=True)

    variant: BoundVariant = Field(..., description="S または T")
    side: BoundSide = Field(..., description="above / below")
    y: float = Field(..., description="偏差")
    n: int = Field(..., description="サンプルサイズN")
    bound: float = Field(..., description="1でクランプした上界")
    terms: Dict[str, float] = Field(..., description="M1..M5 または m1..m4")
    b_estimated: bool = Field(default=False, description="b を推定したか")

    @model_validator(mode="after")
    def check_bound(self) -> "BoundReport":
        if not 0.0 <= self.bound <= 1.0:
            raise ValueError(f"bound must lie in [0, 1], got {self.bound}")
        return self


class BEMoments(BaseModel):
    """
    中心化ケースのBerry-Esseen上界に必要なモーメント
    """
    model_config = ConfigDict(frozen=True)

    sigma2: float = Field(..., description="漸近分散 σ²")
    mu3: float = Field(..., description="Δ_N の標準化三次絶対モーメント μ₃,N")
    nu: float = Field(..., description="t における ν_N")
    V: float = Field(..., description="Var(Y)")
    C: float = Field(..., description="Cov(Y, Y^u)")
    S: float = Field(..., description="指数値")
    t: float = Field(default=0.0, description="モーメントを評価した t")
    n: int = Field(..., description="サンプルサイズN")
    var_y2: float = Field(..., description="Var(Y²)")
    cov_prod_y2: float = Field(..., description="Cov(YY^u, Y²)")

    @model_validator(mode="after")
    def check_moments(self) -> "BEMoments":
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if self.mu3 < 1.0 - 1e-9:
            raise ValueError(f"standardized third absolute moment must be >= 1, got {self.mu3}")
        return self

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))

    def nu_at(self, t: float, n: int) -> float:
        """
        任意の t における ν_N を再計算

        Args:
            t: 評価点
            n: サンプルサイズ

        Returns:
            ν_N(t)
        """
        return (t * self.sigma / np.sqrt(n) + 2.0 * self.S) * self.var_y2 - 2.0 * self.cov_prod_y2


class StatisticKind(str, Enum):
    """検定統計量の種類"""
    T1 = "t1"
    T2 = "t2"
    T3 = "t3"
    T4 = "t4"
    T5 = "t5"
    LINEAR = "linear"


class TestPlan(BaseModel):
    """
    検定の実行計画

    sigma0 を指定すると帰無仮説の下で Γ = sigma0²·I とみなす閉形式の閾値を使い、
    未指定の場合はプラグイン Γ_N から閾値を求める
    """
    __test__ = False
    model_config = ConfigDict(frozen=True)

    problem: TestProblem = Field(..., description="検定問題")
    kind: StatisticKind = Field(..., description="検定統計量")
    alpha: float = Field(..., gt=0.0, lt=1.0, description="有意水準")
    coefficients: Optional[List[float]] = Field(None, description="線形形式 A（linear のみ）")
    sigma0: Optional[float] = Field(None, gt=0.0, description="帰無仮説の下の座標ごとの標準偏差")
    estimator: EstimatorKind = Field(default=EstimatorKind.S, description="G_N に用いる推定量")
    shift: float = Field(default=0.0, description="片側検定 H0: A·S ≤ shift の右辺")

    @model_validator(mode="after")
    def check_plan(self) -> "TestPlan":
        dim = self.problem.k + self.problem.l
        if self.kind == StatisticKind.LINEAR:
            if self.coefficients is None:
                raise ValueError("linear test needs coefficients")
            if len(self.coefficients) != dim:
                raise ValueError(f"coefficients must have length {dim}, got {len(self.coefficients)}")
        if self.estimator not in (EstimatorKind.S, EstimatorKind.T):
            raise ValueError("joint statistic supports estimators S and T only")
        return self


class PowerRow(BaseModel):
    """検出力曲線の1点"""
    model_config = ConfigDict(frozen=True)

    parameter: float
    n: int
    power: float
    closed_form_power: Optional[float] = None
    mc_stderr: float


class LevelStudy(BaseModel):
    """
    帰無仮説の下での棄却率を繰り返し推定した結果
    """
    model_config = ConfigDict(frozen=True)

    n: int
    reps: int
    levels: List[float] = Field(..., description="各繰り返しの棄却率")

    @property
    def minimum(self) -> float:
        return min(self.levels)

    @property
    def mean(self) -> float:
        return float(np.mean(self.levels))

    @property
    def maximum(self) -> float:
        return max(self.levels)


class DeviationRow(BaseModel):
    """経験的な偏差確率"""
    model_config = ConfigDict(frozen=True)

    variant: BoundVariant
    n: int
    y: float
    above: float = Field(..., description="P(推定値 ≥ S + y) の経験頻度")
    below: float = Field(..., description="P(推定値 ≤ S − y) の経験頻度")
    reps: int


class CoverageRow(BaseModel):
    """信頼区間の被覆確率の上下界と経験被覆率"""
    model_config = ConfigDict(frozen=True)

    n: int
    L: float
    U: float
    empirical_coverage: Optional[float] = None
    mu3: float
    sigma2: float
    halfwidth: float
