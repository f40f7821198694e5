"""
サンプリング関連のデータモデル定義

入力分布、計画（部分集合のベクトル）、モデル仕様、pick-freezeサンプルの
データ構造を定義
"""
from enum import Enum
from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import special, stats

from src.core.errors import DesignError


class DistributionKind(str, Enum):
    """入力分布の種類"""
    UNIFORM = "uniform"
    NORMAL = "normal"
    BETA = "beta"
    SHIFTED_EXPONENTIAL = "shifted-exponential"
    DISCRETE = "discrete"


class InputDistribution(BaseModel):
    """
    入力変数の分布
    種類ごとに必要なパラメータのみを使用する
    """
    model_config = ConfigDict(frozen=True)

    kind: DistributionKind = Field(..., description="分布の種類")
    a: Optional[float] = Field(None, description="台の下端（uniform/beta）")
    b: Optional[float] = Field(None, description="台の上端（uniform/beta）")
    alpha: Optional[float] = Field(None, description="betaの形状パラメータα")
    beta: Optional[float] = Field(None, description="betaの形状パラメータβ")
    theta1: Optional[float] = Field(None, description="shifted-exponentialの位置θ1")
    theta2: Optional[float] = Field(None, description="shifted-exponentialのレートθ2")
    values: Optional[List[float]] = Field(None, description="離散分布の台（昇順）")
    probabilities: Optional[List[float]] = Field(None, description="離散分布の確率")

    @model_validator(mode="after")
    def check_parameters(self) -> "InputDistribution":
        """種類ごとのパラメータ制約を検証"""
        kind = self.kind
        if kind in (DistributionKind.UNIFORM, DistributionKind.BETA):
            if self.a is None or self.b is None:
                raise ValueError(f"{kind.value} requires 'a' and 'b'")
            if not self.a < self.b:
                raise ValueError(f"{kind.value} requires a < b (got a={self.a}, b={self.b})")
        if kind == DistributionKind.BETA:
            if self.alpha is None or self.beta is None:
                raise ValueError("beta requires 'alpha' and 'beta'")
            if self.alpha <= 0 or self.beta <= 0:
                raise ValueError("beta requires alpha > 0 and beta > 0")
        if kind == DistributionKind.SHIFTED_EXPONENTIAL:
            if self.theta1 is None or self.theta2 is None:
                raise ValueError("shifted-exponential requires 'theta1' and 'theta2'")
            if self.theta2 <= 0:
                raise ValueError("shifted-exponential requires theta2 > 0")
        if kind == DistributionKind.DISCRETE:
            if not self.values or not self.probabilities:
                raise ValueError("discrete requires 'values' and 'probabilities'")
            if len(self.values) != len(self.probabilities):
                raise ValueError("discrete values and probabilities must have the same length")
            if any(v2 <= v1 for v1, v2 in zip(self.values, self.values[1:])):
                raise ValueError("discrete values must be strictly increasing")
            if any(p < 0 for p in self.probabilities):
                raise ValueError("discrete probabilities must be nonnegative")
            if abs(sum(self.probabilities) - 1.0) > 1e-9:
                raise ValueError("discrete probabilities must sum to 1")
        return self

    # ---- 生成系ファクトリ ----

    @classmethod
    def uniform(cls, a: float, b: float) -> "InputDistribution":
        return cls(kind=DistributionKind.UNIFORM, a=a, b=b)

    @classmethod
    def normal(cls) -> "InputDistribution":
        return cls(kind=DistributionKind.NORMAL)

    @classmethod
    def beta_on(cls, alpha: float, beta: float, a: float, b: float) -> "InputDistribution":
        return cls(kind=DistributionKind.BETA, alpha=alpha, beta=beta, a=a, b=b)

    @classmethod
    def shifted_exponential(cls, theta1: float, theta2: float) -> "InputDistribution":
        return cls(kind=DistributionKind.SHIFTED_EXPONENTIAL, theta1=theta1, theta2=theta2)

    @classmethod
    def discrete(cls, values: List[float], probabilities: List[float]) -> "InputDistribution":
        return cls(kind=DistributionKind.DISCRETE, values=list(values), probabilities=list(probabilities))

    # ---- サンプリング ----

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """
        乱数生成器から size 個の独立な値を生成

        1回の呼び出しで消費する乱数の個数は size のみで決まる

        Args:
            rng: numpyの乱数生成器
            size: 生成する個数

        Returns:
            長さ size の配列
        """
        kind = self.kind
        if kind == DistributionKind.UNIFORM:
            return self.a + (self.b - self.a) * rng.random(size)
        if kind == DistributionKind.NORMAL:
            return rng.standard_normal(size)
        if kind == DistributionKind.BETA:
            # 2つのガンマ変量の比からbetaを作り [a, b] に伸縮
            g1 = rng.standard_gamma(self.alpha, size)
            g2 = rng.standard_gamma(self.beta, size)
            return self.a + (self.b - self.a) * (g1 / (g1 + g2))
        if kind == DistributionKind.SHIFTED_EXPONENTIAL:
            # 1 - U は (0, 1] に値をとる
            return self.from_uniform(1.0 - rng.random(size))
        return self.from_uniform(rng.random(size))

    def from_uniform(self, u):
        """
        一様乱数 U を分布の値に変換（逆関数法）

        shifted-exponential は θ1 − ln(U)/θ2 を用いるため U=1 が下端に対応する

        Args:
            u: 一様乱数（スカラーまたは配列）

        Returns:
            変換後の値
        """
        u = np.asarray(u, dtype=float)
        kind = self.kind
        if kind == DistributionKind.UNIFORM:
            out = self.a + (self.b - self.a) * u
        elif kind == DistributionKind.NORMAL:
            out = stats.norm.ppf(u)
        elif kind == DistributionKind.BETA:
            out = self.a + (self.b - self.a) * special.betaincinv(self.alpha, self.beta, u)
        elif kind == DistributionKind.SHIFTED_EXPONENTIAL:
            out = self.theta1 - np.log(u) / self.theta2
        else:
            cumulative = np.cumsum(self.probabilities)
            idx = np.searchsorted(cumulative, u, side="right")
            idx = np.minimum(idx, len(self.values) - 1)
            out = np.asarray(self.values, dtype=float)[idx]
        return out if out.ndim else float(out)

    # ---- 解析的モーメント ----

    def mean(self) -> float:
        """分布の平均"""
        kind = self.kind
        if kind == DistributionKind.UNIFORM:
            return (self.a + self.b) / 2
        if kind == DistributionKind.NORMAL:
            return 0.0
        if kind == DistributionKind.BETA:
            return self.a + (self.b - self.a) * self.alpha / (self.alpha + self.beta)
        if kind == DistributionKind.SHIFTED_EXPONENTIAL:
            return self.theta1 + 1.0 / self.theta2
        return float(np.dot(self.values, self.probabilities))

    def variance(self) -> float:
        """分布の分散"""
        kind = self.kind
        if kind == DistributionKind.UNIFORM:
            return (self.b - self.a) ** 2 / 12
        if kind == DistributionKind.NORMAL:
            return 1.0
        if kind == DistributionKind.BETA:
            s = self.alpha + self.beta
            return (self.b - self.a) ** 2 * self.alpha * self.beta / (s * s * (s + 1))
        if kind == DistributionKind.SHIFTED_EXPONENTIAL:
            return 1.0 / self.theta2 ** 2
        values = np.asarray(self.values, dtype=float)
        return float(np.dot(values ** 2, self.probabilities) - self.mean() ** 2)


class Design(BaseModel):
    """
    計画 u = (u_1, ..., u_k)
    各部分集合は1始まりの入力番号を昇順・重複なしで保持
    """
    model_config = ConfigDict(frozen=True)

    subsets: List[List[int]] = Field(..., description="k個の空でない部分集合")

    @field_validator("subsets")
    @classmethod
    def normalize_subsets(cls, subsets: List[List[int]]) -> List[List[int]]:
        if len(subsets) < 1:
            raise ValueError("design needs at least one subset (k >= 1)")
        normalized = []
        for subset in subsets:
            if len(subset) == 0:
                raise ValueError("empty subset is not allowed in a design")
            if any(i < 1 for i in subset):
                raise ValueError(f"subset indices are 1-based, got {subset}")
            normalized.append(sorted(set(subset)))
        return normalized

    @property
    def k(self) -> int:
        return len(self.subsets)

    def check_inputs(self, p: int):
        """
        入力次元 p に対して全ての番号が 1..p にあるか検証

        Args:
            p: 入力変数の個数
        """
        for subset in self.subsets:
            if max(subset) > p:
                raise DesignError(f"subset {subset} refers to inputs beyond p={p}")

    def labels(self) -> List[str]:
        """部分集合を "1,3" 形式の文字列で返す"""
        return [",".join(str(i) for i in subset) for subset in self.subsets]

    def index_of(self, subset: List[int]) -> int:
        """部分集合の列番号（存在しない場合は -1）"""
        key = sorted(set(subset))
        for j, existing in enumerate(self.subsets):
            if existing == key:
                return j
        return -1


class ModelSpec(BaseModel):
    """
    ブラックボックスモデル
    evaluator は (N, p) 配列を受け取り長さ N の出力を返す純粋関数
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str = Field(default="custom", description="モデル名")
    inputs: List[InputDistribution] = Field(..., description="p個の入力分布")
    evaluator: Callable[[np.ndarray], np.ndarray] = Field(..., description="行ごとの評価関数")

    @field_validator("inputs")
    @classmethod
    def check_inputs(cls, inputs: List[InputDistribution]) -> List[InputDistribution]:
        if len(inputs) < 1:
            raise ValueError("model needs at least one input (p >= 1)")
        return inputs

    @property
    def p(self) -> int:
        return len(self.inputs)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """
        入力行列を評価

        Args:
            x: (N, p) 配列

        Returns:
            長さ N の出力配列
        """
        return np.asarray(self.evaluator(x), dtype=float).reshape(x.shape[0])


class PickFreezeSample(BaseModel):
    """
    pick-freezeサンプル
    y は N 個の基底評価、y_u の第 j 列は X^{u_j} での評価
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    y: np.ndarray = Field(..., description="基底評価 Y_i")
    y_u: np.ndarray = Field(..., description="複製評価 Y_i^{u_j}（N×k）")
    design: Design = Field(..., description="生成に用いた計画")
    seed: int = Field(..., description="乱数シード")
    model_name: str = Field(default="custom", description="モデル名")

    @model_validator(mode="after")
    def check_shapes(self) -> "PickFreezeSample":
        y = np.array(self.y, dtype=float)
        y_u = np.array(self.y_u, dtype=float)
        if y.ndim != 1:
            raise ValueError("y must be one-dimensional")
        if y_u.ndim == 1:
            y_u = y_u.reshape(-1, 1)
        if y.shape[0] < 2:
            raise ValueError(f"sample needs N >= 2 rows, got {y.shape[0]}")
        if y_u.shape != (y.shape[0], self.design.k):
            raise ValueError(f"y_u shape {y_u.shape} does not match (N, k)=({y.shape[0]}, {self.design.k})")
        y.setflags(write=False)
        y_u.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "y_u", y_u)
        return self

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def k(self) -> int:
        return self.design.k

    def column(self, subset: List[int]) -> np.ndarray:
        """
        部分集合に対応する複製列を取得

        Args:
            subset: 1始まりの入力番号リスト

        Returns:
            長さ N の配列
        """
        j = self.design.index_of(subset)
        if j < 0:
            raise DesignError(f"subset {subset} is not part of the sample design {self.design.subsets}")
        return self.y_u[:, j]

    def restrict(self, subsets: List[List[int]]) -> "PickFreezeSample":
        """
        指定した部分集合の列だけを持つサンプルを作成
        """
        columns = [self.column(s) for s in subsets]
        return PickFreezeSample(
            y=self.y,
            y_u=np.column_stack(columns),
            design=Design(subsets=subsets),
            seed=self.seed,
            model_name=self.model_name,
        )

    def shifted(self, c: float) -> "PickFreezeSample":
        """全ての出力に定数 c を加えたサンプル"""
        return PickFreezeSample(
            y=self.y + c,
            y_u=self.y_u + c,
            design=self.design,
            seed=self.seed,
            model_name=self.model_name,
        )
