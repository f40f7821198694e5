"""
ベンチマークモデルモジュール

Ishigami関数、2つのガウス入力の例題、Bréguetの燃料質量モデル、
離散テーブルモデルと厳密な列挙オラクルを提供する
"""
import itertools
import logging
import math
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.errors import ConfigError, DegenerateOutputError, DesignError, ParameterError
from src.models.results import CovMatrix
from src.models.sample import InputDistribution, ModelSpec

logger = logging.getLogger(__name__)

# Bréguetモデルの固定変数の既定値（真値ではなく設定可能な値）
BREGUET_DEFAULTS = {
    "m_empty": 42600.0,  # kg
    "m_pload": 19900.0,  # kg
    "g": 9.81,  # m/s²
    "ra": 3000.0,  # km
}

Number = Union[int, float, Fraction]


def subset_key(subset: Sequence[int]) -> str:
    """部分集合を "1,3" 形式のキーに変換"""
    return ",".join(str(i) for i in sorted(set(subset)))


class DiscreteTableModel(BaseModel):
    """
    有限の台を持つ独立入力と値テーブルからなるモデル

    values は形状 (len(supports[0]), ..., len(supports[p-1])) の入れ子リスト
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    supports: List[List[float]] = Field(..., description="各入力の台（昇順）")
    probabilities: List[List[Fraction]] = Field(..., description="各入力の確率（有理数）")
    values: np.ndarray = Field(..., description="値テーブル")

    @model_validator(mode="before")
    @classmethod
    def coerce(cls, data):
        if isinstance(data, dict):
            data = dict(data)
            data["probabilities"] = [[_to_fraction(q) for q in row] for row in data.get("probabilities", [])]
            data["values"] = np.array(data.get("values"), dtype=object)
        return data

    @model_validator(mode="after")
    def check_table(self) -> "DiscreteTableModel":
        if len(self.supports) < 1 or len(self.supports) != len(self.probabilities):
            raise ValueError("table model needs one support and one pmf per input")
        shape = tuple(len(s) for s in self.supports)
        for support, pmf in zip(self.supports, self.probabilities):
            if len(support) != len(pmf) or len(support) == 0:
                raise ValueError("each support needs as many probabilities as points")
            if any(b <= a for a, b in zip(support, support[1:])):
                raise ValueError("supports must be strictly increasing")
            if any(q < 0 for q in pmf) or sum(pmf) != 1:
                raise ValueError("each pmf must be nonnegative and sum to exactly 1")
        if self.values.shape != shape:
            raise ValueError(f"value table shape {self.values.shape} does not match supports {shape}")
        if math.prod(shape) > 10 ** 6:
            raise ValueError("table models are limited to 10^6 support tuples")
        values = np.vectorize(_to_fraction, otypes=[object])(self.values)
        object.__setattr__(self, "values", values)
        return self

    @property
    def p(self) -> int:
        return len(self.supports)

    def inputs(self) -> List[InputDistribution]:
        return [
            InputDistribution.discrete(support, [float(q) for q in pmf])
            for support, pmf in zip(self.supports, self.probabilities)
        ]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """入力値を台の番号に変換してテーブルを参照"""
        index = tuple(
            np.searchsorted(np.asarray(support, dtype=float), x[:, i])
            for i, support in enumerate(self.supports)
        )
        return self.float_values()[index]

    def float_values(self) -> np.ndarray:
        return self.values.astype(float)

    def spec(self, name: str = "table") -> ModelSpec:
        return ModelSpec(name=name, inputs=self.inputs(), evaluator=self.evaluate)


def _to_fraction(value: Number) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(str(value))


class OracleResult(BaseModel):
    """
    離散モデルの厳密な列挙結果
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    subset: List[int]
    variance: Fraction = Field(..., description="Var(Y)")
    var_cond_mean: Fraction = Field(..., description="Var(E(Y|X_u))")
    cov_pick_freeze: Fraction = Field(..., description="Cov(Y, Y^u)")

    @property
    def index(self) -> Fraction:
        return self.var_cond_mean / self.variance


def discrete_oracle(table: DiscreteTableModel, subset: Sequence[int]) -> OracleResult:
    """
    離散テーブルモデルの閉Sobol指数を厳密に列挙

    Var(E(Y|X_u)) は条件付き平均から、Cov(Y, Y^u) は X と独立なコピー X' の
    組の列挙から、それぞれ別の経路で計算する

    Args:
        table: 離散テーブルモデル
        subset: 1始まりの入力番号

    Returns:
        OracleResult
    """
    frozen = sorted(set(subset))
    if not frozen or min(frozen) < 1 or max(frozen) > table.p:
        raise DesignError(f"subset {list(subset)} is not valid for p={table.p}")
    frozen0 = [i - 1 for i in frozen]
    free0 = [i for i in range(table.p) if i not in frozen0]
    ranges = [range(len(s)) for s in table.supports]

    def weight(idx, coords) -> Fraction:
        w = Fraction(1)
        for i in coords:
            w *= table.probabilities[i][idx[i]]
        return w

    all_coords = list(range(table.p))
    mean = Fraction(0)
    second = Fraction(0)
    for idx in itertools.product(*ranges):
        w = weight(idx, all_coords)
        v = table.values[idx]
        mean += w * v
        second += w * v * v
    variance = second - mean * mean
    if variance == 0:
        raise DegenerateOutputError("table model output is constant")

    # 条件付き平均 E(Y | X_u) の分散
    var_cond = Fraction(0)
    for fixed in itertools.product(*(ranges[i] for i in frozen0)):
        w_u = Fraction(1)
        conditional = Fraction(0)
        for i, j in zip(frozen0, fixed):
            w_u *= table.probabilities[i][j]
        for rest in itertools.product(*(ranges[i] for i in free0)):
            idx = _merge(frozen0, fixed, free0, rest, table.p)
            conditional += weight(idx, free0) * table.values[idx]
        var_cond += w_u * (conditional - mean) ** 2

    # Cov(Y, Y^u): Y^u は u を共有し残りを独立に取り直した値
    cross = Fraction(0)
    for idx in itertools.product(*ranges):
        w = weight(idx, all_coords)
        fixed = tuple(idx[i] for i in frozen0)
        for rest in itertools.product(*(ranges[i] for i in free0)):
            other = _merge(frozen0, fixed, free0, rest, table.p)
            cross += w * weight(other, free0) * table.values[idx] * table.values[other]
    cov = cross - mean * mean

    logger.debug(f"[ORACLE] subset={frozen}, variance={variance}, var_cond={var_cond}, cov={cov}")
    return OracleResult(subset=frozen, variance=variance, var_cond_mean=var_cond, cov_pick_freeze=cov)


def _merge(frozen0, fixed, free0, rest, p) -> tuple:
    idx = [0] * p
    for i, j in zip(frozen0, fixed):
        idx[i] = j
    for i, j in zip(free0, rest):
        idx[i] = j
    return tuple(idx)


class AnalyticModel(BaseModel):
    """
    解析的な真値を持つベンチマークモデル
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str = Field(..., description="モデル名")
    spec: ModelSpec = Field(..., description="入力分布と評価関数")
    params: Dict[str, float] = Field(default_factory=dict, description="モデルパラメータ")
    known_indices: Dict[str, float] = Field(default_factory=dict, description="部分集合キー → 閉Sobol指数")
    known_gamma: Optional[CovMatrix] = Field(None, description="単一入力の計画に対する Γ_{u,S}")
    known_mean: Optional[float] = Field(None, description="出力の平均")
    output_bound: Optional[float] = Field(None, description="|Y| の上界 b")
    table: Optional[DiscreteTableModel] = Field(None, description="離散テーブル（列挙可能な場合）")

    def __hash__(self) -> int:
        # 等しいモデルは名前とパラメータも等しい
        return hash((self.name, tuple(sorted(self.params.items()))))

    def index(self, subset: Sequence[int]) -> Optional[float]:
        """
        既知の閉Sobol指数（テーブルモデルは列挙）を取得

        Args:
            subset: 1始まりの入力番号

        Returns:
            指数値、未知の場合はNone
        """
        key = subset_key(subset)
        if key in self.known_indices:
            return self.known_indices[key]
        if self.table is not None:
            return float(discrete_oracle(self.table, subset).index)
        if key == subset_key(range(1, self.spec.p + 1)):
            return 1.0
        return None


# ---- Ishigami ----

def ishigami(x1, x2, x3, centered: bool = False, a: float = 7.0, b: float = 0.1):
    """
    Ishigami関数 sin X1 + a sin² X2 + b X3⁴ sin X1

    Args:
        x1, x2, x3: 入力（スカラーまたは配列）
        centered: 真の平均 a/2 を引く場合True
        a, b: 係数

    Returns:
        関数値
    """
    value = np.sin(x1) + a * np.sin(x2) ** 2 + b * np.asarray(x3) ** 4 * np.sin(x1)
    if centered:
        value = value - a / 2
    return value


def ishigami_partial_variances(a: float = 7.0, b: float = 0.1) -> Dict[str, float]:
    """Ishigami関数の0でない部分分散"""
    pi4 = math.pi ** 4
    pi8 = math.pi ** 8
    return {
        "1": 0.5 * (1 + b * pi4 / 5) ** 2,
        "2": a * a / 8,
        "1,3": b * b * pi8 * (1.0 / 18 - 1.0 / 50),
    }


def ishigami_model(a: float = 7.0, b: float = 0.1, centered: bool = False) -> AnalyticModel:
    """
    入力が [−π, π] 上の独立一様分布の Ishigami モデル

    Args:
        a, b: 係数
        centered: 出力を平均 a/2 で中心化するか

    Returns:
        AnalyticModel
    """
    pi4 = math.pi ** 4
    total = a * a / 8 + b * pi4 / 5 + b * b * math.pi ** 8 / 18 + 0.5
    partial = ishigami_partial_variances(a, b)
    known = {}
    for size in range(1, 4):
        for subset in itertools.combinations((1, 2, 3), size):
            closed = sum(v for key, v in partial.items() if set(map(int, key.split(","))) <= set(subset))
            known[subset_key(subset)] = closed / total

    inputs = [InputDistribution.uniform(-math.pi, math.pi) for _ in range(3)]
    spec = ModelSpec(
        name="ishigami-centered" if centered else "ishigami",
        inputs=inputs,
        evaluator=lambda x: ishigami(x[:, 0], x[:, 1], x[:, 2], centered=centered, a=a, b=b),
    )
    bound = 1 + abs(a) + abs(b) * pi4
    return AnalyticModel(
        name=spec.name,
        spec=spec,
        params={"a": a, "b": b},
        known_indices=known,
        known_mean=0.0 if centered else a / 2,
        output_bound=bound,
    )


# ---- ガウス入力の例題 ----

def _lambda2(lambda1: float) -> float:
    if not 0.0 <= 2 * lambda1 * lambda1 <= 1.0 + 1e-12:
        raise ParameterError(f"lambda1 must satisfy 0 <= 2*lambda1^2 <= 1, got {lambda1}")
    return math.sqrt(max(0.0, 1.0 - 2 * lambda1 * lambda1))


def example1_gamma(lambda1: float) -> np.ndarray:
    """
    第1の例題の推定量 S に対する Γ の閉形式（計画 ({1}, {2})）

    Args:
        lambda1: λ1

    Returns:
        2×2 行列
    """
    s = lambda1 * lambda1
    diagonal = 3 - 2 * s - 11 * s ** 2 + 24 * s ** 3 - 24 * s ** 4
    off = -7 * s ** 2 + 24 * s ** 3 - 24 * s ** 4
    return np.array([[diagonal, off], [off, diagonal]])


def example1(lambda1: float) -> AnalyticModel:
    """
    Y = λ1 X1 + λ1 X2 + λ2 X1 X2、X ~ N(0, I₂)、2λ1² + λ2² = 1

    Args:
        lambda1: λ1（λ2 はここから決まる）

    Returns:
        AnalyticModel
    """
    lambda2 = _lambda2(lambda1)
    s = lambda1 * lambda1
    spec = ModelSpec(
        name="example1",
        inputs=[InputDistribution.normal(), InputDistribution.normal()],
        evaluator=lambda x: lambda1 * x[:, 0] + lambda1 * x[:, 1] + lambda2 * x[:, 0] * x[:, 1],
    )
    return AnalyticModel(
        name="example1",
        spec=spec,
        params={"lambda1": lambda1, "lambda2": lambda2},
        known_indices={"1": s, "2": s, "1,2": 1.0},
        known_gamma=CovMatrix(entries=example1_gamma(lambda1)),
        known_mean=0.0,
    )


def example2(lambda1: float) -> AnalyticModel:
    """
    Y = λ1 (X2 + X3) + λ2 X1 X2、X ~ N(0, I₃)、2λ1² + λ2² = 1

    Args:
        lambda1: λ1（λ2 はここから決まる）

    Returns:
        AnalyticModel
    """
    lambda2 = _lambda2(lambda1)
    s = lambda1 * lambda1
    spec = ModelSpec(
        name="example2",
        inputs=[InputDistribution.normal() for _ in range(3)],
        evaluator=lambda x: lambda1 * (x[:, 1] + x[:, 2]) + lambda2 * x[:, 0] * x[:, 1],
    )
    known = {
        "1": 0.0,
        "2": s,
        "3": s,
        "1,2": s + lambda2 * lambda2,
        "1,3": s,
        "2,3": 2 * s,
        "1,2,3": 1.0,
    }
    return AnalyticModel(
        name="example2",
        spec=spec,
        params={"lambda1": lambda1, "lambda2": lambda2},
        known_indices=known,
        known_mean=0.0,
    )


# ---- Bréguet ----

def breguet(V, F, SFC, m_empty: float = BREGUET_DEFAULTS["m_empty"],
            m_pload: float = BREGUET_DEFAULTS["m_pload"],
            g: float = BREGUET_DEFAULTS["g"], ra: float = BREGUET_DEFAULTS["ra"]):
    """
    燃料質量 (M_empty + M_pload)(exp(SFC·g·Ra/(V·F)·10⁻³) − 1)

    Args:
        V: 巡航速度
        F: 揚抗比
        SFC: 燃料消費率
        m_empty, m_pload, g, ra: 固定変数

    Returns:
        燃料質量
    """
    V = np.asarray(V, dtype=float)
    F = np.asarray(F, dtype=float)
    if np.any(V <= 0) or np.any(F <= 0):
        raise ParameterError("breguet requires V > 0 and F > 0")
    value = (m_empty + m_pload) * np.expm1(np.asarray(SFC) * g * ra / (V * F) * 1e-3)
    return value if np.ndim(value) else float(value)


def breguet_model(**fixed: float) -> AnalyticModel:
    """
    入力 (V, F, SFC) の Bréguet モデル

    V ~ uniform(226, 234)、F ~ beta(7, 2) on [18.7, 19.05]、
    SFC ~ shifted-exponential(17.23, 3.45)

    Args:
        **fixed: m_empty, m_pload, g, ra の上書き

    Returns:
        AnalyticModel
    """
    unknown = set(fixed) - set(BREGUET_DEFAULTS)
    if unknown:
        raise ParameterError(f"unknown breguet parameters: {sorted(unknown)}")
    constants = {**BREGUET_DEFAULTS, **{k: float(v) for k, v in fixed.items()}}
    spec = ModelSpec(
        name="breguet",
        inputs=[
            InputDistribution.uniform(226.0, 234.0),
            InputDistribution.beta_on(7.0, 2.0, 18.7, 19.05),
            InputDistribution.shifted_exponential(17.23, 3.45),
        ],
        evaluator=lambda x: breguet(x[:, 0], x[:, 1], x[:, 2], **constants),
    )
    return AnalyticModel(name="breguet", spec=spec, params=constants)


# ---- レジストリ ----

BENCHMARKS: Dict[str, Callable[..., AnalyticModel]] = {
    "ishigami": ishigami_model,
    "example1": example1,
    "example2": example2,
    "breguet": breguet_model,
}

# λ1 をパラメータとする検出力曲線用のモデル族
FAMILIES: Dict[str, Callable[[float], AnalyticModel]] = {
    "example1": example1,
    "example2": example2,
}


def get_model(name: str, params: Optional[Dict[str, float]] = None) -> AnalyticModel:
    """
    名前とパラメータからベンチマークモデルを作成

    Args:
        name: ベンチマーク名
        params: キーワード引数

    Returns:
        AnalyticModel
    """
    factory = BENCHMARKS.get(name)
    if factory is None:
        raise ConfigError(f"Unknown model: {name} (available: {sorted(BENCHMARKS)})")
    try:
        return factory(**(params or {}))
    except TypeError as e:
        raise ConfigError(f"Invalid parameters for model {name}: {e}") from e


def table_from_config(config: Dict) -> DiscreteTableModel:
    """設定辞書から離散テーブルモデルを作成"""
    try:
        return DiscreteTableModel(
            supports=config["supports"],
            probabilities=config["probabilities"],
            values=config["values"],
        )
    except KeyError as e:
        raise ConfigError(f"table model is missing key {e}") from e


def model_from_config(model_config, name: str) -> AnalyticModel:
    """
    モデル定義ファイルのエントリからモデルを作成

    定義ファイルにないモデル名はベンチマーク名として扱う

    Args:
        model_config: ModelConfigFile
        name: モデル名

    Returns:
        AnalyticModel
    """
    entry = model_config.get_model_config(name)
    if entry is None:
        return get_model(name)

    if model_config.is_table(name):
        table = table_from_config(entry)
        return AnalyticModel(name=name, spec=table.spec(name), table=table)

    model = get_model(model_config.get_benchmark(name), model_config.get_params(name))
    overrides = model_config.get_inputs(name)
    if overrides is None:
        return model.model_copy(update={"name": name})

    inputs = [InputDistribution(**item) for item in overrides]
    if len(inputs) != model.spec.p:
        raise ConfigError(f"model {name} needs {model.spec.p} input laws, got {len(inputs)}")
    logger.info(f"[MODEL] {name}: input laws overridden, analytic values dropped")
    spec = ModelSpec(name=name, inputs=inputs, evaluator=model.spec.evaluator)
    return AnalyticModel(name=name, spec=spec, params=model.params)


# モデル族ごとの既定の検定問題と帰無仮説の下の座標ごとの標準偏差
FAMILY_PROBLEMS: Dict[str, Dict[str, List[List[int]]]] = {
    "example1": {"u": [[1], [2]]},
    "example2": {"u": [[1]], "v": [[1, 2], [1, 3]], "w": [[2], [3]]},
}
FAMILY_NULL_SIGMA0: Dict[str, float] = {
    "example1": math.sqrt(3.0),
    "example2": 1.0,
}


def get_family(name: str) -> Callable[[float], AnalyticModel]:
    """λ1 をパラメータとするモデル族を取得"""
    family = FAMILIES.get(name)
    if family is None:
        raise ConfigError(f"Model {name} has no lambda1 family (available: {sorted(FAMILIES)})")
    return family
