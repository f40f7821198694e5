"""
実行設定のデータモデル

CLIの各サブコマンドの設定と、出力ファイルに埋め込むメタデータを定義
"""
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.results import BoundVariant, EstimatorKind, StatisticKind


class CommandKind(str, Enum):
    """サブコマンド"""
    ESTIMATE = "estimate"
    TEST = "test"
    POWER = "power"
    CONCENTRATION = "concentration"
    BERRY = "berry"


class OutputFormat(str, Enum):
    """出力形式"""
    CSV = "csv"
    JSON = "json"


class RunConfig(BaseModel):
    """
    1回のCLI実行の設定
    計算を始める前に検証し、出力ファイルにそのまま書き出す
    """
    model_config = ConfigDict(frozen=True, protected_namespaces=())

    command: CommandKind = Field(..., description="サブコマンド")
    model: str = Field(..., description="モデル名（ベンチマーク名または定義ファイルのエントリ）")
    model_config_file: Optional[str] = Field(None, description="モデル定義ファイル")
    u: List[List[int]] = Field(default_factory=list, description="部分集合 u の列")
    v: List[List[int]] = Field(default_factory=list, description="等号検定の左辺 v の列")
    w: List[List[int]] = Field(default_factory=list, description="等号検定の右辺 w の列")
    n: List[int] = Field(default_factory=list, description="サンプルサイズ（掃引では複数）")
    reps: Optional[int] = Field(None, gt=0, description="複製数")
    repetitions: int = Field(default=1, gt=0, description="水準推定の繰り返し回数")
    seed: int = Field(..., ge=0, description="乱数シード")
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0, description="有意水準")
    level: Optional[float] = Field(None, gt=0.0, lt=1.0, description="信頼水準")
    estimator: EstimatorKind = Field(default=EstimatorKind.S, description="推定量")
    stat: StatisticKind = Field(default=StatisticKind.LINEAR, description="検定統計量")
    coefficients: Optional[List[float]] = Field(None, description="線形形式 A")
    sigma0: Optional[float] = Field(None, gt=0.0, description="帰無仮説の下の座標ごとの標準偏差")
    shift: float = Field(default=0.0, description="片側検定の右辺")
    grid: List[float] = Field(default_factory=list, description="掃引する格子（λ1 または y）")
    variant: BoundVariant = Field(default=BoundVariant.S, description="集中不等式の推定量")
    b: Optional[str] = Field(None, description="|Y| の上界（数値または 'estimate'）")
    always_include_mean_term: bool = Field(default=False, description="T の below 側で常に平均の項を含めるか")
    mu: Optional[float] = Field(None, description="中心化ケースの既知の平均")
    scale: str = Field(default="sigma", description="Berry-Esseen の半幅の種類")
    block_rows: int = Field(default=4096, gt=0, description="乱数ブロックの行数（結果に影響する）")
    null_draws: int = Field(default=100_000, gt=0, description="帰無分布の模擬回数")
    reference_n: int = Field(default=1_000_000, gt=1, description="参照値の推定に使うサンプルサイズ")
    threads: Optional[int] = Field(None, gt=0, description="ワーカースレッド数")
    out: Optional[str] = Field(None, description="出力パス（未指定時は標準出力）")
    format: OutputFormat = Field(default=OutputFormat.CSV, description="出力形式")

    @model_validator(mode="after")
    def check_run(self) -> "RunConfig":
        if any(value < 2 for value in self.n):
            raise ValueError(f"every n must be >= 2, got {self.n}")
        if len(self.v) != len(self.w):
            raise ValueError(f"--v and --w must be paired, got {len(self.v)} and {len(self.w)}")
        if self.command in (CommandKind.ESTIMATE, CommandKind.TEST) and len(self.n) != 1:
            raise ValueError(f"{self.command.value} needs exactly one --n, got {self.n}")
        if self.command in (CommandKind.CONCENTRATION, CommandKind.BERRY) and len(self.u) != 1:
            raise ValueError(f"{self.command.value} needs exactly one --u subset")
        if self.command == CommandKind.POWER and not self.grid:
            raise ValueError("power needs a --grid of lambda1 values")
        if self.command == CommandKind.CONCENTRATION and not self.grid:
            raise ValueError("concentration needs a --grid of deviations y")
        if self.scale not in ("sigma", "sigma2"):
            raise ValueError(f"scale must be 'sigma' or 'sigma2', got {self.scale}")
        return self

    def echo(self) -> Dict[str, Any]:
        """出力ファイル用の設定（出力先は含めない）"""
        return self.model_dump(mode="json", exclude={"out", "threads"})


class RunMetadata(BaseModel):
    """
    出力ファイルのメタデータ
    時刻は含めないため、同じ設定の再実行はバイト単位で一致する
    """
    command: CommandKind = Field(..., description="サブコマンド")
    seed: int = Field(..., description="乱数シード")
    version: str = Field(..., description="git describe 形式のバージョン")
    config: Dict[str, Any] = Field(..., description="設定のエコー")
