"""
設定管理モジュール

環境変数からアプリケーション設定を読み込む
モデル定義ファイル（models.json）の管理
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Optional

import psutil
from pydantic import Field
from pydantic_settings import BaseSettings

from src.core.errors import ConfigError


def _default_threads() -> int:
    """物理コア数（取得できない場合は1）"""
    return psutil.cpu_count(logical=False) or 1


class Settings(BaseSettings):
    """
    アプリケーション設定
    環境変数から設定を読み込む
    """

    # 基本設定
    log_level: str = "INFO"
    model_config_file: str = "config/models.json"
    output_dir: str = "."

    # 乱数設定（PICKFREEZE_SEED はCLIの --seed 未指定時のフォールバック）
    seed: Optional[int] = None
    block_rows: int = Field(default=4096, gt=0)

    # ワーカープール設定
    threads: int = Field(default_factory=_default_threads, gt=0)

    # 数値設定
    null_draws: int = Field(default=100_000, gt=0)
    reference_n: int = Field(default=1_000_000, gt=1)

    class Config:
        env_prefix = "PICKFREEZE_"
        case_sensitive = False
        protected_namespaces = ()


class ModelConfigFile:
    """
    モデル定義ファイル管理
    models.jsonからモデルと部分集合の設定を読み込む
    """

    def __init__(self, config_file: str):
        """
        初期化

        Args:
            config_file: 設定ファイルパス
        """
        self.config_file = config_file
        self._config: Dict[str, Any] = {}
        self._load_config()

    def _load_config(self):
        """
        設定ファイルを読み込む
        """
        config_path = Path(self.config_file)

        if not config_path.exists():
            raise ConfigError(f"Model config file not found: {self.config_file}")

        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in model config file {self.config_file}: {e}") from e

        if not isinstance(data, dict) or "models" not in data:
            raise ConfigError("Model config file must have 'models' key")

        self._config = data["models"]

    def get_model_config(self, name: str) -> Optional[Dict[str, Any]]:
        """
        特定のモデルの設定を取得

        Args:
            name: モデル名（例: "ishigami"）

        Returns:
            モデル設定辞書、存在しない場合はNone
        """
        return self._config.get(name)

    def list_models(self) -> List[str]:
        """
        定義済みモデル名のリストを取得

        Returns:
            モデル名のリスト
        """
        return list(self._config.keys())

    def is_table(self, name: str) -> bool:
        """
        離散テーブルモデルかチェック

        Args:
            name: モデル名

        Returns:
            テーブルモデルの場合True
        """
        config = self.get_model_config(name)
        if not config:
            return False
        return config.get("kind", "benchmark") == "table"

    def get_benchmark(self, name: str) -> str:
        """
        参照するベンチマーク名を取得（未指定時はモデル名そのもの）
        """
        config = self.get_model_config(name) or {}
        return config.get("benchmark", name)

    def get_params(self, name: str) -> Dict[str, Any]:
        """
        ベンチマークのパラメータを取得

        Args:
            name: モデル名

        Returns:
            パラメータ辞書（デフォルト: 空）
        """
        config = self.get_model_config(name)
        if not config:
            return {}
        return config.get("params", {})

    def get_subsets(self, name: str) -> List[List[int]]:
        """
        既定の部分集合リスト（--u 未指定時に使用）

        Args:
            name: モデル名

        Returns:
            1始まりの入力番号リストのリスト（デフォルト: 空）
        """
        config = self.get_model_config(name)
        if not config:
            return []
        return config.get("subsets", [])

    def get_inputs(self, name: str) -> Optional[List[Dict[str, Any]]]:
        """
        入力分布の上書き指定を取得

        Args:
            name: モデル名

        Returns:
            分布指定のリスト、指定がない場合はNone
        """
        config = self.get_model_config(name)
        if not config:
            return None
        return config.get("inputs")


# グローバル設定インスタンス
settings = Settings()
