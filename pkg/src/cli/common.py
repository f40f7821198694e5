"""
CLI共通処理モジュール

引数の解析、設定の検証、モデルの読み込み、結果の書き出し、
例外から終了コードへの変換をサブコマンド間で共有する
"""
import argparse
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from pydantic import ValidationError

from src.core.benchmarks import AnalyticModel, get_model, model_from_config
from src.core.config import ModelConfigFile, settings
from src.core.errors import ConfigError, DesignError, NumericalError, ParameterError
from src.core.run_store import RunStore
from src.core.runner import ReplicateRunner
from src.models.run import CommandKind, RunConfig, RunMetadata
from src.models.sample import Design
from src.version import describe_version

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


# ---- 引数の型 ----

def parse_subset(text: str) -> List[int]:
    """'1,3' → [1, 3]"""
    try:
        subset = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid subset '{text}' (expected e.g. 1,3)")
    if not subset:
        raise argparse.ArgumentTypeError("subset must not be empty")
    return subset


def parse_int_list(text: str) -> List[int]:
    """'1000,4000' → [1000, 4000]"""
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list '{text}'")


def parse_float_list(text: str) -> List[float]:
    """'1,-1' → [1.0, -1.0]"""
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number list '{text}'")


def parse_grid(text: str) -> List[float]:
    """
    格子 'start:stop:step'（端点を含む）またはカンマ区切りの値

    Args:
        text: 格子の指定

    Returns:
        値のリスト
    """
    if ":" not in text:
        return parse_float_list(text)
    try:
        start, stop, step = (float(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid '{text}' (expected start:stop:step)")
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"grid '{text}' needs step > 0 and stop >= start")
    count = int((stop - start) / step + 1e-9) + 1
    # 浮動小数点の累積誤差を出力に残さない
    return [round(start + i * step, 12) for i in range(count)]


def add_common_arguments(parser: argparse.ArgumentParser):
    """全サブコマンド共通の引数"""
    parser.add_argument("--model", required=True, help="benchmark name or model config entry")
    parser.add_argument("--model-config", dest="model_config", default=None, help="model definition JSON file")
    parser.add_argument("--seed", type=int, default=None, help="random seed (fallback: PICKFREEZE_SEED)")
    parser.add_argument("--threads", type=int, default=None, help="worker threads")
    parser.add_argument("--out", default=None, help="output path (default: stdout)")
    parser.add_argument("--format", choices=["csv", "json"], default="csv", help="output format")
    parser.add_argument("--log-level", dest="log_level", default=None, help="logging level")


def add_design_arguments(parser: argparse.ArgumentParser, paired: bool = False):
    """部分集合の引数（--u、必要なら --v/--w）"""
    parser.add_argument("--u", action="append", type=parse_subset, default=[], help="subset, e.g. 1,3 (repeatable)")
    if paired:
        parser.add_argument("--v", action="append", type=parse_subset, default=[], help="left side of S^v = S^w")
        parser.add_argument("--w", action="append", type=parse_subset, default=[], help="right side of S^v = S^w")


# ---- 設定とモデル ----

def resolve_seed(seed: Optional[int]) -> int:
    """--seed、PICKFREEZE_SEED、0 の順に解決"""
    if seed is not None:
        return seed
    if settings.seed is not None:
        return settings.seed
    logger.info("[CONFIG] no seed given, using 0")
    return 0


def config_subsets(model: str, model_config: Optional[str]) -> List[List[int]]:
    """モデル定義ファイルの既定の部分集合（ファイルがなければ空）"""
    path = model_config or settings.model_config_file
    if model_config is None and not Path(path).exists():
        return []
    return ModelConfigFile(path).get_subsets(model)


def build_config(command: CommandKind, args: argparse.Namespace, **extra: Any) -> RunConfig:
    """
    解析済みの引数から RunConfig を作成

    Args:
        command: サブコマンド
        args: argparse の結果
        extra: サブコマンド固有のフィールド

    Returns:
        検証済みの RunConfig
    """
    u = getattr(args, "u", [])
    # 検出力曲線はモデル族の既定の検定問題を使う
    if not u and not getattr(args, "v", []) and command != CommandKind.POWER:
        u = config_subsets(args.model, args.model_config)
    fields: Dict[str, Any] = {
        "command": command,
        "model": args.model,
        "model_config_file": args.model_config,
        "u": u,
        "v": getattr(args, "v", []),
        "w": getattr(args, "w", []),
        "seed": resolve_seed(args.seed),
        "threads": args.threads,
        "block_rows": settings.block_rows,
        "null_draws": settings.null_draws,
        "reference_n": settings.reference_n,
        "out": args.out,
        "format": args.format,
    }
    fields.update({key: value for key, value in extra.items() if value is not None})
    return RunConfig(**fields)


def load_model(cfg: RunConfig) -> AnalyticModel:
    """
    モデル名を解決（定義ファイルがあればそのエントリ、なければベンチマーク名）

    Args:
        cfg: 実行設定

    Returns:
        AnalyticModel
    """
    path = cfg.model_config_file or settings.model_config_file
    if cfg.model_config_file is None and not Path(path).exists():
        logger.debug(f"[MODEL] {path} not found, resolving {cfg.model} as a benchmark name")
        return get_model(cfg.model)
    return model_from_config(ModelConfigFile(path), cfg.model)


def design_of(subsets: Sequence[Sequence[int]]) -> Optional[Design]:
    """空なら None"""
    return Design(subsets=[list(s) for s in subsets]) if subsets else None


def make_runner(cfg: RunConfig) -> ReplicateRunner:
    return ReplicateRunner(cfg.threads)


def emit(cfg: RunConfig, rows: Sequence[Dict[str, Any]], columns: Sequence[str]):
    """
    結果をメタデータ付きで書き出す

    Args:
        cfg: 実行設定
        rows: 結果の行
        columns: 列名
    """
    metadata = RunMetadata(
        command=cfg.command,
        seed=cfg.seed,
        version=describe_version(),
        config=cfg.echo(),
    )
    RunStore(cfg.out, cfg.format).write(metadata, rows, columns)


# ---- 終了コード ----

def run_command(handler: Callable[[argparse.Namespace], int], args: argparse.Namespace) -> int:
    """
    サブコマンドを実行し、例外を終了コードに変換

    Args:
        handler: サブコマンドの処理
        args: argparse の結果

    Returns:
        0: 成功、2: 設定エラー、3: 数値エラー
    """
    try:
        return handler(args)
    except (ValidationError, ConfigError, ParameterError, DesignError) as e:
        logger.error(f"[CLI] configuration error: {e}")
        return EXIT_CONFIG
    except NumericalError as e:
        logger.error(f"[CLI] numerical error: {e}")
        return EXIT_NUMERICAL
