"""
Pick-Freeze Sobol Toolkit - コマンドラインアプリケーション

閉Sobol指数の推定、信頼区間、検定、検出力曲線、
集中不等式の上界、Berry-Esseen の被覆区間を計算する
"""
import argparse
import logging
import sys
from typing import List, Optional

from src.cli import estimate, sweeps, test
from src.cli.common import EXIT_CONFIG, run_command
from src.core.config import settings
from src.version import VERSION

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    """
    サブコマンド付きの引数パーサーを作成
    """
    parser = argparse.ArgumentParser(
        prog="pickfreeze",
        description="Pick-freeze estimation, tests and finite-sample bounds for closed Sobol indices",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # サブコマンドの登録
    estimate.add_parser(subparsers)
    test.add_parser(subparsers)
    sweeps.add_parsers(subparsers)
    return parser


def configure_logging(level: Optional[str]):
    """
    ロギング設定（出力は標準エラー、結果ファイルには書かない）
    """
    level_name = (level or settings.log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )


def main(argv: Optional[List[str]] = None) -> int:
    """
    エントリポイント

    Args:
        argv: コマンドライン引数（Noneなら sys.argv）

    Returns:
        終了コード（0: 成功、2: 設定エラー、3: 数値エラー）
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse の使い方エラーも設定エラーとして扱う
        return EXIT_CONFIG if e.code else 0

    configure_logging(args.log_level)
    logger.info(f"Pick-freeze toolkit {VERSION}: {args.command}")
    return run_command(args.handler, args)


if __name__ == "__main__":
    sys.exit(main())
