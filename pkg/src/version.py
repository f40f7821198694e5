"""
バージョン情報

アプリケーション全体で共有するバージョン定数
"""
import subprocess
from pathlib import Path

VERSION = "1.0.0"


def describe_version() -> str:
    """
    git describe 形式のバージョン文字列を取得

    出力ファイルに埋め込むため、gitが利用できない場合は
    VERSION定数から組み立てた文字列を返す

    Returns:
        バージョン文字列（例: "v1.0.0-3-gabc1234"）
    """
    repo_root = Path(__file__).resolve().parent.parent
    try:
        result = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=repo_root,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return f"v{VERSION}"
    described = result.stdout.strip()
    if result.returncode != 0 or not described:
        return f"v{VERSION}"
    # タグなしリポジトリではハッシュのみが返るためVERSIONを前置する
    if not described.startswith("v"):
        return f"v{VERSION}-g{described}"
    return described
