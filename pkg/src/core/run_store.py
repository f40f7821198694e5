"""
実行結果の保存モジュール

結果の行をCSV（既定）またはJSONで書き出す
CSVは先頭に "# key=value" のコメント行としてメタデータを持つ
"""
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from src.models.run import OutputFormat, RunMetadata

logger = logging.getLogger(__name__)


def _format_cell(value: Any) -> str:
    """floatはrepr（往復可能な最短表現）、Noneは空文字"""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class RunStore:
    """
    結果ファイルの書き出しクラス
    """

    def __init__(self, out: Optional[str] = None, output_format: OutputFormat = OutputFormat.CSV):
        """
        初期化

        Args:
            out: 出力パス（Noneなら標準出力）
            output_format: csv または json
        """
        self.out = Path(out) if out else None
        self.output_format = OutputFormat(output_format)

    def render(self, metadata: RunMetadata, rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> str:
        """
        出力ファイルの内容を文字列として組み立てる

        Args:
            metadata: メタデータ
            rows: 結果の行
            columns: 列名（順序を固定）

        Returns:
            ファイル内容
        """
        if self.output_format == OutputFormat.JSON:
            document = {
                "metadata": metadata.model_dump(mode="json"),
                "rows": [{column: row.get(column) for column in columns} for row in rows],
            }
            return json.dumps(document, indent=2, ensure_ascii=False, sort_keys=False) + "\n"

        buffer = io.StringIO()
        buffer.write(f"# seed={metadata.seed}\n")
        buffer.write(f"# version={metadata.version}\n")
        buffer.write(f"# command={metadata.command.value}\n")
        buffer.write(f"# config={json.dumps(metadata.config, sort_keys=True, ensure_ascii=False)}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row.get(column)) for column in columns])
        return buffer.getvalue()

    def write(self, metadata: RunMetadata, rows: Sequence[Dict[str, Any]], columns: Sequence[str]):
        """
        結果を書き出す

        Args:
            metadata: メタデータ
            rows: 結果の行
            columns: 列名
        """
        content = self.render(metadata, rows, columns)
        if self.out is None:
            sys.stdout.write(content)
            return

        self.out.parent.mkdir(parents=True, exist_ok=True)
        with open(self.out, 'w', encoding='utf-8', newline='') as f:
            f.write(content)
        logger.info(f"[STORE] wrote {len(rows)} rows to {self.out}")


def read_csv_rows(path: str) -> List[Dict[str, str]]:
    """
    RunStoreが書いたCSVを読み込む（コメント行は読み飛ばす）

    Args:
        path: ファイルパス

    Returns:
        行の辞書のリスト（値は文字列）
    """
    with open(path, 'r', encoding='utf-8') as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))
