"""
複製実行モジュール

複製（モンテカルロの繰り返し）をスレッドプールで並列に実行する
各複製は番号から導出したシードのみを使うため、結果はスレッド数に依存しない
"""
import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from src.core.config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class ReplicateRunner:
    """
    複製の並列実行クラス
    セマフォで同時実行数を制限し、結果は投入順に返す
    """

    def __init__(self, threads: Optional[int] = None):
        """
        初期化

        Args:
            threads: ワーカースレッド数（未指定時は設定値）
        """
        self.threads = max(1, threads or settings.threads)

    async def _run(self, fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
        semaphore = asyncio.Semaphore(self.threads)
        loop = asyncio.get_running_loop()

        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            async def run_one(index: int, item: T) -> R:
                async with semaphore:
                    logger.debug(f"[REPLICATE] start index={index}")
                    return await loop.run_in_executor(executor, fn, item)

            return await asyncio.gather(*(run_one(i, item) for i, item in enumerate(items)))

    def map(self, fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
        """
        各要素に fn を適用

        Args:
            fn: 複製1回分の処理（純粋関数）
            items: 入力（通常は複製番号）

        Returns:
            items と同じ順序の結果リスト
        """
        items = list(items)
        if not items:
            return []
        if self.threads == 1:
            return [fn(item) for item in items]
        logger.debug(f"[REPLICATE] running {len(items)} replicates on {self.threads} threads")
        return list(asyncio.run(self._run(fn, items)))
