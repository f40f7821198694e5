"""
pick-freezeサンプリングモジュール

入力分布からの生成、X^u 複製（u の座標を固定し残りを独立に再生成）、
モデル評価を行い PickFreezeSample を作成する
"""
import logging
import zlib
from typing import Iterable, List, Optional, Union

import numpy as np

from src.core.config import settings
from src.core.errors import DesignError, ParameterError
from src.models.sample import Design, InputDistribution, ModelSpec, PickFreezeSample

logger = logging.getLogger(__name__)

SeedKey = Union[int, str]


def _key_to_int(key: SeedKey) -> int:
    """シード導出用のキーを非負整数に変換"""
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    if key < 0:
        raise ParameterError(f"seed keys must be nonnegative, got {key}")
    return int(key)


def check_seed(seed: int) -> int:
    """
    シードを検証

    Args:
        seed: 乱数シード

    Returns:
        検証済みシード
    """
    if seed is None or int(seed) < 0:
        raise ParameterError(f"seed must be a nonnegative integer, got {seed}")
    return int(seed)


def derive_seed(seed: int, *keys: SeedKey) -> int:
    """
    (seed, keys...) から独立なサブストリーム用の64bitシードを導出

    スケジューリング順序によらず同じキーからは同じシードが得られる

    Args:
        seed: 親シード
        *keys: ストリームタグや複製番号

    Returns:
        導出されたシード
    """
    entropy = [check_seed(seed)] + [_key_to_int(k) for k in keys]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 32 | int(state[1])) & (2 ** 63 - 1)


def block_rng(seed: int, block: int) -> np.random.Generator:
    """行ブロック block 用の乱数生成器"""
    return np.random.default_rng(np.random.SeedSequence([check_seed(seed), block]))


def sample_input(dist: InputDistribution, rng: np.random.Generator) -> float:
    """
    入力分布から1つ値を生成

    Args:
        dist: 入力分布
        rng: 乱数生成器

    Returns:
        生成値
    """
    return float(dist.sample(rng, 1)[0])


def union_design(*designs: Optional[Design]) -> Design:
    """
    複数の計画の部分集合を重複なく登場順に結合

    Args:
        *designs: 計画（Noneは無視）

    Returns:
        結合した計画
    """
    subsets: List[List[int]] = []
    for design in designs:
        if design is None:
            continue
        for subset in design.subsets:
            if subset not in subsets:
                subsets.append(subset)
    if not subsets:
        raise DesignError("union of designs is empty")
    return Design(subsets=subsets)


def _generate_block(
    inputs: List[InputDistribution],
    frozen: List[Iterable[int]],
    rows: int,
    rng: np.random.Generator,
):
    """
    1ブロック分の基底入力と複製入力を生成

    乱数の消費順序: 基底の各列、続いて計画の各部分集合について固定されない列を順に
    """
    base = np.column_stack([dist.sample(rng, rows) for dist in inputs])
    replicas = []
    for subset in frozen:
        x = base.copy()
        keep = set(subset)
        for i, dist in enumerate(inputs):
            if i + 1 not in keep:
                x[:, i] = dist.sample(rng, rows)
        replicas.append(x)
    return base, replicas


def generate_pick_freeze(
    model: ModelSpec,
    design: Design,
    n: int,
    seed: int,
    block_rows: Optional[int] = None,
) -> PickFreezeSample:
    """
    pick-freezeサンプルを生成

    行は block_rows 行ずつのブロックに分割され、ブロック b は
    SeedSequence([seed, b]) の乱数列のみを使う

    Args:
        model: ブラックボックスモデル
        design: 計画 u
        n: サンプルサイズ
        seed: 乱数シード
        block_rows: ブロックの行数（未指定時は設定値）

    Returns:
        PickFreezeSample
    """
    if n < 2:
        raise DesignError(f"pick-freeze sample needs n >= 2, got {n}")
    seed = check_seed(seed)
    design.check_inputs(model.p)
    block_rows = block_rows or settings.block_rows

    logger.debug(f"[GENERATE] model={model.name}, design={design.labels()}, n={n}, seed={seed}")

    bases = []
    replica_blocks: List[List[np.ndarray]] = [[] for _ in range(design.k)]
    for block, start in enumerate(range(0, n, block_rows)):
        rows = min(block_rows, n - start)
        base, replicas = _generate_block(model.inputs, design.subsets, rows, block_rng(seed, block))
        bases.append(base)
        for j, x in enumerate(replicas):
            replica_blocks[j].append(x)

    y = model.evaluate(np.vstack(bases))
    y_u = np.column_stack([model.evaluate(np.vstack(blocks)) for blocks in replica_blocks])

    return PickFreezeSample(y=y, y_u=y_u, design=design, seed=seed, model_name=model.name)
