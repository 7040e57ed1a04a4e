import hashlib
import logging
import math
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from config.settings import SplitConfig
from data.loader import save_manifest
from data.models import UtteranceRecord, strip_markers

logger = logging.getLogger(__name__)

SPLITS_DIR = "splits"

# 训练数据条件 -> (只含保留语句, 带韵律标点)
VARIANTS: Dict[str, Tuple[bool, bool]] = {
    "baseline": (False, False),
    "us": (True, False),
    "punc": (False, True),
    "punc_us": (True, True),
}


def _split_key(record: UtteranceRecord) -> Tuple[str, str]:
    return hashlib.md5(record.id.encode('utf-8')).hexdigest(), record.id


def _unpunctuated(record: UtteranceRecord) -> UtteranceRecord:
    return replace(record, norm_tokens=tuple(strip_markers(record.norm_tokens)))


def variant_records(records: Sequence[UtteranceRecord], variant: str = "punc_us") -> List[UtteranceRecord]:
    """某一训练条件下的语句（processing_error 的语句始终排除）"""
    if variant not in VARIANTS:
        raise ValueError(f"未知的数据条件: {variant}（可选 {', '.join(VARIANTS)}）")
    kept_only, punctuated = VARIANTS[variant]
    selected = [r for r in records if not r.failed and (r.verdict.kept or not kept_only)]
    if punctuated:
        return selected
    return [_unpunctuated(r) for r in selected]


def split_dataset(records: Sequence[UtteranceRecord], cfg: SplitConfig = None, variant: str = "punc_us"
                  ) -> Tuple[List[UtteranceRecord], List[UtteranceRecord], List[UtteranceRecord]]:
    """把某一训练条件的语句确定性地划分为 (train, val, test)

    测试集由保留语句按 id 的 md5 排序后的前 test_count 条组成，各条件共用同一测试集
    （去掉标点标记）；其余语句取 floor(val_fraction × 剩余数) 条为验证集。
    """
    cfg = cfg or SplitConfig()
    kept = sorted((r for r in records if r.verdict.kept), key=_split_key)
    test_ids = {r.id for r in kept[:cfg.test_count]}

    pool = sorted(variant_records(records, variant), key=_split_key)
    test = [_unpunctuated(r) for r in pool if r.id in test_ids]
    rest = [r for r in pool if r.id not in test_ids]
    n_val = int(math.floor(round(cfg.val_fraction * len(rest), 9)))
    val, train = rest[:n_val], rest[n_val:]

    if len(kept) < cfg.test_count:
        logger.warning(f"保留语句只有 {len(kept)} 条，不足测试集所需的 {cfg.test_count} 条")
    logger.info(f"数据划分 {variant}：train {len(train)} / val {len(val)} / test {len(test)}")
    return train, val, test


def write_split(records: Sequence[UtteranceRecord], out_dir, cfg: SplitConfig = None,
                variants: Sequence[str] = tuple(VARIANTS)) -> Dict[str, Dict[str, int]]:
    """写出 splits/<条件>/{train,val,test}.tsv，返回各文件的行数"""
    out_dir = Path(out_dir)
    counts = {}
    for variant in variants:
        train, val, test = split_dataset(records, cfg, variant)
        target = out_dir / SPLITS_DIR / variant
        counts[variant] = {
            name: save_manifest(part, target / f"{name}.tsv")
            for name, part in (("train", train), ("val", val), ("test", test))
        }
    return counts
