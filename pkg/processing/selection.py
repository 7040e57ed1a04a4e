import logging
import math
from dataclasses import replace
from typing import Dict, List, Sequence

from config.settings import SelectionConfig
from data.models import ALL_REASONS, UtteranceRecord
from utils.exceptions import UtteranceError

logger = logging.getLogger(__name__)


def apply_wer_filter(records: Sequence[UtteranceRecord], cfg: SelectionConfig = None) -> List[UtteranceRecord]:
    """WER 严格大于 max_wer 的语句加上 wer_filter 原因"""
    cfg = cfg or SelectionConfig()
    result = []
    for record in records:
        if record.failed:
            result.append(record)
            continue
        if record.metrics is None:
            raise UtteranceError(record.id, "缺少指标，请先运行 metrics")
        if record.metrics.wer > cfg.max_wer:
            record = record.reject("wer_filter")
        result.append(record)
    return result


def rejection_count(n_kept: int, fraction: float) -> int:
    # 先舍入再取整，避免 0.05 * 100 这类浮点误差
    return int(math.floor(round(fraction * n_kept, 9)))


def apply_percentile_rejection(records: Sequence[UtteranceRecord], cfg: SelectionConfig = None) -> List[UtteranceRecord]:
    """四个指标各自独立剔除当前保留语句中最差的 reject_fraction

    排名只看当前保留（无任何原因）的语句；同值时 id 较大者先被剔除。
    一条语句可以累积多个原因。
    """
    cfg = cfg or SelectionConfig()
    candidates = [r for r in records if r.verdict.kept]
    for record in candidates:
        if record.metrics is None:
            raise UtteranceError(record.id, "缺少指标，请先运行 metrics")

    k = rejection_count(len(candidates), cfg.reject_fraction)
    added: Dict[str, List[str]] = {r.id: [] for r in candidates}
    if k > 0:
        for metric in sorted(cfg.metric_directions):
            ranked = sorted(
                candidates,
                key=lambda r: (r.metrics.metric_value(metric), r.id),
                reverse=True,
            )
            for record in ranked[:k]:
                added[record.id].append(metric)
            logger.debug(f"{metric}: 剔除 {[r.id for r in ranked[:k]]}")

    logger.info(f"逐指标剔除：{len(candidates)} 条参与排名，每个指标剔除 {k} 条")

    result = []
    for record in records:
        for reason in added.get(record.id, ()):
            record = record.reject(reason)
        result.append(record)
    return result


def select(records: Sequence[UtteranceRecord], cfg: SelectionConfig = None) -> List[UtteranceRecord]:
    """先 WER 过滤，再逐指标剔除；重复运行时先清掉上一次的筛选原因"""
    cfg = cfg or SelectionConfig()
    fresh = [
        r if r.failed else replace(r, verdict=replace(r.verdict, reasons=frozenset(), diagnostic=None))
        for r in records
    ]
    return apply_percentile_rejection(apply_wer_filter(fresh, cfg), cfg)


def selection_summary(records: Sequence[UtteranceRecord]) -> dict:
    by_reason = {reason: 0 for reason in sorted(ALL_REASONS)}
    for record in records:
        for reason in record.verdict.reasons:
            by_reason[reason] += 1
    kept = sum(1 for r in records if r.verdict.kept)
    return {
        "total": len(records),
        "kept": kept,
        "rejected": len(records) - kept,
        "by_reason": by_reason,
    }
