"""逐条语句的筛选指标

Articulation = P_signal × 平均音节时长
Non-fluency  = 最长内部静音 / 平均音节时长
另有音节时长标准差、F0 标准差与 WER。
"""
import logging
from pathlib import Path
from typing import Iterable, Sequence, Tuple

import numpy as np
import pandas as pd

from config.settings import METRIC_COLUMNS
from data.models import MetricReport, SilenceSpan, TimedToken, UtteranceRecord
from utils.exceptions import UtteranceError
from .alignment import anchored_fraction
from .audio_io import AudioClip
from .pitch import F0Track
from .vad import SegmentList, signal_power

logger = logging.getLogger(__name__)


def articulation(p_signal: float, avg_syl_dur_s: float) -> float:
    if avg_syl_dur_s <= 0:
        raise ValueError(f"平均音节时长必须为正: {avg_syl_dur_s}")
    if p_signal < 0:
        raise ValueError(f"信号功率不能为负: {p_signal}")
    return p_signal * avg_syl_dur_s


def non_fluency(silences: Sequence[SilenceSpan], avg_syl_dur_s: float) -> float:
    if avg_syl_dur_s <= 0:
        raise ValueError(f"平均音节时长必须为正: {avg_syl_dur_s}")
    if not silences:
        return 0.0
    return max(s.duration_s for s in silences) / avg_syl_dur_s


def syllable_duration_stats(tokens: Sequence[TimedToken]) -> Tuple[float, float]:
    """已对齐的非标记音节时长的均值与总体标准差"""
    durations = np.array(
        [t.duration_s for t in tokens if t.aligned and not t.syllable.is_marker],
        dtype=np.float64,
    )
    if durations.size == 0:
        raise ValueError("没有已对齐的音节，无法统计音节时长")
    return float(durations.mean()), float(durations.std(ddof=0))


def std_f0(track: F0Track) -> float:
    voiced = track.voiced_values
    if voiced.size < 2:
        return 0.0
    return float(np.std(voiced, ddof=0))


def build_report(record: UtteranceRecord, clip: AudioClip, segments: SegmentList, track: F0Track) -> MetricReport:
    """汇总一条语句的全部指标，子步骤的错误带上语句 id 重新抛出"""
    if record.wer is None:
        raise UtteranceError(record.id, "缺少对齐结果（wer），请先运行 align")
    try:
        avg_dur, std_dur = syllable_duration_stats(record.timed_tokens)
        p_signal = signal_power(clip, segments)
        max_silence = max((s.duration_s for s in record.silences), default=0.0)
        ref_len = sum(1 for t in record.timed_tokens if not t.syllable.is_marker)
        return MetricReport(
            wer=float(record.wer),
            articulation=articulation(p_signal, avg_dur),
            std_syl_dur_s=std_dur,
            non_fluency=non_fluency(record.silences, avg_dur),
            std_f0_hz=std_f0(track),
            avg_syl_dur_s=avg_dur,
            p_signal=p_signal,
            max_internal_silence_s=max_silence,
            anchor_coverage=anchored_fraction(record.anchors, ref_len),
        )
    except UtteranceError:
        raise
    except ValueError as e:
        raise UtteranceError(record.id, str(e)) from e


def metrics_frame(records: Iterable[UtteranceRecord]) -> pd.DataFrame:
    """有指标的语句组成的表（按 id 排序），列与 metrics.csv 一致"""
    rows = []
    for record in records:
        m = record.metrics
        if m is None:
            continue
        rows.append({
            "id": record.id,
            "wer": m.wer,
            "articulation": m.articulation,
            "std_syl_dur": m.std_syl_dur_s,
            "non_fluency": m.non_fluency,
            "std_f0": m.std_f0_hz,
            "avg_syl_dur": m.avg_syl_dur_s,
            "p_signal": m.p_signal,
            "max_internal_silence": m.max_internal_silence_s,
        })
    df = pd.DataFrame(rows, columns=["id"] + METRIC_COLUMNS)
    return df.sort_values("id", kind="mergesort").reset_index(drop=True)


def write_metrics_csv(records: Iterable[UtteranceRecord], path) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = metrics_frame(records)
    df.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    logger.info(f"指标表已写入 {path}（{len(df)} 条）")
    return len(df)
