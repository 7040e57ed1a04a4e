"""韵律标点：按内部静音时长分四类，并在文本中插入标记音节"""
import logging
from dataclasses import replace
from typing import List, Optional, Sequence

from config.settings import PunctScheme
from data.models import SilenceSpan, Syllable, strip_markers
from utils.exceptions import PunctuationError

logger = logging.getLogger(__name__)

# 浮点减法误差容限，边界值按闭区间归类
_BOUNDARY_TOL = 1e-9


def classify_silence(duration_s: float, scheme: PunctScheme = None) -> Optional[int]:
    """[b0,b1] -> 1, (b1,b2] -> 2, (b2,b3] -> 3, (b3,∞) -> 4，短于 b0 不分类"""
    scheme = scheme or PunctScheme()
    if duration_s <= 0:
        raise ValueError(f"静音时长必须为正: {duration_s}")
    b0, b1, b2, b3 = scheme.boundaries_s
    if duration_s < b0 - _BOUNDARY_TOL:
        return None
    if duration_s <= b1 + _BOUNDARY_TOL:
        return 1
    if duration_s <= b2 + _BOUNDARY_TOL:
        return 2
    if duration_s <= b3 + _BOUNDARY_TOL:
        return 3
    return 4


def classify_silences(silences: Sequence[SilenceSpan], scheme: PunctScheme = None) -> List[SilenceSpan]:
    scheme = scheme or PunctScheme()
    return [replace(s, punct_class=classify_silence(s.duration_s, scheme)) for s in silences]


def insert_punctuation(tokens: Sequence[Syllable], silences: Sequence[SilenceSpan],
                       scheme: PunctScheme = None) -> List[Syllable]:
    """在每个已分类静音对应的音节后插入一个标记音节"""
    scheme = scheme or PunctScheme()
    markers_after = {}
    for silence in silences:
        if not 0 <= silence.after_ref_index < len(tokens):
            raise PunctuationError(
                f"静音 [{silence.start_s:.3f}, {silence.end_s:.3f}] 的位置 {silence.after_ref_index} "
                f"超出音节范围 0..{len(tokens) - 1}"
            )
        if silence.punct_class is None:
            continue
        markers_after.setdefault(silence.after_ref_index, []).append(
            Syllable(scheme.marker_for(silence.punct_class), is_marker=True)
        )

    result = []
    for idx, token in enumerate(tokens):
        result.append(token)
        result.extend(markers_after.get(idx, ()))
    return result


def punctuate(tokens: Sequence[Syllable], silences: Sequence[SilenceSpan],
              scheme: PunctScheme = None) -> List[Syllable]:
    """去掉已有标记后重新分类、插入，可重复执行"""
    scheme = scheme or PunctScheme()
    return insert_punctuation(strip_markers(tokens), classify_silences(silences, scheme), scheme)
