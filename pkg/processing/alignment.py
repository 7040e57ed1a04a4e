"""识别结果与规范化参考文本的对齐

最小编辑距离（单位代价）对齐，回溯时平局顺序固定为
Match > Substitute > DeleteRef > InsertHyp，保证跨平台结果一致。
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from data.models import HypToken, SilenceSpan, Syllable, TimedToken

logger = logging.getLogger(__name__)


class OpKind(str, Enum):
    MATCH = "match"
    SUBSTITUTE = "substitute"
    DELETE_REF = "delete_ref"
    INSERT_HYP = "insert_hyp"


@dataclass(frozen=True)
class EditOp:
    kind: OpKind
    ref_index: Optional[int] = None
    hyp_index: Optional[int] = None


@dataclass(frozen=True)
class EditAlignment:
    ops: Tuple[EditOp, ...]
    wer: float
    anchors: Tuple[Tuple[int, int], ...]

    def count(self, kind: OpKind) -> int:
        return sum(1 for op in self.ops if op.kind == kind)

    @property
    def errors(self) -> int:
        return len(self.ops) - self.count(OpKind.MATCH)


def _edit_table(ref: Sequence[str], hyp: Sequence[str]) -> List[List[int]]:
    n, m = len(ref), len(hyp)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        table[i][0] = i
    for j in range(m + 1):
        table[0][j] = j
    for i in range(1, n + 1):
        row, prev = table[i], table[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ref[i - 1] == hyp[j - 1] else 1
            row[j] = min(prev[j - 1] + cost, prev[j] + 1, row[j - 1] + 1)
    return table


def find_anchors(ops: Sequence[EditOp], min_len: int = 3) -> Tuple[Tuple[int, int], ...]:
    """连续 Match 的极大片段（长度 >= min_len），返回 (参考起始下标, 长度)"""
    anchors = []
    run_start, run_len = None, 0
    for op in list(ops) + [EditOp(OpKind.INSERT_HYP)]:
        if op.kind == OpKind.MATCH:
            if run_len == 0:
                run_start = op.ref_index
            run_len += 1
            continue
        if run_len >= min_len:
            anchors.append((run_start, run_len))
        run_start, run_len = None, 0
    return tuple(anchors)


def align_hyp_to_ref(ref: Sequence[Syllable], hyp: Sequence[HypToken], anchor_min_len: int = 3) -> EditAlignment:
    """参考音节序列与识别结果的最小编辑距离对齐"""
    if not ref:
        raise ValueError("参考文本为空，无法对齐")

    ref_text = [s.text for s in ref]
    hyp_text = [h.text for h in hyp]
    table = _edit_table(ref_text, hyp_text)

    ops: List[EditOp] = []
    i, j = len(ref_text), len(hyp_text)
    while i > 0 or j > 0:
        here = table[i][j]
        if i > 0 and j > 0 and ref_text[i - 1] == hyp_text[j - 1] and here == table[i - 1][j - 1]:
            ops.append(EditOp(OpKind.MATCH, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and ref_text[i - 1] != hyp_text[j - 1] and here == table[i - 1][j - 1] + 1:
            ops.append(EditOp(OpKind.SUBSTITUTE, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and here == table[i - 1][j] + 1:
            ops.append(EditOp(OpKind.DELETE_REF, i - 1, None))
            i -= 1
        else:
            ops.append(EditOp(OpKind.INSERT_HYP, None, j - 1))
            j -= 1
    ops.reverse()

    return EditAlignment(
        ops=tuple(ops),
        wer=table[-1][-1] / len(ref_text),
        anchors=find_anchors(ops, anchor_min_len),
    )


def anchored_fraction(anchors: Sequence[Tuple[int, int]], ref_len: int) -> float:
    if ref_len <= 0:
        return 0.0
    return sum(length for _, length in anchors) / ref_len


def anchor_coverage(alignment: EditAlignment, ref_len: int) -> float:
    """锚点覆盖的参考音节比例"""
    return anchored_fraction(alignment.anchors, ref_len)


def transfer_timestamps(ref: Sequence[Syllable], alignment: EditAlignment, hyp: Sequence[HypToken],
                        trust_substitutions: bool = True) -> List[TimedToken]:
    """把识别结果的时间戳转移到参考音节上

    Match（以及默认情况下的 Substitute）取配对识别词的 [start, start+dur]；
    未对齐的音节放在前一个已对齐音节结束处，时长为 0，aligned=False。
    """
    paired = {}
    for op in alignment.ops:
        if op.kind == OpKind.MATCH or (op.kind == OpKind.SUBSTITUTE and trust_substitutions):
            paired[op.ref_index] = hyp[op.hyp_index]

    tokens: List[TimedToken] = []
    prev_end = 0.0
    for idx, syllable in enumerate(ref):
        hyp_token = paired.get(idx)
        if hyp_token is None:
            tokens.append(TimedToken(syllable, prev_end, prev_end, aligned=False))
            continue

        # 识别结果时间重叠时截断到前一个结束点
        start = max(hyp_token.start_s, prev_end)
        end = hyp_token.end_s
        if end <= start:
            tokens.append(TimedToken(syllable, prev_end, prev_end, aligned=False))
            continue
        tokens.append(TimedToken(syllable, start, end, aligned=True))
        prev_end = end

    unaligned = sum(1 for t in tokens if not t.aligned)
    if unaligned:
        logger.debug(f"{unaligned}/{len(tokens)} 个音节未能对齐")
    return tokens


def detect_internal_silences(tokens: Sequence[TimedToken], min_gap_s: float = 0.05) -> List[SilenceSpan]:
    """相邻已对齐音节之间 >= min_gap_s 的内部静音（不含首尾静音）"""
    if min_gap_s <= 0:
        raise ValueError("min_gap_s 必须为正")

    aligned = [(idx, tok) for idx, tok in enumerate(tokens) if tok.aligned and not tok.syllable.is_marker]
    silences = []
    for (prev_idx, prev_tok), (_, next_tok) in zip(aligned, aligned[1:]):
        span = SilenceSpan(start_s=prev_tok.end_s, end_s=next_tok.start_s, after_ref_index=prev_idx)
        if span.duration_s >= min_gap_s:
            silences.append(span)
    return silences
