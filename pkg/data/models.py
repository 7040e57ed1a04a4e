"""语料筛选的核心数据类型

各阶段之间记录是不可变值：阶段函数返回新的记录（dataclasses.replace），
不修改输入。
"""
from dataclasses import dataclass, field, replace
from typing import FrozenSet, List, Optional, Sequence, Tuple

# 四个排名指标 + WER 过滤
SELECTION_REASONS = ("wer_filter", "articulation", "std_syl_dur", "non_fluency", "std_f0")
PROCESSING_ERROR = "processing_error"
ALL_REASONS = SELECTION_REASONS + (PROCESSING_ERROR,)


@dataclass(frozen=True)
class Syllable:
    text: str
    is_marker: bool = False

    def __post_init__(self):
        if not self.text or any(ch.isspace() for ch in self.text):
            raise ValueError(f"音节不能为空或包含空白: {self.text!r}")


@dataclass(frozen=True)
class TimedToken:
    syllable: Syllable
    start_s: float
    end_s: float
    aligned: bool = True

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class HypToken:
    """CTM 中带时间戳的识别结果"""
    text: str
    start_s: float
    dur_s: float

    @property
    def end_s(self) -> float:
        return self.start_s + self.dur_s


@dataclass(frozen=True)
class SilenceSpan:
    start_s: float
    end_s: float
    after_ref_index: int
    punct_class: Optional[int] = None

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class MetricReport:
    wer: float
    articulation: float
    std_syl_dur_s: float
    non_fluency: float
    std_f0_hz: float
    avg_syl_dur_s: float
    p_signal: float
    max_internal_silence_s: float
    anchor_coverage: float = 0.0

    def metric_value(self, name: str) -> float:
        """按筛选原因名取指标值"""
        return {
            "wer": self.wer,
            "articulation": self.articulation,
            "std_syl_dur": self.std_syl_dur_s,
            "non_fluency": self.non_fluency,
            "std_f0": self.std_f0_hz,
        }[name]


@dataclass(frozen=True)
class SelectionVerdict:
    reasons: FrozenSet[str] = frozenset()
    diagnostic: Optional[str] = None

    @property
    def kept(self) -> bool:
        return not self.reasons

    def with_reason(self, reason: str, diagnostic: Optional[str] = None) -> "SelectionVerdict":
        if reason not in ALL_REASONS:
            raise ValueError(f"未知的筛选原因: {reason}")
        return SelectionVerdict(
            reasons=self.reasons | {reason},
            diagnostic=diagnostic if diagnostic is not None else self.diagnostic,
        )


@dataclass(frozen=True)
class AudioInfo:
    sample_rate_hz: int
    duration_s: float
    md5: str
    denoised_path: Optional[str] = None


@dataclass(frozen=True)
class UtteranceRecord:
    id: str
    audio_path: str
    raw_text: str
    norm_tokens: Tuple[Syllable, ...] = ()
    timed_tokens: Tuple[TimedToken, ...] = ()
    silences: Tuple[SilenceSpan, ...] = ()
    segments: Tuple[Tuple[float, float], ...] = ()
    wer: Optional[float] = None
    anchors: Tuple[Tuple[int, int], ...] = ()
    metrics: Optional[MetricReport] = None
    verdict: SelectionVerdict = field(default_factory=SelectionVerdict)
    audio: Optional[AudioInfo] = None

    @property
    def failed(self) -> bool:
        return PROCESSING_ERROR in self.verdict.reasons

    def reject(self, reason: str, diagnostic: Optional[str] = None) -> "UtteranceRecord":
        return replace(self, verdict=self.verdict.with_reason(reason, diagnostic))


def strip_markers(tokens: Sequence[Syllable]) -> List[Syllable]:
    return [tok for tok in tokens if not tok.is_marker]


def record_text(record: UtteranceRecord) -> str:
    """清单中写出的文本：已规范化则为（带标点的）音节序列，否则为原始文本"""
    if record.norm_tokens:
        return " ".join(tok.text for tok in record.norm_tokens)
    return record.raw_text


# ---- 状态文件（JSON）序列化 ----

def record_to_dict(record: UtteranceRecord) -> dict:
    metrics = None
    if record.metrics is not None:
        m = record.metrics
        metrics = {
            "wer": m.wer,
            "articulation": m.articulation,
            "std_syl_dur_s": m.std_syl_dur_s,
            "non_fluency": m.non_fluency,
            "std_f0_hz": m.std_f0_hz,
            "avg_syl_dur_s": m.avg_syl_dur_s,
            "p_signal": m.p_signal,
            "max_internal_silence_s": m.max_internal_silence_s,
            "anchor_coverage": m.anchor_coverage,
        }
    audio = None
    if record.audio is not None:
        audio = {
            "sample_rate_hz": record.audio.sample_rate_hz,
            "duration_s": record.audio.duration_s,
            "md5": record.audio.md5,
            "denoised_path": record.audio.denoised_path,
        }
    return {
        "id": record.id,
        "audio_path": record.audio_path,
        "raw_text": record.raw_text,
        "norm_tokens": [{"text": s.text, "is_marker": s.is_marker} for s in record.norm_tokens],
        "timed_tokens": [
            {
                "text": t.syllable.text,
                "is_marker": t.syllable.is_marker,
                "start_s": t.start_s,
                "end_s": t.end_s,
                "aligned": t.aligned,
            }
            for t in record.timed_tokens
        ],
        "silences": [
            {
                "start_s": s.start_s,
                "end_s": s.end_s,
                "after_ref_index": s.after_ref_index,
                "punct_class": s.punct_class,
            }
            for s in record.silences
        ],
        "segments": [[start, end] for start, end in record.segments],
        "wer": record.wer,
        "anchors": [[i, n] for i, n in record.anchors],
        "metrics": metrics,
        "verdict": {
            "reasons": sorted(record.verdict.reasons),
            "diagnostic": record.verdict.diagnostic,
        },
        "audio": audio,
    }


def record_from_dict(data: dict) -> UtteranceRecord:
    metrics = data.get("metrics")
    audio = data.get("audio")
    verdict = data.get("verdict") or {}
    return UtteranceRecord(
        id=data["id"],
        audio_path=data["audio_path"],
        raw_text=data["raw_text"],
        norm_tokens=tuple(Syllable(t["text"], t["is_marker"]) for t in data.get("norm_tokens", [])),
        timed_tokens=tuple(
            TimedToken(Syllable(t["text"], t["is_marker"]), t["start_s"], t["end_s"], t["aligned"])
            for t in data.get("timed_tokens", [])
        ),
        silences=tuple(
            SilenceSpan(s["start_s"], s["end_s"], s["after_ref_index"], s.get("punct_class"))
            for s in data.get("silences", [])
        ),
        segments=tuple((float(s), float(e)) for s, e in data.get("segments", [])),
        wer=data.get("wer"),
        anchors=tuple((int(i), int(n)) for i, n in data.get("anchors", [])),
        metrics=MetricReport(**metrics) if metrics else None,
        verdict=SelectionVerdict(
            reasons=frozenset(verdict.get("reasons", [])),
            diagnostic=verdict.get("diagnostic"),
        ),
        audio=AudioInfo(**audio) if audio else None,
    )
