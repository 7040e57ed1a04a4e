import logging
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from config.settings import VadConfig
from .audio_io import AudioClip

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SegmentList:
    """有序、不重叠的语音区间 (start_s, end_s)"""
    segments: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        segments = tuple((float(s), float(e)) for s, e in self.segments)
        for start, end in segments:
            if not end > start:
                raise ValueError(f"语音区间必须满足 end > start: ({start}, {end})")
        for (_, prev_end), (next_start, _) in zip(segments, segments[1:]):
            if next_start < prev_end:
                raise ValueError("语音区间必须有序且不重叠")
        object.__setattr__(self, 'segments', segments)

    def __iter__(self) -> Iterator[Tuple[float, float]]:
        return iter(self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    def contains(self, t: float) -> bool:
        return any(start <= t < end for start, end in self.segments)


def frame_signal(samples: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """分帧（不足一帧时补零为一帧）"""
    if len(samples) < frame_len:
        samples = np.pad(samples, (0, frame_len - len(samples)))
    return np.lib.stride_tricks.sliding_window_view(samples, frame_len)[::hop]


class EnergyVad:
    """基于帧对数能量的语音活动检测

    阈值 = 噪声底（帧能量的低百分位）+ threshold_db，且不低于 min_threshold_db；
    短于 hangover 的非语音间隙并入语音，短于 min_speech 的语音段丢弃。
    """

    def __init__(self, config: VadConfig = None):
        self.config = config or VadConfig()

    def frame_energies_db(self, clip: AudioClip) -> np.ndarray:
        frame_len, hop = self._frame_params(clip.sample_rate_hz)
        frames = frame_signal(clip.samples, frame_len, hop)
        return 10.0 * np.log10(np.mean(frames ** 2, axis=1) + 1e-12)

    def _frame_params(self, sample_rate_hz: int):
        frame_len = max(1, int(round(self.config.frame_ms * sample_rate_hz / 1000.0)))
        hop = max(1, int(round(self.config.hop_ms * sample_rate_hz / 1000.0)))
        return frame_len, hop

    def detect(self, clip: AudioClip) -> SegmentList:
        cfg = self.config
        if len(clip) == 0:
            return SegmentList()

        frame_len, hop = self._frame_params(clip.sample_rate_hz)
        energies = self.frame_energies_db(clip)
        noise_floor = float(np.percentile(energies, cfg.noise_percentile))
        threshold = max(noise_floor + cfg.threshold_db, cfg.min_threshold_db)
        speech = energies > threshold

        runs = self._speech_runs(speech)
        hangover_frames = int(round(cfg.hangover_ms / cfg.hop_ms))
        runs = self._bridge_gaps(runs, hangover_frames)

        # 每帧代表其中心附近一个 hop 宽的区域
        sr = clip.sample_rate_hz
        duration = clip.duration_s
        min_speech_s = cfg.min_speech_ms / 1000.0
        segments = []
        for first, last in runs:
            start = min((first * hop + (frame_len - hop) / 2.0) / sr, duration)
            end = min((last * hop + (frame_len + hop) / 2.0) / sr, duration)
            if end > start and end - start >= min_speech_s:
                segments.append((start, end))

        logger.debug(f"VAD: 噪声底 {noise_floor:.1f} dB，阈值 {threshold:.1f} dB，{len(segments)} 个语音段")
        return SegmentList(tuple(segments))

    @staticmethod
    def _speech_runs(speech: np.ndarray):
        runs = []
        start = None
        for i, is_speech in enumerate(speech):
            if is_speech and start is None:
                start = i
            elif not is_speech and start is not None:
                runs.append((start, i - 1))
                start = None
        if start is not None:
            runs.append((start, len(speech) - 1))
        return runs

    @staticmethod
    def _bridge_gaps(runs, max_gap_frames: int):
        merged = []
        for run in runs:
            if merged and run[0] - merged[-1][1] - 1 <= max_gap_frames:
                merged[-1] = (merged[-1][0], run[1])
            else:
                merged.append(run)
        return merged


def detect_speech(clip: AudioClip, config: VadConfig = None) -> SegmentList:
    return EnergyVad(config).detect(clip)


def segment_mask(clip: AudioClip, segments: SegmentList) -> np.ndarray:
    """语音区间并集对应的样本掩码"""
    mask = np.zeros(len(clip), dtype=bool)
    sr = clip.sample_rate_hz
    for start, end in segments:
        first = max(0, int(round(start * sr)))
        last = min(len(clip), int(round(end * sr)))
        mask[first:last] = True
    return mask


def signal_power(clip: AudioClip, segments: SegmentList) -> float:
    """语音段上的线性均方功率；无语音段时为 0"""
    mask = segment_mask(clip, segments)
    if not mask.any():
        return 0.0
    return float(np.mean(clip.samples[mask] ** 2))
