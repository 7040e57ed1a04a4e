import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.signal import correlate

from config.settings import F0Config
from .audio_io import AudioClip
from .vad import SegmentList, frame_signal

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class F0Track:
    """逐帧基频（清音帧为 0）"""
    hop_s: float
    values_hz: np.ndarray
    voicing: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values_hz, dtype=np.float64)
        voicing = np.asarray(self.voicing, dtype=bool)
        if values.shape != voicing.shape:
            raise ValueError("values_hz 与 voicing 长度不一致")
        if np.any((values > 0) != voicing):
            raise ValueError("values_hz > 0 必须与 voicing 一致")
        object.__setattr__(self, 'values_hz', values)
        object.__setattr__(self, 'voicing', voicing)

    @property
    def voiced_values(self) -> np.ndarray:
        return self.values_hz[self.voicing]


def normalized_autocorrelation(frame: np.ndarray, max_lag: int) -> np.ndarray:
    """归一化自相关 r(τ) / sqrt(E_head(τ) · E_tail(τ))，τ = 0..max_lag"""
    n = len(frame)
    x = frame - frame.mean()
    full = correlate(x, x, mode='full', method='fft')[n - 1:n + max_lag]

    energy = np.cumsum(x ** 2)
    lags = np.arange(max_lag + 1)
    head = energy[n - 1 - lags]                          # Σ_{i < n-τ} x[i]²
    tail = energy[-1] - np.concatenate(([0.0], energy[:max_lag]))  # Σ_{i >= τ} x[i]²
    denom = np.sqrt(head * tail)
    with np.errstate(divide='ignore', invalid='ignore'):
        nccf = np.where(denom > 1e-12, full / denom, 0.0)
    return nccf


class PitchTracker:
    """自相关基频跟踪器，只在语音段内的帧上估计"""

    def __init__(self, config: F0Config = None):
        self.config = config or F0Config()

    def _pick_lag(self, nccf: np.ndarray, min_lag: int, max_lag: int) -> Tuple[float, float]:
        """返回 (插值后的周期, 峰值)；取不低于全局峰值 peak_ratio 倍的最小周期局部峰，避免低八度"""
        # 两端各多取一个滞后点，使 min_lag 与 max_lag 本身也能成为局部峰
        lo = min_lag - 1
        search = nccf[lo:max_lag + 2]
        if len(search) < 3:
            return 0.0, 0.0

        peaks = [
            i for i in range(1, len(search) - 1)
            if search[i] >= search[i - 1] and search[i] >= search[i + 1]
        ]
        if not peaks:
            return 0.0, 0.0
        best = max(search[i] for i in peaks)
        chosen = next(i for i in peaks if search[i] >= self.config.peak_ratio * best)

        # 抛物线插值细化周期
        y0, y1, y2 = search[chosen - 1], search[chosen], search[chosen + 1]
        denom = y0 - 2.0 * y1 + y2
        delta = 0.5 * (y0 - y2) / denom if abs(denom) > 1e-12 else 0.0
        return lo + chosen + delta, float(y1)

    def track(self, clip: AudioClip, segments: SegmentList) -> F0Track:
        cfg = self.config
        sr = clip.sample_rate_hz
        win = int(round(cfg.window_ms * sr / 1000.0))
        hop = max(1, int(round(cfg.hop_ms * sr / 1000.0)))
        min_lag = max(1, int(np.floor(sr / cfg.f_max_hz)))
        max_lag = min(int(np.ceil(sr / cfg.f_min_hz)), win - 2)

        if len(clip) < win:
            return F0Track(hop_s=hop / sr, values_hz=np.zeros(0), voicing=np.zeros(0, dtype=bool))

        frames = frame_signal(clip.samples, win, hop)
        values = np.zeros(len(frames))
        for idx, frame in enumerate(frames):
            center_s = (idx * hop + win / 2.0) / sr
            if not segments.contains(center_s):
                continue

            nccf = normalized_autocorrelation(frame, max_lag + 1)
            period, peak = self._pick_lag(nccf, min_lag, max_lag)
            if period <= 0 or peak < cfg.voicing_threshold:
                continue
            values[idx] = float(np.clip(sr / period, cfg.f_min_hz, cfg.f_max_hz))

        voicing = values > 0
        logger.debug(f"F0: {len(frames)} 帧，{int(voicing.sum())} 帧浊音")
        return F0Track(hop_s=hop / sr, values_hz=values, voicing=voicing)


def track_f0(clip: AudioClip, segments: SegmentList, config: F0Config = None) -> F0Track:
    return PitchTracker(config).track(clip, segments)
