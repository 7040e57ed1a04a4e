import logging

import numpy as np
from scipy.signal import istft, stft
from scipy.special import i0e, i1e

from config.settings import DenoiseConfig
from .audio_io import AudioClip

logger = logging.getLogger(__name__)

_EPS = 1e-12
_MIN_FRAMES = 10


def mmse_stsa_gain(xi: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """MMSE 短时谱幅度增益

    xi: 先验信噪比, gamma: 后验信噪比。用指数缩放的贝塞尔函数避免溢出：
    exp(-v/2) I0(v/2) = i0e(v/2)。
    """
    v = xi * gamma / (1.0 + xi)
    return (np.sqrt(np.pi) / 2.0) * (np.sqrt(v) / gamma) * ((1.0 + v) * i0e(v / 2.0) + v * i1e(v / 2.0))


class MmseDenoiser:
    """MMSE-STSA 降噪器

    前若干帧初始化噪声谱，之后仅在似然比判为非语音的帧上平滑更新；
    先验信噪比采用判决引导估计。
    """

    def __init__(self, config: DenoiseConfig = None):
        self.config = config or DenoiseConfig()

    def _frame_params(self, sample_rate_hz: int):
        frame_len = int(round(self.config.frame_ms * sample_rate_hz / 1000.0))
        hop = int(round(self.config.hop_ms * sample_rate_hz / 1000.0))
        return frame_len, max(1, hop)

    def denoise(self, clip: AudioClip) -> AudioClip:
        cfg = self.config
        x = clip.samples
        frame_len, hop = self._frame_params(clip.sample_rate_hz)
        if len(x) < frame_len + (_MIN_FRAMES - 1) * hop:
            raise ValueError(f"音频过短：MMSE 降噪至少需要 {_MIN_FRAMES} 帧")

        if not np.any(x):
            return AudioClip(samples=np.zeros_like(x), sample_rate_hz=clip.sample_rate_hz)

        stft_kwargs = dict(fs=clip.sample_rate_hz, window='hann', nperseg=frame_len, noverlap=frame_len - hop)
        _, _, spec = stft(x, boundary='zeros', padded=True, **stft_kwargs)
        power = np.abs(spec) ** 2
        n_frames = power.shape[1]

        noise = np.maximum(power[:, :cfg.noise_init_frames].mean(axis=1), _EPS)
        xi_min = 10.0 ** (cfg.gain_floor_db / 10.0)
        gain_min = 10.0 ** (cfg.gain_floor_db / 20.0)

        gains = np.empty_like(power)
        prev_amp2 = None
        noise_frames = 0
        for m in range(n_frames):
            frame_power = power[:, m]
            gamma = np.maximum(frame_power / noise, 1e-10)

            if prev_amp2 is None:
                xi = cfg.alpha + (1.0 - cfg.alpha) * np.maximum(gamma - 1.0, 0.0)
            else:
                xi = cfg.alpha * prev_amp2 / noise + (1.0 - cfg.alpha) * np.maximum(gamma - 1.0, 0.0)
            xi = np.maximum(xi, xi_min)

            # 对数似然比语音判决，非语音帧更新噪声谱
            llr = float(np.mean(gamma * xi / (1.0 + xi) - np.log1p(xi)))
            if llr < cfg.speech_llr_threshold:
                noise = np.maximum(cfg.noise_smoothing * noise + (1.0 - cfg.noise_smoothing) * frame_power, _EPS)
                noise_frames += 1

            gain = np.clip(mmse_stsa_gain(xi, gamma), gain_min, 1.0)
            gains[:, m] = gain
            prev_amp2 = gain ** 2 * frame_power

        _, y = istft(spec * gains, boundary=True, **stft_kwargs)
        y = y[:len(x)]
        if len(y) < len(x):
            y = np.pad(y, (0, len(x) - len(y)))

        logger.debug(f"MMSE 降噪完成：{n_frames} 帧，其中 {noise_frames} 帧用于更新噪声谱")
        return AudioClip(samples=y, sample_rate_hz=clip.sample_rate_hz)


def denoise_mmse(clip: AudioClip, config: DenoiseConfig = None) -> AudioClip:
    return MmseDenoiser(config).denoise(clip)
