from math import gcd

from scipy.signal import resample_poly

from .audio_io import AudioClip


class AudioResampler:
    """音频重采样器（多相加窗 sinc 滤波）"""

    def __init__(self, target_hz: int = 16000, kaiser_beta: float = 5.0):
        if target_hz <= 0:
            raise ValueError(f"目标采样率必须为正: {target_hz}")
        self.target_hz = target_hz
        self.kaiser_beta = kaiser_beta

    def resample(self, clip: AudioClip) -> AudioClip:
        if clip.sample_rate_hz == self.target_hz:
            return clip

        # 约分得到最小的上/下采样因子
        factor = gcd(self.target_hz, clip.sample_rate_hz)
        up = self.target_hz // factor
        down = clip.sample_rate_hz // factor

        samples = resample_poly(clip.samples, up, down, window=('kaiser', self.kaiser_beta))
        return AudioClip(samples=samples, sample_rate_hz=self.target_hz)


def resample(clip: AudioClip, target_hz: int) -> AudioClip:
    return AudioResampler(target_hz).resample(clip)
