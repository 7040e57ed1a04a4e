import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import soundfile as sf

from utils.exceptions import AudioFormatError

logger = logging.getLogger(__name__)

SUPPORTED_SUBTYPES = {'PCM_U8', 'PCM_S8', 'PCM_16', 'PCM_24', 'PCM_32', 'FLOAT', 'DOUBLE'}


@dataclass(frozen=True, eq=False)
class AudioClip:
    """单声道音频片段，样本取值在 [-1, 1]"""
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError("采样率必须为正")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioClip 只接受单声道样本")
        object.__setattr__(self, 'samples', samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def __len__(self) -> int:
        return len(self.samples)


def load_wav(path) -> AudioClip:
    """读取 PCM/浮点 WAV，多声道取平均；16 位样本除以 32768"""
    path = Path(path)
    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        raise AudioFormatError(f"无法读取音频 {path}: {e}") from e

    if info.format not in ('WAV', 'WAVEX'):
        raise AudioFormatError(f"{path} 不是 WAV 文件（格式 {info.format}）")
    if info.subtype not in SUPPORTED_SUBTYPES:
        raise AudioFormatError(f"{path} 使用不支持的编码 {info.subtype}")

    data, sample_rate = sf.read(str(path), dtype='float64', always_2d=True)
    if data.shape[0] == 0:
        raise AudioFormatError(f"{path} 不含任何样本")

    samples = data.mean(axis=1)
    if not np.all(np.isfinite(samples)):
        raise AudioFormatError(f"{path} 含有非有限样本值")
    return AudioClip(samples=samples, sample_rate_hz=int(sample_rate))


def write_wav(clip: AudioClip, path) -> None:
    """写出 16 位 PCM WAV"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sf.write(str(path), np.clip(clip.samples, -1.0, 1.0), clip.sample_rate_hz, subtype='PCM_16')
