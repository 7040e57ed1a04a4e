import unicodedata
from pathlib import Path

import numpy as np
import pytest
import soundfile as sf

from config.settings import DEFAULT_NORM_RULES_PATH
from processing.audio_io import AudioClip
from processing.text_normalizer import load_rules

SR = 16000


def tone(freq_hz: float, duration_s: float, sr: int = SR, amplitude: float = 0.5) -> np.ndarray:
    t = np.arange(int(round(duration_s * sr))) / sr
    return amplitude * np.sin(2 * np.pi * freq_hz * t)


def silence(duration_s: float, sr: int = SR) -> np.ndarray:
    return np.zeros(int(round(duration_s * sr)))


def write_pcm16(path: Path, samples: np.ndarray, sr: int = SR) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    sf.write(str(path), samples, sr, subtype='PCM_16')
    return path


def write_ctm(path: Path, entries) -> Path:
    """entries: (utt_id, start_s, dur_s, token)"""
    lines = [
        f"{utt_id} 1 {start:.2f} {dur:.2f} {unicodedata.normalize('NFC', token)}\n"
        for utt_id, start, dur, token in entries
    ]
    path.write_text("".join(lines), encoding='utf-8')
    return path


@pytest.fixture
def rules():
    return load_rules(DEFAULT_NORM_RULES_PATH)


@pytest.fixture
def tone_clip():
    return AudioClip(tone(220.0, 1.0), SR)


# 三条合成语句：(id, 文本, [(音节, 起始, 时长)])
# utt1 的 chào/các 之间 0.30 s 静音（第 4 类），utt2 的 tôi/đi 之间 0.13 s（第 1 类），
# utt3 只有 0.06 s 的短停顿（不插入标记）
FIXTURE_UTTERANCES = [
    ("utt1", "Xin chào, các bạn.", [("xin", 0.30, 0.20), ("chào", 0.50, 0.20), ("các", 1.00, 0.20), ("bạn", 1.20, 0.20)]),
    ("utt2", "Hôm nay tôi đi học", [("hôm", 0.30, 0.20), ("nay", 0.50, 0.20), ("tôi", 0.70, 0.20),
                                    ("đi", 1.03, 0.20), ("học", 1.23, 0.20)]),
    ("utt3", "Trời mưa to quá", [("trời", 0.30, 0.25), ("mưa", 0.55, 0.25), ("to", 0.86, 0.25), ("quá", 1.11, 0.25)]),
]


def _utterance_audio(index: int) -> np.ndarray:
    rng = np.random.default_rng(100 + index)
    body = tone(180.0 + 20.0 * index, 1.4, amplitude=0.4)
    audio = np.concatenate([silence(0.3), body, silence(0.3)])
    return audio + 0.001 * rng.standard_normal(len(audio))


@pytest.fixture
def corpus_dir(tmp_path):
    """清单 + 音频 + CTM 的小型合成语料"""
    root = tmp_path / "corpus"
    manifest_lines = []
    ctm_entries = []
    for index, (utt_id, text, tokens) in enumerate(FIXTURE_UTTERANCES):
        write_pcm16(root / "audio" / f"{utt_id}.wav", _utterance_audio(index))
        manifest_lines.append(f"{utt_id}\taudio/{utt_id}.wav\t{text}\n")
        ctm_entries.extend((utt_id, start, dur, token) for token, start, dur in tokens)

    (root / "manifest.tsv").write_text("".join(manifest_lines), encoding='utf-8')
    write_ctm(root / "asr.ctm", ctm_entries)
    return root
