import os
import json
import hashlib
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path
from typing import ClassVar, Dict, Optional, Tuple

import yaml
from dotenv import load_dotenv

from utils.exceptions import ConfigError

# 加载项目根目录下的 .env 文件
load_dotenv()

CONFIG_DIR = Path(__file__).resolve().parent
DEFAULT_PIPELINE_CONFIG_PATH = CONFIG_DIR / "pipeline.yaml"
DEFAULT_NORM_RULES_PATH = CONFIG_DIR / "norm_rules.yaml"


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    try:
        return int(value) if value else default
    except ValueError:
        return default


@dataclass
class AppConfig:
    """应用配置（环境变量覆盖）"""
    CONFIG_PATH: Optional[str] = os.getenv('CURATION_CONFIG_PATH')
    OUTPUT_DIR: str = os.getenv('CURATION_OUTPUT_DIR', 'output')
    JOBS: int = _env_int('CURATION_JOBS', 1)
    LOG_LEVEL: str = os.getenv('CURATION_LOG_LEVEL', 'INFO')


@dataclass
class AudioConfig:
    target_sample_rate_hz: int = 16000

    def __post_init__(self):
        if self.target_sample_rate_hz <= 0:
            raise ConfigError("audio.target_sample_rate_hz 必须为正整数")


@dataclass
class DenoiseConfig:
    """MMSE 短时谱幅度估计降噪参数"""
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    noise_init_frames: int = 6
    alpha: float = 0.98              # 判决引导先验信噪比平滑系数
    gain_floor_db: float = -25.0
    speech_llr_threshold: float = 0.15
    noise_smoothing: float = 0.98

    def __post_init__(self):
        if self.frame_ms <= 0 or self.hop_ms <= 0 or self.hop_ms > self.frame_ms:
            raise ConfigError("denoise: 需要 0 < hop_ms <= frame_ms")
        if self.noise_init_frames < 1:
            raise ConfigError("denoise.noise_init_frames 至少为 1")
        if not 0.0 <= self.alpha < 1.0 or not 0.0 <= self.noise_smoothing < 1.0:
            raise ConfigError("denoise: alpha 与 noise_smoothing 必须在 [0, 1) 内")
        if self.gain_floor_db >= 0:
            raise ConfigError("denoise.gain_floor_db 必须为负 dB 值")


@dataclass
class VadConfig:
    """能量 VAD 参数"""
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    noise_percentile: float = 10.0
    threshold_db: float = 6.0
    min_threshold_db: float = -70.0
    min_speech_ms: float = 100.0
    hangover_ms: float = 200.0

    def __post_init__(self):
        if self.frame_ms <= 0 or self.hop_ms <= 0 or self.hop_ms > self.frame_ms:
            raise ConfigError("vad: 需要 0 < hop_ms <= frame_ms")
        if not 0.0 <= self.noise_percentile <= 100.0:
            raise ConfigError("vad.noise_percentile 必须在 [0, 100] 内")
        if self.min_speech_ms < 0 or self.hangover_ms < 0:
            raise ConfigError("vad: min_speech_ms 与 hangover_ms 不能为负")


@dataclass
class F0Config:
    """自相关基频跟踪参数"""
    window_ms: float = 40.0
    hop_ms: float = 10.0
    f_min_hz: float = 60.0
    f_max_hz: float = 400.0
    voicing_threshold: float = 0.3
    peak_ratio: float = 0.85

    def __post_init__(self):
        if self.window_ms <= 0 or self.hop_ms <= 0:
            raise ConfigError("f0: window_ms 与 hop_ms 必须为正")
        if not 0 < self.f_min_hz < self.f_max_hz:
            raise ConfigError("f0: 需要 0 < f_min_hz < f_max_hz")
        if not 0.0 < self.voicing_threshold <= 1.0 or not 0.0 < self.peak_ratio <= 1.0:
            raise ConfigError("f0: voicing_threshold 与 peak_ratio 必须在 (0, 1] 内")


@dataclass
class TextNormConfig:
    # 相对路径相对于配置文件所在目录解析
    rules_path: str = "norm_rules.yaml"


@dataclass
class AlignConfig:
    min_gap_s: float = 0.05
    anchor_min_len: int = 3
    trust_substitutions: bool = True

    def __post_init__(self):
        if self.min_gap_s <= 0:
            raise ConfigError("align.min_gap_s 必须为正")
        if self.anchor_min_len < 1:
            raise ConfigError("align.anchor_min_len 至少为 1")


@dataclass
class MetricsConfig:
    # P_signal 在降噪后 (denoised) 还是原始 (raw) 音频上计算
    power_source: str = "denoised"

    def __post_init__(self):
        if self.power_source not in ("denoised", "raw"):
            raise ConfigError("metrics.power_source 只能是 'denoised' 或 'raw'")


@dataclass
class SelectionConfig:
    """WER 过滤与逐指标最差比例剔除"""
    max_wer: float = 0.10
    reject_fraction: float = 0.05

    # 四个指标都是数值越大越差，不可配置
    METRIC_DIRECTIONS: ClassVar[Dict[str, str]] = {
        "articulation": "high-is-bad",
        "std_syl_dur": "high-is-bad",
        "non_fluency": "high-is-bad",
        "std_f0": "high-is-bad",
    }

    def __post_init__(self):
        if self.max_wer < 0:
            raise ConfigError("selection.max_wer 不能为负")
        if not 0.0 <= self.reject_fraction < 1.0:
            raise ConfigError("selection.reject_fraction 必须在 [0, 1) 内")

    @property
    def metric_directions(self) -> Dict[str, str]:
        return dict(self.METRIC_DIRECTIONS)


@dataclass
class PunctScheme:
    """四类韵律标点：[b0,b1], (b1,b2], (b2,b3], (b3,∞)"""
    boundaries_s: Tuple[float, ...] = (0.12, 0.15, 0.21, 0.27)
    markers: Tuple[str, ...] = ("<p1>", "<p2>", "<p3>", "<p4>")

    def __post_init__(self):
        self.boundaries_s = tuple(float(b) for b in self.boundaries_s)
        self.markers = tuple(self.markers)
        if len(self.boundaries_s) != 4 or len(self.markers) != 4:
            raise ConfigError("punctuation: 需要 4 个边界和 4 个标记")
        if any(b <= 0 for b in self.boundaries_s):
            raise ConfigError("punctuation.boundaries_s 必须为正")
        if any(a >= b for a, b in zip(self.boundaries_s, self.boundaries_s[1:])):
            raise ConfigError("punctuation.boundaries_s 必须严格递增")
        if len(set(self.markers)) != 4:
            raise ConfigError("punctuation.markers 必须两两不同")
        for marker in self.markers:
            if not marker or any(ch.isspace() for ch in marker):
                raise ConfigError(f"punctuation 标记 {marker!r} 不能为空或包含空白")

    def marker_for(self, punct_class: int) -> str:
        return self.markers[punct_class - 1]


@dataclass
class SplitConfig:
    test_count: int = 32
    val_fraction: float = 0.10

    def __post_init__(self):
        if self.test_count < 0:
            raise ConfigError("split.test_count 不能为负")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError("split.val_fraction 必须在 [0, 1) 内")


# 配置段名 -> 数据类
_SECTIONS = {
    "audio": AudioConfig,
    "denoise": DenoiseConfig,
    "vad": VadConfig,
    "f0": F0Config,
    "textnorm": TextNormConfig,
    "align": AlignConfig,
    "metrics": MetricsConfig,
    "selection": SelectionConfig,
    "punctuation": PunctScheme,
    "split": SplitConfig,
}


def _coerce(section: str, name: str, default, value):
    """按默认值的类型检查并转换 YAML 中的取值"""
    where = f"{section}.{name}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} 应为布尔值")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} 应为整数")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} 应为数值")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} 应为字符串")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where} 应为列表")
        item_default = default[0] if default else value[0] if value else None
        return tuple(_coerce(section, f"{name}[]", item_default, item) for item in value)
    return value


def _build_section(section: str, cls, data):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"配置段 '{section}' 应为映射")
    defaults = cls()
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"配置段 '{section}' 含未知字段: {', '.join(unknown)}")
    kwargs = {
        name: _coerce(section, name, getattr(defaults, name), value)
        for name, value in data.items()
    }
    return cls(**kwargs)


@dataclass
class PipelineConfig:
    """整个筛选流程的单一配置文档"""
    audio: AudioConfig = field(default_factory=AudioConfig)
    denoise: DenoiseConfig = field(default_factory=DenoiseConfig)
    vad: VadConfig = field(default_factory=VadConfig)
    f0: F0Config = field(default_factory=F0Config)
    textnorm: TextNormConfig = field(default_factory=TextNormConfig)
    align: AlignConfig = field(default_factory=AlignConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    punctuation: PunctScheme = field(default_factory=PunctScheme)
    split: SplitConfig = field(default_factory=SplitConfig)
    base_dir: Path = field(default=CONFIG_DIR, compare=False, repr=False)

    @classmethod
    def from_dict(cls, data: Optional[dict], base_dir: Path = CONFIG_DIR) -> "PipelineConfig":
        data = data or {}
        if not isinstance(data, dict):
            raise ConfigError("配置文件顶层应为映射")
        unknown = sorted(set(data) - set(_SECTIONS))
        if unknown:
            raise ConfigError(f"未知配置段: {', '.join(unknown)}")
        sections = {
            name: _build_section(name, section_cls, data.get(name))
            for name, section_cls in _SECTIONS.items()
        }
        return cls(base_dir=Path(base_dir), **sections)

    @classmethod
    def from_yaml(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f)
        except OSError as e:
            raise ConfigError(f"无法读取配置文件 {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"配置文件 {path} 不是合法的 YAML: {e}") from e
        return cls.from_dict(data, base_dir=path.resolve().parent)

    def to_dict(self) -> dict:
        result = {}
        for name in _SECTIONS:
            section = asdict(getattr(self, name))
            result[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in section.items()}
        return result

    def to_yaml(self, path) -> None:
        with open(path, 'w', encoding='utf-8') as f:
            yaml.safe_dump(self.to_dict(), f, allow_unicode=True, sort_keys=False)

    def digest(self) -> str:
        """配置内容的 md5，用于检测阶段之间配置是否被修改"""
        canonical = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.md5(canonical.encode('utf-8')).hexdigest()

    def rules_path(self) -> Path:
        path = Path(self.textnorm.rules_path)
        return path if path.is_absolute() else (self.base_dir / path)


def load_pipeline_config(path: Optional[str] = None) -> PipelineConfig:
    """按 参数 > 环境变量 > 内置默认文件 的顺序加载配置"""
    config_path = path or AppConfig().CONFIG_PATH
    if config_path:
        return PipelineConfig.from_yaml(config_path)
    if DEFAULT_PIPELINE_CONFIG_PATH.exists():
        return PipelineConfig.from_yaml(DEFAULT_PIPELINE_CONFIG_PATH)
    return PipelineConfig()


# 筛选原因的显示名称（看板使用）
REASON_LABELS = {
    "wer_filter": "WER 过滤",
    "articulation": "发音力度",
    "std_syl_dur": "音节时长标准差",
    "non_fluency": "不流利度",
    "std_f0": "F0 标准差",
    "processing_error": "处理失败",
}

# 指标 CSV 列顺序
METRIC_COLUMNS = [
    "wer", "articulation", "std_syl_dur", "non_fluency", "std_f0",
    "avg_syl_dur", "p_signal", "max_internal_silence",
]
