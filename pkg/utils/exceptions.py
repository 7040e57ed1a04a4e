from typing import Optional


class CurationError(ValueError):
    """语料筛选流程的基础异常"""


class ManifestError(CurationError):
    """清单文件格式错误或 id 重复"""

    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"第 {line_no} 行: {message}"
        super().__init__(message)


class CtmError(CurationError):
    """CTM 识别结果文件格式错误"""

    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"第 {line_no} 行: {message}"
        super().__init__(message)


class ConfigError(CurationError):
    """配置文件缺失、字段未知或取值非法"""


class StageError(CurationError):
    """阶段顺序错误：缺少前置阶段的状态"""

    def __init__(self, stage: str, missing: str):
        self.stage = stage
        self.missing = missing
        super().__init__(f"阶段 '{stage}' 需要先运行 '{missing}'")


class AudioFormatError(CurationError):
    """不支持的音频编码或损坏的文件"""


class UtteranceError(CurationError):
    """单条语句处理失败，携带语句 id"""

    def __init__(self, utt_id: str, message: str):
        self.utt_id = utt_id
        super().__init__(f"[{utt_id}] {message}")


class PunctuationError(CurationError):
    """停顿位置越界"""


class AnalysisError(CurationError):
    """CMOS 矩阵 / MDS 分析输入错误"""
