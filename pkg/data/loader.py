import math
import logging
import unicodedata
from pathlib import Path
from typing import Dict, Iterable, List

from .models import HypToken, UtteranceRecord, record_text
from utils.exceptions import CtmError, ManifestError

logger = logging.getLogger(__name__)


class CorpusLoader:
    """语料文件加载器 - 清单 (id<TAB>音频路径<TAB>文本) 与 CTM 识别结果"""

    def __init__(self, encoding: str = 'utf-8'):
        self.encoding = encoding

    def load_manifest(self, path) -> List[UtteranceRecord]:
        """加载清单，保持行顺序；空行跳过"""
        records = []
        seen = {}
        with open(path, 'r', encoding=self.encoding) as f:
            for line_no, line in enumerate(f, start=1):
                line = line.rstrip('\n')
                if not line.strip():
                    continue

                parts = line.split('\t', 2)
                if len(parts) != 3:
                    raise ManifestError("应为 id<TAB>音频路径<TAB>文本 三列", line_no)
                utt_id, audio_path, raw_text = parts
                if not utt_id or any(ch.isspace() for ch in utt_id):
                    raise ManifestError(f"非法的语句 id: {utt_id!r}", line_no)
                if not audio_path:
                    raise ManifestError(f"语句 {utt_id} 缺少音频路径", line_no)
                if utt_id in seen:
                    raise ManifestError(f"重复的语句 id '{utt_id}'（首次出现于第 {seen[utt_id]} 行）", line_no)
                seen[utt_id] = line_no

                records.append(UtteranceRecord(id=utt_id, audio_path=audio_path, raw_text=raw_text))

        logger.info(f"从 {path} 加载 {len(records)} 条语句")
        return records

    def save_manifest(self, records: Iterable[UtteranceRecord], path, kept_only: bool = False) -> int:
        """按 id 排序写出清单，返回写出的行数"""
        selected = [r for r in records if r.verdict.kept or not kept_only]
        selected.sort(key=lambda r: r.id)

        lines = []
        for record in selected:
            text = record_text(record)
            for value in (record.id, record.audio_path, text):
                if '\t' in value or '\n' in value or '\r' in value:
                    raise ManifestError(f"语句 {record.id} 的字段包含制表符或换行: {value!r}")
            lines.append(f"{record.id}\t{record.audio_path}\t{text}\n")

        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding=self.encoding, newline='\n') as f:
            f.writelines(lines)
        return len(lines)

    def load_ctm(self, path) -> Dict[str, List[HypToken]]:
        """加载 CTM：utt-id channel start dur token [confidence]"""
        grouped: Dict[str, List[HypToken]] = {}
        with open(path, 'r', encoding=self.encoding) as f:
            for line_no, line in enumerate(f, start=1):
                parts = line.split()
                if not parts or parts[0].startswith(';;'):
                    continue
                if len(parts) not in (5, 6):
                    raise CtmError(f"应为 5 列（可选第 6 列置信度），实际 {len(parts)} 列", line_no)

                utt_id, _channel, start_str, dur_str, token = parts[:5]
                try:
                    start_s = float(start_str)
                    dur_s = float(dur_str)
                except ValueError:
                    raise CtmError(f"无法解析时间: {start_str!r} {dur_str!r}", line_no)
                if not (math.isfinite(start_s) and math.isfinite(dur_s)):
                    raise CtmError("时间必须为有限数值", line_no)
                if start_s < 0:
                    raise CtmError(f"起始时间为负: {start_s}", line_no)
                if dur_s <= 0:
                    raise CtmError(f"时长必须为正: {dur_s}", line_no)

                text = unicodedata.normalize('NFC', token).lower()
                grouped.setdefault(utt_id, []).append(HypToken(text=text, start_s=start_s, dur_s=dur_s))

        # 稳定排序：起始时间相同的保持文件顺序
        return {utt_id: sorted(tokens, key=lambda t: t.start_s) for utt_id, tokens in sorted(grouped.items())}


# 导出便捷函数
def load_manifest(path) -> List[UtteranceRecord]:
    return CorpusLoader().load_manifest(path)


def save_manifest(records: Iterable[UtteranceRecord], path, kept_only: bool = False) -> int:
    return CorpusLoader().save_manifest(records, path, kept_only)


def load_ctm(path) -> Dict[str, List[HypToken]]:
    return CorpusLoader().load_ctm(path)
