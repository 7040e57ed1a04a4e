import os
import json
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from .models import UtteranceRecord, record_from_dict, record_to_dict
from utils.exceptions import CurationError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass
class CurationState:
    """状态文件内容：已完成阶段 + 按 id 排序的语句记录"""
    records: List[UtteranceRecord] = field(default_factory=list)
    stages: List[str] = field(default_factory=list)
    config_md5: Optional[str] = None
    manifest_dir: Optional[str] = None


class StateManager:
    """筛选状态的 JSON 旁路文件（按语句 id 为键），各阶段可独立运行、断点续跑"""

    def __init__(self, state_path):
        self.state_path = Path(state_path)

    def exists(self) -> bool:
        return self.state_path.exists()

    def calculate_file_hash(self, file_path) -> str:
        """计算文件的MD5哈希值"""
        hash_md5 = hashlib.md5()
        with open(file_path, "rb") as f:
            for chunk in iter(lambda: f.read(4096), b""):
                hash_md5.update(chunk)
        return hash_md5.hexdigest()

    def load(self) -> CurationState:
        try:
            with open(self.state_path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise CurationError(f"状态文件 {self.state_path} 已损坏: {e}") from e

        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise CurationError(f"不支持的状态文件版本: {version}")

        utterances = data.get("utterances", {})
        records = [record_from_dict(utterances[utt_id]) for utt_id in sorted(utterances)]
        return CurationState(
            records=records,
            stages=list(data.get("stages", [])),
            config_md5=data.get("config_md5"),
            manifest_dir=data.get("manifest_dir"),
        )

    def save(self, state: CurationState) -> None:
        """写出状态文件：键排序、UTF-8，先写临时文件再替换"""
        payload = {
            "schema_version": SCHEMA_VERSION,
            "stages": list(state.stages),
            "config_md5": state.config_md5,
            "manifest_dir": state.manifest_dir,
            "utterances": {r.id: record_to_dict(r) for r in state.records},
        }
        self.state_path.parent.mkdir(parents=True, exist_ok=True)
        tmp_path = self.state_path.with_name(self.state_path.name + ".tmp")
        with open(tmp_path, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(payload, f, ensure_ascii=False, sort_keys=True, indent=2)
            f.write("\n")
        os.replace(tmp_path, self.state_path)
        logger.debug(f"状态已写入 {self.state_path}（{len(state.records)} 条语句）")
