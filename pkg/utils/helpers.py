import json
from pathlib import Path
from typing import List, Optional, Tuple

import pandas as pd
import streamlit as st

from config.settings import AppConfig, REASON_LABELS
from data.models import ALL_REASONS, UtteranceRecord, record_text
from data.state_manager import StateManager

# 看板中“原因”筛选的选项
ALL_REASONS_OPTION = "全部"
KEPT_OPTION = "仅保留"


def setup_page_config():
    """设置页面配置"""
    st.set_page_config(
        page_title="TTS 语料筛选浏览器",
        layout="wide",
        initial_sidebar_state="expanded"
    )


def load_curation_outputs(out_dir) -> Tuple[List[UtteranceRecord], Optional[dict]]:
    """读取输出目录中的状态文件与筛选汇总；状态文件不存在时返回空列表"""
    out_dir = Path(out_dir)
    manager = StateManager(out_dir / "state.json")
    records = manager.load().records if manager.exists() else []

    summary = None
    summary_path = out_dir / "selection_summary.json"
    if summary_path.exists():
        with open(summary_path, 'r', encoding='utf-8') as f:
            summary = json.load(f)
    return records, summary


def records_frame(records: List[UtteranceRecord]) -> pd.DataFrame:
    """每条语句一行：状态、原因、主要指标与（带标点的）文本"""
    rows = []
    for record in records:
        m = record.metrics
        rows.append({
            "id": record.id,
            "保留": record.verdict.kept,
            "原因": ", ".join(sorted(record.verdict.reasons)),
            "WER": m.wer if m else record.wer,
            "articulation": m.articulation if m else None,
            "std_syl_dur": m.std_syl_dur_s if m else None,
            "non_fluency": m.non_fluency if m else None,
            "std_f0": m.std_f0_hz if m else None,
            "文本": record_text(record),
            "诊断": record.verdict.diagnostic or "",
        })
    columns = ["id", "保留", "原因", "WER", "articulation", "std_syl_dur", "non_fluency", "std_f0", "文本", "诊断"]
    return pd.DataFrame(rows, columns=columns)


def filter_by_reason(df: pd.DataFrame, option: str) -> pd.DataFrame:
    """按看板选项过滤：全部 / 仅保留 / 某个剔除原因"""
    if df.empty or option == ALL_REASONS_OPTION:
        return df
    if option == KEPT_OPTION:
        return df[df["保留"]]
    return df[df["原因"].str.split(", ").apply(lambda reasons: option in reasons)]


def setup_sidebar():
    """设置侧边栏并返回配置"""
    config = AppConfig()

    st.sidebar.header("数据选择")
    out_dir = st.sidebar.text_input("输出目录", value=config.OUTPUT_DIR)
    if not Path(out_dir).exists():
        st.sidebar.error(f"目录不存在: {out_dir}")
        return None

    reason_options = [ALL_REASONS_OPTION, KEPT_OPTION] + list(ALL_REASONS)
    reason = st.sidebar.selectbox(
        "按原因筛选",
        options=reason_options,
        format_func=lambda key: REASON_LABELS.get(key, key),
    )

    st.sidebar.header("CMOS 分析")
    cmos_file = st.sidebar.file_uploader("CMOS 矩阵 CSV", type=["csv"])
    reference = st.sidebar.text_input("参考系统", value="NAT")

    return {
        'out_dir': out_dir,
        'reason': reason,
        'cmos_file': cmos_file,
        'reference': reference,
    }
