import html
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
import plotly.graph_objects as go
from plotly.subplots import make_subplots

from config.settings import PipelineConfig, REASON_LABELS, SelectionConfig
from data.models import UtteranceRecord
from processing.metrics import metrics_frame
from processing.selection import selection_summary

# 排名指标 -> (metrics.csv 列名, 显示名)
RANKED_METRICS = {
    "articulation": ("articulation", "Articulation (P_signal × 平均音节时长)"),
    "std_syl_dur": ("std_syl_dur", "音节时长标准差 (s)"),
    "non_fluency": ("non_fluency", "Non-fluency (最长内部静音 / 平均音节时长)"),
    "std_f0": ("std_f0", "F0 标准差 (Hz)"),
}

_CLASS_COLORS = ['#9ecae1', '#6baed6', '#3182bd', '#08519c']


def rejection_thresholds(records: Sequence[UtteranceRecord]) -> Dict[str, Optional[float]]:
    """每个指标被剔除语句中的最小值（即实际剔除阈值），无剔除时为 None"""
    thresholds: Dict[str, Optional[float]] = {}
    for metric in SelectionConfig.METRIC_DIRECTIONS:
        values = [
            r.metrics.metric_value(metric)
            for r in records
            if r.metrics is not None and metric in r.verdict.reasons
        ]
        thresholds[metric] = min(values) if values else None
    return thresholds


def silence_durations(records: Sequence[UtteranceRecord], kept_only: bool = False) -> List[float]:
    return [
        s.duration_s
        for r in records
        if r.verdict.kept or not kept_only
        for s in r.silences
    ]


class CurationPlotter:
    """筛选结果图表绘制器"""

    def __init__(self, config: PipelineConfig = None):
        self.config = config or PipelineConfig()

    def create_metric_plots(self, df: pd.DataFrame, thresholds: Dict[str, Optional[float]] = None) -> go.Figure:
        """四个排名指标的分布直方图，竖线为剔除阈值"""
        thresholds = thresholds or {}
        names = list(RANKED_METRICS)
        fig = make_subplots(
            rows=2, cols=2,
            subplot_titles=[RANKED_METRICS[name][1] for name in names],
            vertical_spacing=0.15,
        )

        for idx, name in enumerate(names):
            row, col = idx // 2 + 1, idx % 2 + 1
            column = RANKED_METRICS[name][0]
            if column in df.columns and not df.empty:
                fig.add_trace(go.Histogram(
                    x=df[column],
                    nbinsx=40,
                    name=name,
                    marker_color='steelblue',
                    showlegend=False,
                ), row=row, col=col)

            threshold = thresholds.get(name)
            if threshold is not None:
                fig.add_vline(
                    x=threshold,
                    line_dash="dash",
                    line_color="red",
                    line_width=2,
                    row=row, col=col,
                )

        fig.update_layout(
            title="筛选指标分布（红色虚线：剔除阈值）",
            height=700,
            width=1000,
            bargap=0.05,
            margin=dict(l=50, r=50, t=80, b=50),
        )
        return fig

    def create_silence_plot(self, durations: Sequence[float]) -> go.Figure:
        """内部静音时长直方图，标出四类韵律标点的边界"""
        scheme = self.config.punctuation
        fig = go.Figure()
        fig.add_trace(go.Histogram(
            x=list(durations),
            xbins=dict(start=0.0, size=0.01),
            marker_color='gray',
            name='内部静音',
        ))

        for idx, boundary in enumerate(scheme.boundaries_s):
            fig.add_vline(
                x=boundary,
                line_dash="solid" if idx == 0 else "dash",
                line_color=_CLASS_COLORS[idx],
                line_width=2,
                annotation_text=f"{boundary:.2f}s",
                annotation_position="top",
            )

        fig.update_layout(
            title=f"内部静音时长分布（标记: {' / '.join(scheme.markers)}）",
            xaxis_title="时长 (s)",
            yaxis_title="数量",
            height=450,
            width=1000,
            margin=dict(l=50, r=50, t=80, b=50),
        )
        return fig

    def create_mds_plot(self, coordinates: Dict[str, float], reference: str) -> go.Figure:
        """一维 MDS 结果：越靠近参考系统越好"""
        names = sorted(coordinates, key=lambda name: (coordinates[name], name))
        fig = go.Figure()
        fig.add_trace(go.Scatter(
            x=[coordinates[name] for name in names],
            y=[0.0] * len(names),
            mode='markers+text',
            text=names,
            textposition='top center',
            marker=dict(
                size=14,
                color=['red' if name == reference else 'steelblue' for name in names],
            ),
            showlegend=False,
        ))
        fig.update_yaxes(visible=False, range=[-1, 1])
        fig.update_layout(
            title=f"CMOS 一维 MDS（越接近 {reference} 越好）",
            xaxis_title="坐标",
            height=300,
            width=900,
            margin=dict(l=50, r=50, t=80, b=50),
        )
        return fig

    def write_report(self, records: Sequence[UtteranceRecord], path) -> None:
        """写出独立的 HTML 报告：汇总表 + 指标分布 + 静音分布"""
        summary = selection_summary(records)
        df = metrics_frame(records)
        figures = [
            ("metrics", self.create_metric_plots(df, rejection_thresholds(records))),
            ("silences", self.create_silence_plot(silence_durations(records))),
        ]

        rows = "\n".join(
            f"<tr><td>{html.escape(REASON_LABELS.get(reason, reason))}</td>"
            f"<td>{html.escape(reason)}</td><td>{count}</td></tr>"
            for reason, count in summary["by_reason"].items()
        )
        parts = [
            "<!DOCTYPE html>",
            "<html><head><meta charset=\"utf-8\"><title>语料筛选报告</title></head><body>",
            "<h1>语料筛选报告</h1>",
            f"<p>总计 {summary['total']} 条，保留 {summary['kept']} 条，剔除 {summary['rejected']} 条</p>",
            "<table border=\"1\"><tr><th>原因</th><th>代码</th><th>数量</th></tr>",
            rows,
            "</table>",
        ]
        for idx, (name, fig) in enumerate(figures):
            parts.append(fig.to_html(
                full_html=False,
                include_plotlyjs='cdn' if idx == 0 else False,
                div_id=f"report-{name}",
            ))
        parts.append("</body></html>")

        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write("\n".join(parts) + "\n")
