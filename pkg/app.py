import streamlit as st

from analysis.cmos import load_cmos, mds_1d
from config.settings import load_pipeline_config
from processing.metrics import metrics_frame
from utils.exceptions import CurationError
from utils.helpers import filter_by_reason, load_curation_outputs, records_frame, setup_page_config, setup_sidebar
from visualization.plotter import CurationPlotter, rejection_thresholds, silence_durations


def show_summary(summary):
    if not summary:
        st.info("尚未运行 select 阶段，没有筛选汇总")
        return
    cols = st.columns(3)
    cols[0].metric("总计", summary["total"])
    cols[1].metric("保留", summary["kept"])
    cols[2].metric("剔除", summary["rejected"])
    st.write(summary["by_reason"])


def show_mds(config):
    if config['cmos_file'] is None:
        st.info("在侧边栏上传 CMOS 矩阵 CSV 以查看 MDS 结果")
        return
    try:
        matrix = load_cmos(config['cmos_file'])
        result = mds_1d(matrix, config['reference'])
    except CurationError as e:
        st.error(str(e))
        return

    st.dataframe(matrix.to_frame())
    st.write("排序: " + " < ".join(result.ordering))
    st.plotly_chart(CurationPlotter().create_mds_plot(result.coordinates, result.reference),
                    use_container_width=True)


def main():
    """主应用函数"""
    setup_page_config()

    st.title("TTS 语料筛选浏览器")
    st.markdown("---")

    config = setup_sidebar()
    if config is None:
        return

    with st.spinner("正在加载筛选结果..."):
        try:
            records, summary = load_curation_outputs(config['out_dir'])
        except CurationError as e:
            st.error(str(e))
            return

    tab_summary, tab_plots, tab_table, tab_mds = st.tabs(["汇总", "指标分布", "语句列表", "MDS"])

    with tab_summary:
        show_summary(summary)

    with tab_plots:
        if not records:
            st.warning("输出目录中没有状态文件，请先运行流程")
        else:
            plotter = CurationPlotter(load_pipeline_config())
            st.plotly_chart(plotter.create_metric_plots(metrics_frame(records), rejection_thresholds(records)),
                            use_container_width=True)
            st.plotly_chart(plotter.create_silence_plot(silence_durations(records)), use_container_width=True)

    with tab_table:
        df = filter_by_reason(records_frame(records), config['reason'])
        st.write(f"{len(df)} 条语句")
        st.dataframe(df, use_container_width=True)

    with tab_mds:
        show_mds(config)


if __name__ == "__main__":
    main()
