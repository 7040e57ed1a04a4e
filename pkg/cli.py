#!/usr/bin/env python3
"""语料筛选命令行

    python cli.py run --manifest m.tsv --ctm asr.ctm --out output
    python cli.py metrics --out output
    python cli.py mds --input cmos.csv --ref NAT

退出码：0 成功，1 输入错误，2 配置错误。
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from analysis.cmos import cmos_from_trials, load_cmos, load_cmos_trials, mds_1d, save_cmos
from config.settings import AppConfig, load_pipeline_config
from processing.pipeline import ALL_STAGES, CurationPipeline
from utils.exceptions import ConfigError, CurationError
from utils.log import setup_logging

logger = logging.getLogger("cli")

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_CONFIG_ERROR = 2


def _add_common_args(parser: argparse.ArgumentParser, app: AppConfig) -> None:
    parser.add_argument("--manifest", help="清单文件 id<TAB>音频路径<TAB>文本（首次运行时必需）")
    parser.add_argument("--ctm", help="识别结果 CTM 文件（align 阶段必需）")
    parser.add_argument("--config", default=app.CONFIG_PATH, help="流程配置 YAML")
    parser.add_argument("--out", default=app.OUTPUT_DIR, help="输出目录（含 state.json）")
    parser.add_argument("--jobs", type=int, default=app.JOBS, help="并行处理的线程数")
    parser.add_argument("--write-denoised", action="store_true", help="run 结束后保留 denoised/ 下的降噪 WAV（默认删除）")
    parser.add_argument("--log-level", default=app.LOG_LEVEL, help="日志级别")


def build_parser(app: AppConfig = None) -> argparse.ArgumentParser:
    app = app or AppConfig()
    parser = argparse.ArgumentParser(description="越南语 TTS 语料筛选工具")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="完整运行全部阶段")
    _add_common_args(run, app)

    for stage in ALL_STAGES:
        stage_parser = subparsers.add_parser(stage, help=f"只运行 {stage} 阶段")
        _add_common_args(stage_parser, app)

    mds = subparsers.add_parser("mds", help="CMOS 矩阵一维 MDS 分析")
    source = mds.add_mutually_exclusive_group(required=True)
    source.add_argument("--input", help="CMOS 矩阵 CSV（首行首列为系统名）")
    source.add_argument("--trials", help="逐次评分 CSV：system_a,system_b,rating")
    mds.add_argument("--ref", default="NAT", help="参考系统（坐标取最大）")
    mds.add_argument("--save-matrix", help="把（补全后的）CMOS 矩阵写出为 CSV")
    mds.add_argument("--plot", help="把 MDS 结果写出为 HTML 图")
    mds.add_argument("--log-level", default=app.LOG_LEVEL, help="日志级别")
    return parser


def _run_mds(args) -> int:
    if args.input:
        matrix = load_cmos(args.input)
    else:
        matrix, significance = cmos_from_trials(load_cmos_trials(args.trials))
        for row in significance.itertuples(index=False):
            mark = "*" if row.significant else ""
            print(f"# {row.system_a} vs {row.system_b}: cmos={row.cmos:.3f}{mark} n={row.n} p={row.p:.4g}")

    if args.save_matrix:
        save_cmos(matrix, args.save_matrix)

    result = mds_1d(matrix, args.ref)
    for name in result.ordering:
        print(f"{name}\t{result.coordinates[name]:.6f}")
    print("ordering: " + " < ".join(result.ordering))

    if args.plot:
        from visualization.plotter import CurationPlotter

        fig = CurationPlotter().create_mds_plot(result.coordinates, result.reference)
        Path(args.plot).parent.mkdir(parents=True, exist_ok=True)
        fig.write_html(args.plot, include_plotlyjs='cdn', div_id="mds")
    return EXIT_OK


def _run_pipeline(args) -> int:
    config = load_pipeline_config(args.config)
    pipeline = CurationPipeline(config, out_dir=args.out, jobs=args.jobs, write_denoised=args.write_denoised)
    if args.command == "run":
        if not args.manifest or not args.ctm:
            raise CurationError("run 需要 --manifest 与 --ctm")
        pipeline.run(args.manifest, args.ctm)
    else:
        pipeline.run_stage(args.command, manifest_path=args.manifest, ctm_path=args.ctm)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        if args.command == "mds":
            return _run_mds(args)
        return _run_pipeline(args)
    except ConfigError as e:
        logger.error(f"配置错误: {e}")
        return EXIT_CONFIG_ERROR
    except (CurationError, OSError) as e:
        logger.error(str(e))
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
