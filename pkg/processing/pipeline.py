"""筛选流程编排

每个阶段读取 state.json，处理后写回；逐语句阶段在线程池中并行，
结果按 id 排序合并，因此输出与并行度无关。单条语句失败时记为
processing_error 并继续处理其他语句。
"""
import json
import logging
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from tqdm import tqdm

from config.settings import PipelineConfig
from data.loader import CorpusLoader
from data.models import AudioInfo, HypToken, PROCESSING_ERROR, UtteranceRecord, strip_markers
from data.state_manager import CurationState, StateManager
from utils.exceptions import CurationError, StageError, UtteranceError
from visualization.plotter import CurationPlotter
from .alignment import align_hyp_to_ref, detect_internal_silences, transfer_timestamps
from .audio_io import AudioClip, load_wav, write_wav
from .denoiser import MmseDenoiser
from .metrics import build_report, write_metrics_csv
from .pitch import PitchTracker
from .punctuation import classify_silences, punctuate
from .resampler import AudioResampler
from .selection import select, selection_summary
from .splitter import VARIANTS, variant_records, write_split
from .text_normalizer import TextNormalizer
from .vad import EnergyVad, SegmentList

logger = logging.getLogger(__name__)

# run 的执行顺序
STAGES = ("denoise", "normalize", "vad", "align", "metrics", "select", "punctuate")
EXTRA_STAGES = ("report", "split")
ALL_STAGES = STAGES + EXTRA_STAGES

PREREQUISITES: Dict[str, Tuple[str, ...]] = {
    "denoise": (),
    "normalize": (),
    "vad": ("denoise",),
    "align": ("normalize",),
    "metrics": ("vad", "align"),
    "select": ("metrics",),
    "punctuate": ("select",),
    "report": ("select",),
    "split": ("punctuate",),
}

STATE_FILE = "state.json"
METRICS_FILE = "metrics.csv"
SUMMARY_FILE = "selection_summary.json"
KEPT_MANIFEST_FILE = "manifest.kept.tsv"
# 各训练数据条件的清单，manifest.kept.tsv 对应保留且带标点的条件
VARIANT_MANIFESTS: Dict[str, str] = {
    "baseline": "manifest.baseline.tsv",
    "us": "manifest.us.tsv",
    "punc": "manifest.punc.tsv",
    "punc_us": KEPT_MANIFEST_FILE,
}
REPORT_FILE = "report.html"
DENOISED_DIR = "denoised"


def downstream_stages(stage: str) -> List[str]:
    """直接或间接依赖 stage 的阶段（重跑 stage 后它们的结果失效）"""
    result = []
    frontier = [stage]
    while frontier:
        current = frontier.pop()
        for name in ALL_STAGES:
            if current in PREREQUISITES[name] and name not in result:
                result.append(name)
                frontier.append(name)
    return [name for name in ALL_STAGES if name in result]


def write_json(payload: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(payload, f, ensure_ascii=False, sort_keys=True, indent=2)
        f.write("\n")


class CurationPipeline:
    """语料筛选流程：denoise → normalize → vad → align → metrics → select → punctuate"""

    def __init__(self, config: PipelineConfig = None, out_dir='output', jobs: int = 1,
                 write_denoised: bool = False):
        self.config = config or PipelineConfig()
        self.out_dir = Path(out_dir)
        self.jobs = max(1, int(jobs))
        self.write_denoised = write_denoised
        self.state_manager = StateManager(self.out_dir / STATE_FILE)
        self.loader = CorpusLoader()

        self.resampler = AudioResampler(self.config.audio.target_sample_rate_hz)
        self.denoiser = MmseDenoiser(self.config.denoise)
        self.vad = EnergyVad(self.config.vad)
        self.pitch_tracker = PitchTracker(self.config.f0)
        self._normalizer: Optional[TextNormalizer] = None

    @property
    def normalizer(self) -> TextNormalizer:
        if self._normalizer is None:
            self._normalizer = TextNormalizer.from_file(self.config.rules_path())
        return self._normalizer

    # ---- 状态 ----

    def init_state(self, manifest_path) -> CurationState:
        manifest_path = Path(manifest_path)
        records = sorted(self.loader.load_manifest(manifest_path), key=lambda r: r.id)
        state = CurationState(
            records=records,
            stages=[],
            config_md5=self.config.digest(),
            manifest_dir=str(manifest_path.resolve().parent),
        )
        self.state_manager.save(state)
        return state

    def _open_state(self, stage: str, manifest_path=None) -> CurationState:
        if self.state_manager.exists():
            state = self.state_manager.load()
        elif manifest_path is not None:
            state = self.init_state(manifest_path)
        elif PREREQUISITES[stage]:
            raise StageError(stage, PREREQUISITES[stage][0])
        else:
            raise CurationError(f"尚无状态文件 {self.state_manager.state_path}，请提供 --manifest")

        for required in PREREQUISITES[stage]:
            if required not in state.stages:
                raise StageError(stage, required)

        digest = self.config.digest()
        if state.config_md5 != digest:
            logger.warning("配置与此前阶段使用的配置不同，结果可能不一致")
            state.config_md5 = digest
        return state

    def _finish_stage(self, state: CurationState, stage: str) -> None:
        stale = set(downstream_stages(stage)) | {stage}
        state.stages = [name for name in state.stages if name not in stale] + [stage]
        state.records = sorted(state.records, key=lambda r: r.id)
        self.state_manager.save(state)

    # ---- 逐语句并行 ----

    def _map_records(self, stage: str, records: List[UtteranceRecord],
                     fn: Callable[[UtteranceRecord], UtteranceRecord]) -> List[UtteranceRecord]:
        """对未失败的语句执行 fn；异常转为 processing_error，不中断整个批次"""

        def guarded(record: UtteranceRecord) -> UtteranceRecord:
            if record.failed:
                return record
            try:
                return fn(record)
            except Exception as e:
                message = str(e) if isinstance(e, UtteranceError) else f"[{record.id}] {e}"
                logger.warning(f"{stage} 失败 {message}")
                return record.reject(PROCESSING_ERROR, f"{stage}: {e}")

        with ThreadPoolExecutor(max_workers=self.jobs) as executor:
            results = list(tqdm(
                executor.map(guarded, records),
                total=len(records),
                desc=stage,
                disable=None,
                leave=False,
            ))
        failed = sum(1 for before, after in zip(records, results) if after.failed and not before.failed)
        logger.info(f"{stage}: 处理 {len(records)} 条语句，新增失败 {failed} 条")
        return sorted(results, key=lambda r: r.id)

    # ---- 音频 ----

    def _audio_path(self, record: UtteranceRecord, state: CurationState) -> Path:
        path = Path(record.audio_path)
        if not path.is_absolute() and state.manifest_dir:
            path = Path(state.manifest_dir) / path
        return path

    def _load_clip(self, record: UtteranceRecord, state: CurationState) -> AudioClip:
        return self.resampler.resample(load_wav(self._audio_path(record, state)))

    def _save_denoised(self, record: UtteranceRecord, clip: AudioClip) -> str:
        relative = Path(DENOISED_DIR) / f"{record.id}.wav"
        write_wav(self.denoiser.denoise(clip), self.out_dir / relative)
        return relative.as_posix()

    def _denoised_clip(self, record: UtteranceRecord, state: CurationState) -> AudioClip:
        """读取 denoise 阶段保存的降噪音频；文件已被清理时重新降噪并写回"""
        relative = record.audio.denoised_path if record.audio and record.audio.denoised_path else None
        if relative is None or not (self.out_dir / relative).exists():
            logger.debug(f"[{record.id}] 没有降噪音频文件，重新降噪")
            relative = self._save_denoised(record, self._load_clip(record, state))
        return load_wav(self.out_dir / relative)

    # ---- 各阶段 ----

    def _denoise_one(self, record: UtteranceRecord, state: CurationState) -> UtteranceRecord:
        path = self._audio_path(record, state)
        original = load_wav(path)
        denoised_path = self._save_denoised(record, self.resampler.resample(original))

        info = AudioInfo(
            sample_rate_hz=original.sample_rate_hz,
            duration_s=original.duration_s,
            md5=self.state_manager.calculate_file_hash(path),
            denoised_path=denoised_path,
        )
        return replace(record, audio=info)

    def _normalize_one(self, record: UtteranceRecord) -> UtteranceRecord:
        tokens = self.normalizer.normalize(record.raw_text)
        if not tokens:
            raise UtteranceError(record.id, "规范化后文本为空")
        return replace(record, norm_tokens=tuple(tokens))

    def _vad_one(self, record: UtteranceRecord, state: CurationState) -> UtteranceRecord:
        segments = self.vad.detect(self._denoised_clip(record, state))
        if not len(segments):
            logger.debug(f"[{record.id}] 未检测到语音段")
        return replace(record, segments=segments.segments)

    def _align_one(self, record: UtteranceRecord, ctm: Dict[str, List[HypToken]]) -> UtteranceRecord:
        if record.id not in ctm:
            raise UtteranceError(record.id, "CTM 中没有该语句的识别结果")
        cfg = self.config.align
        ref = strip_markers(record.norm_tokens)
        hyp = ctm[record.id]
        alignment = align_hyp_to_ref(ref, hyp, cfg.anchor_min_len)
        timed = transfer_timestamps(ref, alignment, hyp, cfg.trust_substitutions)
        silences = detect_internal_silences(timed, cfg.min_gap_s)
        return replace(
            record,
            timed_tokens=tuple(timed),
            silences=tuple(silences),
            wer=alignment.wer,
            anchors=alignment.anchors,
        )

    def _metrics_one(self, record: UtteranceRecord, state: CurationState) -> UtteranceRecord:
        denoised = self._denoised_clip(record, state)
        segments = SegmentList(record.segments)
        track = self.pitch_tracker.track(denoised, segments)
        if self.config.metrics.power_source == "denoised":
            power_clip = denoised
        else:
            power_clip = self._load_clip(record, state)
        return replace(record, metrics=build_report(record, power_clip, segments, track))

    def _punctuate_one(self, record: UtteranceRecord) -> UtteranceRecord:
        scheme = self.config.punctuation
        tokens = punctuate(record.norm_tokens, record.silences, scheme)
        return replace(record, norm_tokens=tuple(tokens), silences=tuple(classify_silences(record.silences, scheme)))

    # ---- 公共接口 ----

    def run_stage(self, stage: str, manifest_path=None, ctm_path=None) -> CurationState:
        if stage not in ALL_STAGES:
            raise CurationError(f"未知阶段: {stage}")
        state = self._open_state(stage, manifest_path)
        logger.info(f"开始阶段 {stage}（{len(state.records)} 条语句）")
        records = state.records

        if stage == "denoise":
            state.records = self._map_records(stage, records, lambda r: self._denoise_one(r, state))
        elif stage == "normalize":
            state.records = self._map_records(stage, records, self._normalize_one)
        elif stage == "vad":
            state.records = self._map_records(stage, records, lambda r: self._vad_one(r, state))
        elif stage == "align":
            if ctm_path is None:
                raise CurationError("align 阶段需要 --ctm")
            ctm = self.loader.load_ctm(ctm_path)
            state.records = self._map_records(stage, records, lambda r: self._align_one(r, ctm))
        elif stage == "metrics":
            state.records = self._map_records(stage, records, lambda r: self._metrics_one(r, state))
            write_metrics_csv(state.records, self.out_dir / METRICS_FILE)
        elif stage == "select":
            state.records = select(records, self.config.selection)
            summary = selection_summary(state.records)
            write_json(summary, self.out_dir / SUMMARY_FILE)
            logger.info(f"筛选完成：保留 {summary['kept']}/{summary['total']} 条")
        elif stage == "punctuate":
            state.records = self._map_records(stage, records, self._punctuate_one)
            self.write_variant_manifests(state.records)
        elif stage == "report":
            self.write_report(state.records)
        elif stage == "split":
            write_split(state.records, self.out_dir, self.config.split)

        self._finish_stage(state, stage)
        return state

    def write_variant_manifests(self, records: List[UtteranceRecord]) -> Dict[str, int]:
        counts = {}
        for variant in VARIANTS:
            path = self.out_dir / VARIANT_MANIFESTS[variant]
            counts[variant] = self.loader.save_manifest(variant_records(records, variant), path)
        logger.info("各条件清单：" + "，".join(f"{name} {n} 条" for name, n in counts.items()))
        return counts

    def write_report(self, records: List[UtteranceRecord]) -> Path:
        write_metrics_csv(records, self.out_dir / METRICS_FILE)
        write_json(selection_summary(records), self.out_dir / SUMMARY_FILE)
        path = self.out_dir / REPORT_FILE
        CurationPlotter(self.config).write_report(records, path)
        return path

    def run(self, manifest_path, ctm_path) -> CurationState:
        """从清单开始完整运行全部阶段"""
        self.init_state(manifest_path)
        state = None
        for stage in STAGES:
            state = self.run_stage(stage, ctm_path=ctm_path)
        if not self.write_denoised:
            # 之后单独重跑 vad/metrics 时会重新降噪
            shutil.rmtree(self.out_dir / DENOISED_DIR, ignore_errors=True)
        return state
