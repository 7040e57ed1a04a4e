import numpy as np
import pandas as pd
import pytest

from config.settings import METRIC_COLUMNS
from data.models import HypToken, MetricReport, SilenceSpan, Syllable, TimedToken, UtteranceRecord
from processing.alignment import (
    align_hyp_to_ref,
    anchor_coverage,
    detect_internal_silences,
    transfer_timestamps,
)
from processing.audio_io import AudioClip
from processing.metrics import (
    articulation,
    build_report,
    non_fluency,
    std_f0,
    syllable_duration_stats,
    write_metrics_csv,
)
from processing.pitch import F0Track
from processing.vad import SegmentList
from utils.exceptions import UtteranceError


def timed(durations, gap=0.0):
    tokens, t = [], 0.0
    for i, d in enumerate(durations):
        tokens.append(TimedToken(Syllable(f"s{i}"), t, t + d))
        t += d + gap
    return tokens


def silence(duration):
    return SilenceSpan(1.0, 1.0 + duration, 0)


@pytest.mark.parametrize("p, avg, expected", [(0.0, 0.2, 0.0), (0.01, 0.2, 0.002), (0.25, 0.30, 0.075)])
def test_articulation(p, avg, expected):
    assert articulation(p, avg) == pytest.approx(expected)


def test_articulation_rejects_bad_inputs():
    with pytest.raises(ValueError):
        articulation(0.1, 0.0)
    with pytest.raises(ValueError):
        articulation(-0.1, 0.2)


def test_non_fluency():
    assert non_fluency([], 0.2) == 0.0
    assert non_fluency([silence(0.5)], 0.25) == pytest.approx(2.0)
    assert non_fluency([silence(0.2), silence(0.6), silence(0.3)], 0.2) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        non_fluency([silence(0.5)], 0.0)


def test_non_fluency_ignores_shorter_silences():
    base = [silence(0.6)]
    assert non_fluency(base + [silence(0.1), silence(0.59)], 0.2) == non_fluency(base, 0.2)


def test_syllable_duration_stats():
    assert syllable_duration_stats(timed([0.2, 0.2, 0.2])) == pytest.approx((0.2, 0.0))
    assert syllable_duration_stats(timed([0.1, 0.3])) == pytest.approx((0.2, 0.1))


def test_syllable_duration_stats_excludes_unaligned_and_markers():
    tokens = timed([0.1, 0.3]) + [
        TimedToken(Syllable("x"), 1.0, 1.0, aligned=False),
        TimedToken(Syllable("<p1>", is_marker=True), 1.0, 2.0),
    ]
    assert syllable_duration_stats(tokens) == pytest.approx((0.2, 0.1))


def test_syllable_duration_stats_requires_aligned_token():
    with pytest.raises(ValueError):
        syllable_duration_stats([TimedToken(Syllable("x"), 0.0, 0.0, aligned=False)])


def test_syllable_duration_stats_matches_two_pass_oracle():
    rng = np.random.default_rng(5)
    durations = rng.uniform(0.05, 0.5, size=100)
    avg, std = syllable_duration_stats(timed(durations))
    tokens = timed(durations)
    values = [t.end_s - t.start_s for t in tokens]
    mean = sum(values) / len(values)
    oracle_std = (sum((v - mean) ** 2 for v in values) / len(values)) ** 0.5
    assert avg == pytest.approx(mean, rel=1e-12)
    assert std == pytest.approx(oracle_std, rel=1e-9)


def test_std_f0():
    constant = F0Track(0.01, np.full(10, 220.0), np.ones(10, dtype=bool))
    assert std_f0(constant) == 0.0
    two = F0Track(0.01, np.array([200.0, 0.0, 240.0]), np.array([True, False, True]))
    assert std_f0(two) == pytest.approx(20.0)
    single = F0Track(0.01, np.array([200.0, 0.0]), np.array([True, False]))
    assert std_f0(single) == 0.0


def test_equation_exactness_on_random_utterances():
    """50 条随机语句（连续时间戳）：articulation 与 non_fluency 与独立计算一致"""
    rng = np.random.default_rng(6)
    for _ in range(50):
        n = int(rng.integers(2, 20))
        spans, t = [], float(rng.uniform(0.0, 0.5))
        for _ in range(n):
            dur = float(rng.uniform(0.05, 0.4))
            spans.append((t, t + dur))
            t += dur + float(rng.uniform(0.0, 0.4))
        tokens = [TimedToken(Syllable(f"s{i}"), s, e) for i, (s, e) in enumerate(spans)]
        p_signal = float(rng.uniform(0.0, 0.5))

        avg_oracle = sum(e - s for s, e in spans) / n
        gaps = [nxt[0] - prev[1] for prev, nxt in zip(spans, spans[1:])]
        internal = [g for g in gaps if g >= 0.05]
        nf_oracle = max(internal) / avg_oracle if internal else 0.0

        avg, _ = syllable_duration_stats(tokens)
        silences = detect_internal_silences(tokens, 0.05)
        assert len(silences) == len(internal)
        assert articulation(p_signal, avg) == pytest.approx(p_signal * avg_oracle, rel=1e-12, abs=0.0)
        assert non_fluency(silences, avg) == pytest.approx(nf_oracle, rel=1e-12, abs=0.0)


def make_record(durations=(0.2, 0.2, 0.4), gap=0.3):
    tokens = timed(durations, gap)
    silences = detect_internal_silences(tokens, 0.05)
    return UtteranceRecord(
        id="u1",
        audio_path="u1.wav",
        raw_text="a b c",
        norm_tokens=tuple(t.syllable for t in tokens),
        timed_tokens=tuple(tokens),
        silences=tuple(silences),
        wer=0.0,
        anchors=((0, 3),),
    )


def test_build_report_hand_computed():
    record = make_record()
    clip = AudioClip(np.full(16000, 0.5), 16000)
    segments = SegmentList(((0.0, 1.0),))
    track = F0Track(0.01, np.array([200.0, 240.0]), np.array([True, True]))

    report = build_report(record, clip, segments, track)
    avg = (0.2 + 0.2 + 0.4) / 3
    assert report.p_signal == pytest.approx(0.25)
    assert report.avg_syl_dur_s == pytest.approx(avg)
    assert report.articulation == pytest.approx(0.25 * avg)
    assert report.max_internal_silence_s == pytest.approx(0.3)
    assert report.non_fluency == pytest.approx(0.3 / avg)
    assert report.std_f0_hz == pytest.approx(20.0)
    assert report.std_syl_dur_s == pytest.approx(np.std([0.2, 0.2, 0.4]))
    assert report.wer == 0.0
    assert report.anchor_coverage == pytest.approx(1.0)


def test_build_report_coverage_matches_alignment():
    ref = [Syllable(t) for t in "a b c d e".split()]
    hyp = [HypToken(t, i * 0.3, 0.2) for i, t in enumerate("a b c x e".split())]
    alignment = align_hyp_to_ref(ref, hyp, anchor_min_len=3)
    tokens = transfer_timestamps(ref, alignment, hyp)
    record = UtteranceRecord(
        id="u2",
        audio_path="u2.wav",
        raw_text="a b c d e",
        norm_tokens=tuple(ref),
        timed_tokens=tuple(tokens),
        silences=tuple(detect_internal_silences(tokens, 0.05)),
        wer=alignment.wer,
        anchors=alignment.anchors,
    )
    clip = AudioClip(np.full(16000, 0.5), 16000)
    track = F0Track(0.01, np.zeros(2), np.zeros(2, dtype=bool))
    report = build_report(record, clip, SegmentList(((0.0, 1.0),)), track)
    assert report.anchor_coverage == pytest.approx(anchor_coverage(alignment, len(ref)))
    assert report.anchor_coverage == pytest.approx(0.6)


def test_build_report_invariants_on_random_fixtures():
    rng = np.random.default_rng(8)
    for _ in range(20):
        record = make_record(tuple(rng.uniform(0.05, 0.4, size=5)), float(rng.uniform(0.0, 0.5)))
        clip = AudioClip(rng.uniform(-0.5, 0.5, size=16000), 16000)
        track = F0Track(0.01, np.zeros(3), np.zeros(3, dtype=bool))
        report = build_report(record, clip, SegmentList(((0.0, 1.0),)), track)
        assert report.articulation == pytest.approx(report.p_signal * report.avg_syl_dur_s)
        assert report.non_fluency == pytest.approx(report.max_internal_silence_s / report.avg_syl_dur_s)


def test_build_report_no_aligned_tokens_mentions_id():
    record = UtteranceRecord(
        id="bad-utt",
        audio_path="x.wav",
        raw_text="a",
        timed_tokens=(TimedToken(Syllable("a"), 0.0, 0.0, aligned=False),),
        wer=1.0,
    )
    clip = AudioClip(np.zeros(1600), 16000)
    track = F0Track(0.01, np.zeros(0), np.zeros(0, dtype=bool))
    with pytest.raises(UtteranceError, match="bad-utt"):
        build_report(record, clip, SegmentList(), track)


def test_write_metrics_csv(tmp_path):
    report = MetricReport(0.1, 0.02, 0.03, 1.5, 4.0, 0.2, 0.1, 0.3)
    records = [
        UtteranceRecord("b", "b.wav", "x", metrics=report),
        UtteranceRecord("a", "a.wav", "x", metrics=report),
        UtteranceRecord("c", "c.wav", "x"),
    ]
    path = tmp_path / "metrics.csv"
    assert write_metrics_csv(records, path) == 2

    header = path.read_text(encoding='utf-8').splitlines()[0]
    assert header == "id,wer,articulation,std_syl_dur,non_fluency,std_f0,avg_syl_dur,p_signal,max_internal_silence"
    df = pd.read_csv(path)
    assert list(df.columns) == ["id"] + METRIC_COLUMNS
    assert list(df["id"]) == ["a", "b"]
    assert df.loc[0, "non_fluency"] == pytest.approx(1.5)
