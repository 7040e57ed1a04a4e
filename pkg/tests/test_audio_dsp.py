import numpy as np
import pytest
import soundfile as sf

from conftest import SR, silence, tone, write_pcm16
from config.settings import F0Config, VadConfig
from processing.audio_io import AudioClip, load_wav, write_wav
from processing.denoiser import MmseDenoiser, denoise_mmse
from processing.pitch import normalized_autocorrelation, track_f0
from processing.resampler import resample
from processing.vad import SegmentList, detect_speech, signal_power
from processing.metrics import std_f0
from utils.exceptions import AudioFormatError


def snr_db(clean: np.ndarray, estimate: np.ndarray) -> float:
    return 10 * np.log10(np.sum(clean ** 2) / np.sum((estimate - clean) ** 2))


class TestWavIO:
    def test_mono_sample_count(self, tmp_path):
        path = write_pcm16(tmp_path / "a.wav", tone(440, 0.5))
        clip = load_wav(path)
        assert len(clip) == 8000
        assert clip.sample_rate_hz == SR

    def test_stereo_identical_channels_equals_mono(self, tmp_path):
        samples = tone(440, 0.2)
        mono = load_wav(write_pcm16(tmp_path / "m.wav", samples))
        stereo = load_wav(write_pcm16(tmp_path / "s.wav", np.stack([samples, samples], axis=1)))
        np.testing.assert_array_equal(mono.samples, stereo.samples)

    def test_pcm16_full_scale(self, tmp_path):
        path = tmp_path / "max.wav"
        sf.write(str(path), np.array([32767, 0, -32768], dtype=np.int16), SR, subtype='PCM_16')
        clip = load_wav(path)
        assert clip.samples[0] == pytest.approx(32767 / 32768)
        assert clip.samples[2] == pytest.approx(-1.0)

    def test_unsupported_format(self, tmp_path):
        path = tmp_path / "a.flac"
        sf.write(str(path), tone(440, 0.1), SR, format='FLAC')
        with pytest.raises(AudioFormatError):
            load_wav(path)

    def test_garbage_file(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"not a wav file at all")
        with pytest.raises(AudioFormatError):
            load_wav(path)

    def test_write_wav_clips(self, tmp_path):
        path = tmp_path / "w.wav"
        write_wav(AudioClip(np.array([2.0, -2.0, 0.5]), SR), path)
        clip = load_wav(path)
        assert clip.samples.max() <= 1.0
        assert clip.samples[2] == pytest.approx(0.5, abs=1e-4)


class TestResample:
    def test_identity(self, tone_clip):
        out = resample(tone_clip, SR)
        np.testing.assert_array_equal(out.samples, tone_clip.samples)

    def test_tone_peak_preserved(self):
        clip = AudioClip(tone(1000.0, 1.0, sr=48000), 48000)
        out = resample(clip, 16000)
        assert out.sample_rate_hz == 16000
        assert len(out) == 16000
        spectrum = np.abs(np.fft.rfft(out.samples))
        freqs = np.fft.rfftfreq(len(out), 1 / 16000)
        bin_width = freqs[1] - freqs[0]
        assert abs(freqs[np.argmax(spectrum)] - 1000.0) <= bin_width

    def test_rms_preserved(self):
        clip = AudioClip(tone(440.0, 1.0, sr=44100), 44100)
        out = resample(clip, 16000)
        rms_in = np.sqrt(np.mean(clip.samples ** 2))
        rms_out = np.sqrt(np.mean(out.samples ** 2))
        assert rms_out == pytest.approx(rms_in, rel=0.01)


class TestDenoise:
    def test_all_zeros(self):
        clip = AudioClip(silence(0.5), SR)
        out = denoise_mmse(clip)
        assert len(out) == len(clip)
        assert not np.any(out.samples)

    def test_snr_improvement(self):
        rng = np.random.default_rng(0)
        clean = np.concatenate([silence(0.5), tone(220.0, 1.5)])
        noise_std = np.sqrt(np.mean(tone(220.0, 1.5) ** 2) / 10 ** 0.5)
        noisy = clean + noise_std * rng.standard_normal(len(clean))

        assert snr_db(clean, noisy) < 6.0
        out = denoise_mmse(AudioClip(noisy, SR))
        assert len(out) == len(clean)
        assert snr_db(clean, out.samples) >= 10.0

    def test_clean_chirp_not_distorted(self):
        t = np.arange(int(1.0 * SR)) / SR
        chirp = 0.5 * np.sin(2 * np.pi * (150.0 * t + 200.0 * t ** 2))
        samples = np.concatenate([silence(0.1), chirp])
        out = denoise_mmse(AudioClip(samples, SR))
        assert np.corrcoef(samples, out.samples)[0, 1] >= 0.95

    def test_too_short(self):
        with pytest.raises(ValueError):
            MmseDenoiser().denoise(AudioClip(silence(0.05) + 0.1, SR))

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_pure_noise_energy_not_increased(self, seed):
        rng = np.random.default_rng(seed)
        noise = 0.1 * rng.standard_normal(SR)
        out = denoise_mmse(AudioClip(noise, SR))
        assert np.sum(out.samples ** 2) <= np.sum(noise ** 2)


class TestVad:
    def test_all_zero_clip(self):
        assert len(detect_speech(AudioClip(silence(1.0), SR))) == 0

    def test_silence_tone_silence(self):
        rng = np.random.default_rng(1)
        samples = np.concatenate([silence(1.0), tone(300.0, 1.0), silence(1.0)])
        samples = samples + 1e-3 * rng.standard_normal(len(samples))
        segments = detect_speech(AudioClip(samples, SR))
        assert len(segments) == 1
        start, end = segments.segments[0]
        assert abs(start - 1.0) <= 0.03
        assert abs(end - 2.0) <= 0.03

    def test_two_tones(self):
        samples = np.concatenate([silence(0.5), tone(300.0, 0.5), silence(0.5), tone(300.0, 0.5), silence(0.5)])
        segments = detect_speech(AudioClip(samples, SR))
        assert len(segments) == 2

    def test_short_gap_bridged_by_hangover(self):
        samples = np.concatenate([silence(0.5), tone(300.0, 0.5), silence(0.1), tone(300.0, 0.5), silence(0.5)])
        assert len(detect_speech(AudioClip(samples, SR))) == 1
        no_hangover = VadConfig(hangover_ms=0.0)
        assert len(detect_speech(AudioClip(samples, SR), no_hangover)) == 2

    def test_short_burst_dropped(self):
        samples = np.concatenate([silence(0.5), tone(300.0, 0.03), silence(0.5)])
        assert len(detect_speech(AudioClip(samples, SR))) == 0

    def test_random_clips_give_valid_segments(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            pieces = []
            for _ in range(int(rng.integers(1, 8))):
                dur = float(rng.uniform(0.005, 0.6))
                kind = rng.integers(0, 3)
                if kind == 0:
                    pieces.append(silence(dur))
                elif kind == 1:
                    pieces.append(tone(float(rng.uniform(80, 3000)), dur, amplitude=float(rng.uniform(0.01, 0.9))))
                else:
                    pieces.append(float(rng.uniform(0.001, 0.5)) * rng.standard_normal(int(dur * SR)))
            clip = AudioClip(np.concatenate(pieces), SR)
            cfg = VadConfig(hangover_ms=float(rng.choice([0.0, 50.0, 200.0])))

            segments = detect_speech(clip, cfg).segments
            for start, end in segments:
                assert 0.0 <= start < end <= clip.duration_s
                assert end - start >= cfg.min_speech_ms / 1000.0
            for (_, prev_end), (next_start, _) in zip(segments, segments[1:]):
                assert next_start >= prev_end

    def test_segment_list_validation(self):
        with pytest.raises(ValueError):
            SegmentList(((0.5, 0.4),))
        with pytest.raises(ValueError):
            SegmentList(((0.0, 0.5), (0.4, 0.8)))


class TestSignalPower:
    def test_constant(self):
        clip = AudioClip(np.full(SR, 0.5), SR)
        assert signal_power(clip, SegmentList(((0.0, 1.0),))) == pytest.approx(0.25)

    def test_empty_segments(self, tone_clip):
        assert signal_power(tone_clip, SegmentList()) == 0.0

    def test_full_scale_sine(self):
        clip = AudioClip(tone(1000.0, 1.0, amplitude=1.0), SR)
        assert signal_power(clip, SegmentList(((0.0, 1.0),))) == pytest.approx(0.5, abs=1e-3)

    def test_scaling(self, tone_clip):
        segments = SegmentList(((0.2, 0.8),))
        scaled = AudioClip(tone_clip.samples * 3.0, SR)
        assert signal_power(scaled, segments) == pytest.approx(9.0 * signal_power(tone_clip, segments))


class TestPitch:
    def test_sine_220(self, tone_clip):
        track = track_f0(tone_clip, SegmentList(((0.0, 1.0),)))
        voiced = track.voiced_values
        assert len(voiced) >= 0.9 * len(track.values_hz)
        assert np.all(np.abs(voiced - 220.0) <= 3.0)
        assert std_f0(track) <= 3.0

    def test_sine_at_upper_limit(self):
        clip = AudioClip(tone(400.0, 1.0), SR)
        track = track_f0(clip, SegmentList(((0.0, 1.0),)), F0Config(f_max_hz=400.0))
        voiced = track.voiced_values
        assert len(voiced) >= 0.9 * len(track.values_hz)
        assert np.all(np.abs(voiced - 400.0) <= 3.0)

    def test_white_noise_mostly_unvoiced(self):
        rng = np.random.default_rng(2)
        clip = AudioClip(0.3 * rng.standard_normal(SR), SR)
        track = track_f0(clip, SegmentList(((0.0, 1.0),)))
        assert np.mean(~track.voicing) >= 0.9

    def test_silence_unvoiced(self):
        track = track_f0(AudioClip(silence(1.0), SR), SegmentList(((0.0, 1.0),)))
        assert not track.voicing.any()

    def test_outside_segments_unvoiced(self, tone_clip):
        track = track_f0(tone_clip, SegmentList(((0.5, 1.0),)))
        first_half = track.voicing[: int(0.4 / track.hop_s)]
        assert not first_half.any()
        assert track.voicing.any()

    def test_values_within_range(self):
        clip = AudioClip(tone(100.0, 1.0), SR)
        cfg = F0Config(f_min_hz=120.0, f_max_hz=400.0)
        track = track_f0(clip, SegmentList(((0.0, 1.0),)), cfg)
        assert np.all((track.voiced_values >= 120.0) & (track.voiced_values <= 400.0))

    def test_normalized_autocorrelation_lag_zero(self):
        frame = tone(200.0, 0.04)
        nccf = normalized_autocorrelation(frame, 100)
        assert nccf[0] == pytest.approx(1.0)
        assert np.all(np.abs(nccf) <= 1.0 + 1e-9)
