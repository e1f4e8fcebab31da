from __future__ import annotations

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affectfuse.ingest import (
    AudioClip,
    DatasetManifest,
    EmotionLabel,
    EmptyAudioError,
    ManifestEntry,
    ManifestError,
    ScoreFileError,
    UnreadableAudioError,
    UnsupportedFormatError,
    decode_wav,
    parse_manifest,
    parse_scores,
    resample,
    write_manifest,
    write_wav,
)

from conftest import tone


def _raw_wav(path, tag, channels, rate, bits, payload):
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, rate, rate * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(payload)) + payload
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


class TestDecode:
    def test_16bit_constant_scales_to_half(self, tmp_path):
        p = tmp_path / "c.wav"
        _raw_wav(p, 1, 1, 16000, 16, struct.pack("<100h", *([16384] * 100)))
        clip = decode_wav(p)
        assert clip.clip_id == "c"
        assert np.all(clip.samples == 0.5)

    def test_stereo_opposite_channels_cancel(self, tmp_path):
        p = tmp_path / "s.wav"
        frames = np.tile([0.5, -0.5], (800, 1))
        write_wav(p, frames, 16000)
        assert np.all(decode_wav(p).samples == 0.0)

    def test_stereo_equal_channels_is_that_channel(self, tmp_path, rng):
        x = np.round(rng.uniform(-1, 1, 500) * 32767) / 32768
        p = tmp_path / "eq.wav"
        write_wav(p, np.stack([x, x], axis=1), 16000)
        np.testing.assert_array_equal(decode_wav(p).samples, x)

    def test_one_second_duration(self, tmp_path):
        p = tmp_path / "one.wav"
        write_wav(p, tone(440, 1000), 16000)
        clip = decode_wav(p)
        assert len(clip.samples) == 16000
        assert clip.duration_ms == 1000

    @pytest.mark.parametrize("bits", [8, 16, 24])
    def test_integer_depths_round_trip(self, tmp_path, bits):
        scale = 2 ** (bits - 1)
        x = np.arange(-8, 8) / 8 * (scale - 1) / scale
        p = tmp_path / f"d{bits}.wav"
        write_wav(p, x, 8000, bits=bits)
        np.testing.assert_allclose(decode_wav(p).samples, x, atol=1 / scale)

    def test_24bit_extremes(self, tmp_path):
        p = tmp_path / "x.wav"
        payload = bytes([0x00, 0x00, 0x80, 0xFF, 0xFF, 0x7F])  # -2^23, 2^23 - 1
        _raw_wav(p, 1, 1, 8000, 24, payload)
        np.testing.assert_allclose(decode_wav(p).samples, [-1.0, (2**23 - 1) / 2**23])

    def test_float32(self, tmp_path):
        x = np.array([0.25, -0.75, 1.5, -2.0])
        p = tmp_path / "f.wav"
        write_wav(p, x, 16000, float_format=True)
        np.testing.assert_allclose(decode_wav(p).samples, [0.25, -0.75, 1.0, -1.0])

    def test_missing_file(self, tmp_path):
        with pytest.raises(UnreadableAudioError):
            decode_wav(tmp_path / "nope.wav")

    def test_not_riff(self, tmp_path):
        p = tmp_path / "junk.wav"
        p.write_bytes(b"hello world, not audio")
        with pytest.raises(UnreadableAudioError):
            decode_wav(p)

    def test_unsupported_depth(self, tmp_path):
        p = tmp_path / "i32.wav"
        _raw_wav(p, 1, 1, 16000, 32, b"\x00" * 16)
        with pytest.raises(UnsupportedFormatError):
            decode_wav(p)

    def test_unsupported_codec(self, tmp_path):
        p = tmp_path / "alaw.wav"
        _raw_wav(p, 6, 1, 8000, 8, b"\x00" * 16)
        with pytest.raises(UnsupportedFormatError):
            decode_wav(p)

    def test_too_many_channels(self, tmp_path):
        p = tmp_path / "c3.wav"
        _raw_wav(p, 1, 3, 8000, 16, b"\x00" * 12)
        with pytest.raises(UnsupportedFormatError):
            decode_wav(p)

    def test_zero_length(self, tmp_path):
        p = tmp_path / "empty.wav"
        _raw_wav(p, 1, 1, 16000, 16, b"")
        with pytest.raises(EmptyAudioError):
            decode_wav(p)

    def test_error_kinds_are_distinct(self):
        kinds = {UnreadableAudioError, UnsupportedFormatError, EmptyAudioError}
        assert len(kinds) == 3
        assert not any(issubclass(a, b) for a in kinds for b in kinds if a is not b)


class TestResample:
    def test_identity(self, rng):
        clip = AudioClip("a", rng.uniform(-1, 1, 1600), 16000)
        out = resample(clip, 16000)
        assert out.samples.tobytes() == clip.samples.tobytes()

    def test_constant(self):
        clip = AudioClip("a", np.full(44100, 0.25), 44100)
        out = resample(clip, 16000)
        np.testing.assert_allclose(out.samples, 0.25, rtol=0, atol=1e-15)

    def test_sine_rms_preserved(self):
        clip = AudioClip("s", tone(1000, 1000, 48000, amp=0.8), 48000)
        out = resample(clip, 16000)
        rms = np.sqrt(np.mean(out.samples**2))
        assert abs(rms - 0.8 / np.sqrt(2)) / (0.8 / np.sqrt(2)) < 0.01

    @given(st.integers(1, 30000), st.sampled_from([8000, 11025, 16000, 22050, 44100, 48000]),
           st.sampled_from([8000, 16000, 22050, 48000]))
    @settings(max_examples=60, deadline=None)
    def test_duration_within_one_ms(self, n, src, dst):
        clip = AudioClip("d", np.zeros(n), src)
        assert abs(resample(clip, dst).duration_ms - clip.duration_ms) <= 1

    def test_rejects_nonpositive_rate(self):
        with pytest.raises(ValueError):
            resample(AudioClip("a", np.zeros(10), 16000), 0)


class TestManifest:
    def _write(self, tmp_path, body):
        p = tmp_path / "m.csv"
        p.write_text("clip_id,split,label,audio_path\n" + body, encoding="utf-8")
        return p

    def test_basic_rows(self, tmp_path):
        m = parse_manifest(self._write(tmp_path, "c1,train,HA,/a.wav\nc2,test,,/b.wav\n"))
        assert m.entries[0].label is EmotionLabel.HA
        assert m.entries[1].label is None
        assert m.resolve(m.entries[0]).as_posix() == "/a.wav"

    def test_case_insensitive_and_full_names(self, tmp_path):
        m = parse_manifest(self._write(tmp_path, "a,train,ha,x.wav\nb,validation,Surprise,y.wav\nc,TRAIN,anger,z.wav\n"))
        assert [e.label for e in m.entries] == [EmotionLabel.HA, EmotionLabel.SU, EmotionLabel.AN]
        assert m.resolve(m.entries[0]) == tmp_path / "x.wav"

    def test_duplicate_id_named(self, tmp_path):
        with pytest.raises(ManifestError, match="c1"):
            parse_manifest(self._write(tmp_path, "c1,train,HA,a.wav\nc1,train,SA,b.wav\n"))

    def test_unknown_label(self, tmp_path):
        with pytest.raises(ManifestError, match="label"):
            parse_manifest(self._write(tmp_path, "c1,train,XX,a.wav\n"))

    def test_unknown_split(self, tmp_path):
        with pytest.raises(ManifestError, match="split"):
            parse_manifest(self._write(tmp_path, "c1,dev,HA,a.wav\n"))

    def test_train_requires_label(self, tmp_path):
        with pytest.raises(ManifestError):
            parse_manifest(self._write(tmp_path, "c1,train,,a.wav\n"))

    def test_header_mandatory(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("c1,train,HA,a.wav\n")
        with pytest.raises(ManifestError, match="header"):
            parse_manifest(p)

    @given(st.lists(
        st.tuples(st.sampled_from(["train", "validation", "test"]), st.sampled_from(list(EmotionLabel)),
                  st.booleans(), st.text("abcdef/._-", min_size=1, max_size=12)),
        max_size=20,
    ))
    @settings(max_examples=50, deadline=None)
    def test_round_trip(self, tmp_path_factory, rows):
        entries = []
        for i, (split, lab, drop, path) in enumerate(rows):
            label = None if (split == "test" and drop) else lab
            entries.append(ManifestEntry(f"clip{i}", split, label, path))
        manifest = DatasetManifest(entries)
        p = tmp_path_factory.mktemp("rt") / "m.csv"
        write_manifest(p, manifest)
        assert parse_manifest(p).entries == entries


class TestScores:
    HEADER = "clip_id,AN,DI,FE,HA,NE,SA,SU\n"

    def _write(self, tmp_path, body):
        p = tmp_path / "s.csv"
        p.write_text(self.HEADER + body)
        return p

    def test_one_hot(self, tmp_path):
        s = parse_scores(self._write(tmp_path, "c1,1,0,0,0,0,0,0\n"), "face")
        assert s.model_id == "face"
        np.testing.assert_array_equal(s.scores["c1"], [1, 0, 0, 0, 0, 0, 0])

    def test_not_normalized(self, tmp_path):
        s = parse_scores(self._write(tmp_path, "c1,0.2,0.2,0.2,0.1,0.1,0.1,0.1\n"))
        np.testing.assert_array_equal(s.scores["c1"], [0.2, 0.2, 0.2, 0.1, 0.1, 0.1, 0.1])
        assert s.model_id == "s"

    def test_wrong_arity(self, tmp_path):
        with pytest.raises(ScoreFileError, match="expected 8"):
            parse_scores(self._write(tmp_path, "c1,1,0,0,0,0,0\n"))

    def test_non_numeric(self, tmp_path):
        with pytest.raises(ScoreFileError, match="non-numeric"):
            parse_scores(self._write(tmp_path, "c1,1,0,0,x,0,0,0\n"))

    def test_non_finite(self, tmp_path):
        with pytest.raises(ScoreFileError):
            parse_scores(self._write(tmp_path, "c1,1,0,0,nan,0,0,0\n"))

    def test_duplicate(self, tmp_path):
        with pytest.raises(ScoreFileError, match="duplicate"):
            parse_scores(self._write(tmp_path, "c1,1,0,0,0,0,0,0\nc1,1,0,0,0,0,0,0\n"))
